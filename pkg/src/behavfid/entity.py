"""Pseudo-entity assignment for synthetic rows.

Row-independent generators emit no entity identifiers, so sequence-level
metrics need labels imposed after the fact.  Per class, rows are sorted by
timestamp, group sizes are drawn i.i.d. with replacement from the real
per-class entity-size distribution, and label ``syn_<class>_<k>`` goes to
the next block of rows (the final group truncates to whatever remains).

Two modes ship because the time-sorted block construction and a full
within-class shuffle of the row-to-label mapping are both defensible
readings; ``consecutive`` (default) keeps each group contiguous in time,
``permuted`` additionally shuffles which row gets which label within the
class.  Both are fully seeded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError, SchemaError
from .ingest import EntitySequence, TransactionTable

DEFAULT_SEED = 42
MODES = ("consecutive", "permuted")


@dataclass(frozen=True)
class EntitySizeDistribution:
    """Per-class multiset of real entity sizes (row counts >= 1)."""

    sizes_by_class: dict[int, np.ndarray]

    def classes(self) -> tuple[int, ...]:
        return tuple(sorted(self.sizes_by_class))

    def sizes(self, cls: int) -> np.ndarray:
        return self.sizes_by_class[cls]


def size_distribution(seqs: Sequence[EntitySequence]) -> EntitySizeDistribution:
    by_class: dict[int, list[int]] = {0: [], 1: []}
    for s in seqs:
        by_class[1 if s.is_fraud else 0].append(s.n)
    out = {
        c: np.sort(np.asarray(v, dtype=np.int64))
        for c, v in by_class.items()
        if v
    }
    if not out:
        raise InsufficientDataError("no entities to build a size distribution from")
    return EntitySizeDistribution(sizes_by_class=out)


def _draw_sizes(rng: np.random.Generator, pool: np.ndarray, n_rows: int) -> np.ndarray:
    drawn: list[np.ndarray] = []
    total = 0
    est = max(1, int(np.ceil(n_rows / max(1.0, float(pool.mean())))) + 8)
    while total < n_rows:
        chunk = rng.choice(pool, size=est)
        drawn.append(chunk)
        total += int(chunk.sum())
    sizes = np.concatenate(drawn)
    keep = int(np.searchsorted(np.cumsum(sizes), n_rows, side="left")) + 1
    return sizes[:keep]


def assign_entities(
    syn: TransactionTable,
    dist: EntitySizeDistribution,
    seed: int = DEFAULT_SEED,
    mode: str = "consecutive",
    entity_col: str | None = None,
) -> TransactionTable:
    """Label synthetic rows with pseudo-entity IDs drawn from ``dist``.

    Returns a new table with the entity column added (named after the
    schema's entity column, falling back to ``entity_id``).
    """
    if mode not in MODES:
        raise ConfigError(f"unknown assignment mode {mode!r}; choose from {MODES}")
    name = entity_col or syn.schema.entity_col or "entity_id"
    if name in syn.column_names:
        raise SchemaError(f"synthetic table already has a column named {name!r}")

    cls_values = syn.class_values
    ts = syn.timestamps
    labels = np.empty(syn.n_rows, dtype=object)
    for cls in (0, 1):
        rows = np.flatnonzero(cls_values == float(cls))
        if rows.size == 0:
            continue
        if cls not in dist.sizes_by_class:
            raise InsufficientDataError(
                f"synthetic data contains class {cls} but the size distribution has no such class"
            )
        rng = np.random.default_rng([seed, cls])
        order = rows[np.argsort(ts[rows], kind="stable")]
        sizes = _draw_sizes(rng, dist.sizes(cls), order.size)
        group_labels = np.empty(order.size, dtype=object)
        pos = 0
        for k, s in enumerate(sizes, start=1):
            end = min(pos + int(s), order.size)
            group_labels[pos:end] = f"syn_{cls}_{k}"
            pos = end
            if pos >= order.size:
                break
        if mode == "permuted":
            group_labels = group_labels[rng.permutation(order.size)]
        labels[order] = group_labels
    if any(v is None for v in labels):
        raise SchemaError("class column produced rows outside {0, 1}")
    return syn.with_entity_column(name, labels)
