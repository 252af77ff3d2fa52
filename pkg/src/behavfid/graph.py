"""Shared-infrastructure graph metrics on the entity-attribute structure.

The bipartite graph links entities to the attribute values they used
(device IDs, IP addresses, ...).  Attribute nodes are qualified by source
column, so device "X" and ip "X" stay distinct even on value collision.
The entity projection connects two entities when they share at least one
attribute; transitivity and triangle counts are computed on it.

For an attribute shared by k entities the projection gains a k-clique
(C(k,2) edges); ``entity_projection`` accepts a fan-out cap to skip such
hub attributes when memory is a concern (default: no cap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InsufficientDataError, PatternUnavailableError
from .ingest import TransactionTable
from .stats import wasserstein1


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    n_entities: int
    entity_labels: np.ndarray  # object array of entity names
    attr_labels: np.ndarray  # object array of "column:value" names
    edge_entities: np.ndarray  # int64, deduplicated (entity, attr) pairs
    edge_attrs: np.ndarray

    @property
    def n_attributes(self) -> int:
        return self.attr_labels.size

    def fanouts(self) -> np.ndarray:
        return np.bincount(self.edge_attrs, minlength=self.n_attributes).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ProjectionGraph:
    n_nodes: int
    edges: np.ndarray  # (m, 2) int64, u < v, unique

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        if self.n_edges:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg


@dataclass(frozen=True)
class P3Result:
    fanout_w1: float
    fanout_w1_normalized: float
    cc_gap: float
    triangle_log_gap: float
    cc: tuple[float, float]
    triangles: tuple[int, int]
    n_attributes: tuple[int, int]


def build_bipartite(
    table: TransactionTable, attribute_cols: Sequence[str] | None = None
) -> BipartiteGraph:
    """Entity-attribute incidence graph with deduplicated edges.

    Entities come from the schema's entity column when mapped, otherwise
    each row is its own entity.  Missing attribute values produce no edge.
    """
    cols = tuple(attribute_cols) if attribute_cols is not None else table.schema.attribute_cols
    if not cols:
        raise PatternUnavailableError("no attribute columns configured for graph metrics")
    for c in cols:
        if c not in table.column_names or table.is_numeric(c):
            raise PatternUnavailableError(f"attribute column {c!r} missing or not categorical")

    entity_col = table.schema.entity_col
    if entity_col is not None:
        raw_ent = table.codes(entity_col)
        if (raw_ent < 0).any():
            raise PatternUnavailableError(f"missing entity values in column {entity_col!r}")
        # compact to the entities actually present (subset tables keep the
        # parent vocabulary, which must not count as graph nodes)
        present, ent = np.unique(raw_ent, return_inverse=True)
        ent = ent.astype(np.int64)
        entity_labels = table.vocab(entity_col)[present]
        n_entities = present.size
    else:
        ent = np.arange(table.n_rows, dtype=np.int64)
        entity_labels = np.array([f"row_{i}" for i in range(table.n_rows)], dtype=object)
        n_entities = table.n_rows

    ent_parts = []
    attr_parts = []
    attr_labels: list[str] = []
    offset = 0
    for c in cols:
        codes = table.codes(c)
        vocab = table.vocab(c)
        present = codes >= 0
        ent_parts.append(ent[present])
        attr_parts.append(codes[present] + offset)
        attr_labels.extend(f"{c}:{v}" for v in vocab)
        offset += vocab.size

    if ent_parts and sum(p.size for p in ent_parts):
        all_ent = np.concatenate(ent_parts).astype(np.int64)
        all_attr = np.concatenate(attr_parts).astype(np.int64)
        keys = np.unique(all_ent * np.int64(offset) + all_attr)
        edge_entities = keys // offset
        edge_attrs = keys % offset
    else:
        edge_entities = np.empty(0, dtype=np.int64)
        edge_attrs = np.empty(0, dtype=np.int64)

    # keep only attribute nodes that actually occur
    used = np.unique(edge_attrs)
    remap = np.full(offset, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    labels = np.array(attr_labels, dtype=object)[used] if used.size else np.empty(0, dtype=object)
    return BipartiteGraph(
        n_entities=n_entities,
        entity_labels=entity_labels,
        attr_labels=labels,
        edge_entities=edge_entities,
        edge_attrs=remap[edge_attrs] if edge_attrs.size else edge_attrs,
    )


def fanout_distribution(g: BipartiteGraph) -> np.ndarray:
    """Multiset of per-attribute fan-outs (distinct entities per attribute)."""
    if g.n_attributes == 0:
        raise InsufficientDataError("graph has no attribute nodes")
    return g.fanouts().astype(np.float64)


def entity_projection(
    g: BipartiteGraph, max_fanout: int | None = None
) -> ProjectionGraph:
    """Entity graph with an edge wherever two entities share an attribute.

    ``max_fanout`` skips clique expansion for attributes shared by more
    entities than the cap (each contributes C(k,2) pairs).
    """
    if g.edge_attrs.size == 0:
        return ProjectionGraph(n_nodes=g.n_entities, edges=np.empty((0, 2), dtype=np.int64))
    order = np.argsort(g.edge_attrs, kind="stable")
    attrs = g.edge_attrs[order]
    ents = g.edge_entities[order]
    bounds = np.concatenate(([0], np.flatnonzero(np.diff(attrs)) + 1, [attrs.size]))
    chunks = []
    for b, e in zip(bounds[:-1], bounds[1:]):
        k = e - b
        if k < 2 or (max_fanout is not None and k > max_fanout):
            continue
        members = np.sort(ents[b:e])
        iu, ju = np.triu_indices(k, k=1)
        chunks.append(np.stack([members[iu], members[ju]], axis=1))
    if not chunks:
        return ProjectionGraph(n_nodes=g.n_entities, edges=np.empty((0, 2), dtype=np.int64))
    pairs = np.concatenate(chunks, axis=0)
    n = np.int64(max(g.n_entities, 1))
    keys = np.unique(pairs[:, 0] * n + pairs[:, 1])
    edges = np.stack([keys // n, keys % n], axis=1)
    return ProjectionGraph(n_nodes=g.n_entities, edges=edges)


def _oriented_csr(p: ProjectionGraph) -> tuple[np.ndarray, np.ndarray]:
    """Orient each edge from the (degree, id)-smaller endpoint; CSR sorted."""
    deg = p.degrees()
    u = p.edges[:, 0]
    v = p.edges[:, 1]
    forward = (deg[u] < deg[v]) | ((deg[u] == deg[v]) & (u < v))
    src = np.where(forward, u, v)
    dst = np.where(forward, v, u)
    order = np.lexsort((dst, src))
    src = src[order]
    dst = dst[order]
    indptr = np.zeros(p.n_nodes + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int64)


def triangle_count(p: ProjectionGraph) -> int:
    """Exact triangle count via degree-ordered neighbor intersection."""
    if p.n_edges == 0:
        return 0
    indptr, indices = _oriented_csr(p)
    return int(kernels.triangle_count_oriented(indptr, indices))


def connected_triples(p: ProjectionGraph) -> int:
    deg = p.degrees()
    return int((deg * (deg - 1) // 2).sum())


def clustering_coefficient(p: ProjectionGraph) -> float:
    """Global transitivity: 3 * triangles / connected triples (0 if none)."""
    triples = connected_triples(p)
    if triples == 0:
        return 0.0
    return 3.0 * triangle_count(p) / triples


def _cc_from_triangles(p: ProjectionGraph, triangles: int) -> float:
    triples = connected_triples(p)
    return 3.0 * triangles / triples if triples else 0.0


def p3_metrics(
    real: BipartiteGraph, syn: BipartiteGraph, max_fanout: int | None = None
) -> P3Result:
    if real.n_attributes == 0:
        raise InsufficientDataError("real graph has no attribute nodes")
    if syn.n_attributes == 0:
        raise InsufficientDataError("synthetic graph has no attribute nodes")
    fo_r = fanout_distribution(real)
    fo_s = fanout_distribution(syn)
    proj_r = entity_projection(real, max_fanout)
    proj_s = entity_projection(syn, max_fanout)
    tri_r = triangle_count(proj_r)
    tri_s = triangle_count(proj_s)
    cc_r = _cc_from_triangles(proj_r, tri_r)
    cc_s = _cc_from_triangles(proj_s, tri_s)
    return P3Result(
        fanout_w1=wasserstein1(fo_r, fo_s),
        fanout_w1_normalized=wasserstein1(
            fo_r / real.n_entities, fo_s / syn.n_entities
        ),
        cc_gap=abs(cc_r - cc_s),
        triangle_log_gap=abs(math.log((tri_r + 1) / (tri_s + 1))),
        cc=(cc_r, cc_s),
        triangles=(tri_r, tri_s),
        n_attributes=(real.n_attributes, syn.n_attributes),
    )


def write_edgelist(g: BipartiteGraph, path: str | Path) -> None:
    """Export the bipartite edges as a two-column CSV (entity, attribute)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("entity,attribute\n")
        for e, a in zip(g.edge_entities, g.edge_attrs):
            fh.write(f"{g.entity_labels[e]},{g.attr_labels[a]}\n")
