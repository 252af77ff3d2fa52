"""Temporal pattern metrics: inter-event timing and burst structure.

P1 compares the pooled fraud inter-event-time distribution (W1, seconds)
and the mean within-entity lag-1 autocorrelation between two datasets.
P2 compares fraud active lifetimes and burst-length distributions at a set
of gap thresholds (default 60 s, 5 min, 30 min).

Pooling happens before the distance: IETs and burst lengths are unioned
across fraud entities, then compared, rather than averaged per entity.
Zero gaps from simultaneous transactions are kept; they are the extreme
burst signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, InsufficientDataError
from .ingest import EntitySequence
from .stats import lag1_autocorr, wasserstein1

DEFAULT_BURST_DELTAS = (60.0, 300.0, 1800.0)


@dataclass(frozen=True, eq=False)
class IetSequence:
    entity_label: str
    is_fraud: bool
    deltas: np.ndarray


@dataclass(frozen=True)
class Burst:
    entity_label: str
    start_index: int
    length: int


@dataclass(frozen=True)
class P1Result:
    ietd_w1_fraud: float
    autocorr_gap: float
    autocorr_mean_real: float
    autocorr_mean_syn: float
    n_ietd_entities: tuple[int, int]
    n_autocorr_entities: tuple[int, int]


@dataclass(frozen=True)
class P2Result:
    active_lifetime_w1: float
    burst_len_w1: dict[float, float]
    burst_len_w1_mean: float
    n_fraud_entities: tuple[int, int]


def iet_sequence(seq: EntitySequence) -> IetSequence:
    """Consecutive timestamp differences; empty when the entity has < 2 rows."""
    return IetSequence(
        entity_label=seq.entity_label,
        is_fraud=seq.is_fraud,
        deltas=np.diff(seq.timestamps),
    )


def segment_bursts(seq: EntitySequence, delta: float) -> list[Burst]:
    """Partition a sequence into maximal runs with internal gaps <= delta."""
    if delta <= 0:
        raise ConfigError(f"burst gap threshold must be positive, got {delta}")
    lengths = kernels.burst_lengths(seq.timestamps, float(delta))
    bursts = []
    start = 0
    for ln in lengths:
        bursts.append(Burst(seq.entity_label, start, int(ln)))
        start += int(ln)
    return bursts


def _fraud(seqs: Iterable[EntitySequence]) -> list[EntitySequence]:
    return [s for s in seqs if s.is_fraud]


def _pooled_fraud_iets(seqs: Sequence[EntitySequence], side: str) -> tuple[np.ndarray, int]:
    chunks = [np.diff(s.timestamps) for s in seqs if s.n >= 2]
    if not chunks:
        raise InsufficientDataError(
            f"{side} side has no fraud entities with >= 2 transactions"
        )
    return np.concatenate(chunks), len(chunks)


def _autocorr_values(seqs: Sequence[EntitySequence], side: str) -> np.ndarray:
    vals = []
    for s in seqs:
        rho = lag1_autocorr(np.diff(s.timestamps))
        if rho is not None:
            vals.append(rho)
    if not vals:
        raise InsufficientDataError(
            f"{side} side has no fraud entities with a defined lag-1 autocorrelation"
        )
    return np.asarray(vals)


def p1_metrics(
    real: Sequence[EntitySequence], syn: Sequence[EntitySequence]
) -> P1Result:
    real_f = _fraud(real)
    syn_f = _fraud(syn)
    pool_r, n_r = _pooled_fraud_iets(real_f, "real")
    pool_s, n_s = _pooled_fraud_iets(syn_f, "synthetic")
    rho_r = _autocorr_values(real_f, "real")
    rho_s = _autocorr_values(syn_f, "synthetic")
    return P1Result(
        ietd_w1_fraud=wasserstein1(pool_r, pool_s),
        autocorr_gap=float(abs(rho_r.mean() - rho_s.mean())),
        autocorr_mean_real=float(rho_r.mean()),
        autocorr_mean_syn=float(rho_s.mean()),
        n_ietd_entities=(n_r, n_s),
        n_autocorr_entities=(rho_r.size, rho_s.size),
    )


def _lifetimes(seqs: Sequence[EntitySequence]) -> np.ndarray:
    return np.array([s.timestamps[-1] - s.timestamps[0] for s in seqs])


def _pooled_burst_lengths(seqs: Sequence[EntitySequence], delta: float) -> np.ndarray:
    return np.concatenate(
        [kernels.burst_lengths(s.timestamps, delta).astype(np.float64) for s in seqs]
    )


def p2_metrics(
    real: Sequence[EntitySequence],
    syn: Sequence[EntitySequence],
    deltas: Sequence[float] = DEFAULT_BURST_DELTAS,
) -> P2Result:
    if not deltas or any(d <= 0 for d in deltas):
        raise ConfigError("burst gap thresholds must be a non-empty list of positives")
    real_f = _fraud(real)
    syn_f = _fraud(syn)
    if not real_f:
        raise InsufficientDataError("real side has zero fraud entities")
    if not syn_f:
        raise InsufficientDataError("synthetic side has zero fraud entities")
    lifetime_w1 = wasserstein1(_lifetimes(real_f), _lifetimes(syn_f))
    burst_w1: dict[float, float] = {}
    for delta in deltas:
        burst_w1[float(delta)] = wasserstein1(
            _pooled_burst_lengths(real_f, float(delta)),
            _pooled_burst_lengths(syn_f, float(delta)),
        )
    return P2Result(
        active_lifetime_w1=lifetime_w1,
        burst_len_w1=burst_w1,
        burst_len_w1_mean=float(np.mean(list(burst_w1.values()))),
        n_fraud_entities=(len(real_f), len(syn_f)),
    )
