"""Noise-floor baselines, degradation ratios, and report assembly.

The noise floor comes from a seeded 50/50 split of the real data: each raw
sub-metric computed between the two halves is the irreducible sampling
error, and every real-vs-synthetic raw value is normalized by it.  A ratio
of 1.0 means indistinguishable from real sampling variability.

The split unit defaults to the entity (splitting rows would sever the
per-entity sequences the temporal metrics are defined on); a row-level
split is available for tables without entity structure.

Baselines are fingerprinted against the exact table they were computed on
and refuse to normalize a different dataset.  Baseline and report files
are deterministic JSON: same inputs and seed give byte-identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    FingerprintMismatchError,
    InsufficientDataError,
    PatternUnavailableError,
)
from .graph import build_bipartite, p3_metrics
from .ingest import TransactionTable, build_entity_sequences
from .stats import layer1_report
from .temporal import DEFAULT_BURST_DELTAS, p1_metrics, p2_metrics
from .velocity import VelocityRule, canonical_ruleset, p4_metric, trigger_rates

SCHEMA_VERSION = 1
PATTERNS = ("P1", "P2", "P3", "P4")

M_P1_IETD = "p1_ietd_w1"
M_P1_AC = "p1_autocorr_gap"
M_P2_AL = "p2_active_lifetime_w1"
M_P2_BL_MEAN = "p2_burst_len_w1_mean"
M_P3_FO = "p3_fanout_w1"
M_P3_FO_NORM = "p3_fanout_w1_normalized"
M_P3_CC = "p3_cc_gap"
M_P3_TRI = "p3_triangle_log_gap"
M_P4 = "p4_trigger_gap"


def burst_metric_id(delta: float) -> str:
    return f"p2_burst_len_w1@{delta:g}"


@dataclass(frozen=True)
class EvalConfig:
    patterns: tuple[str, ...] = PATTERNS
    burst_deltas: tuple[float, ...] = DEFAULT_BURST_DELTAS
    ruleset: tuple[VelocityRule, ...] | None = None
    entity_class_mode: str = "any"
    projection_max_fanout: int | None = None
    include_graph_extras: bool = False
    # "normalized" divides fan-outs by the entity count, making the
    # composite member size-invariant (real and synthetic tables of
    # different sizes stay comparable); "raw" uses attribute fan-out counts
    # directly and assumes comparably sized sides.  Both values are always
    # reported.
    composite_fanout: str = "normalized"
    weights: dict[str, float] | None = None

    def __post_init__(self) -> None:
        for p in self.patterns:
            if p not in PATTERNS:
                raise ConfigError(f"unknown pattern {p!r}; choose from {PATTERNS}")
        if not self.patterns:
            raise ConfigError("at least one pattern must be requested")
        if self.composite_fanout not in ("normalized", "raw"):
            raise ConfigError("composite_fanout must be 'normalized' or 'raw'")


def check_patterns_supported(table: TransactionTable, patterns: Sequence[str]) -> None:
    """Raise PatternUnavailableError for patterns the schema cannot serve."""
    schema = table.schema
    if {"P1", "P2", "P4"} & set(patterns) and schema.entity_col is None:
        raise PatternUnavailableError(
            "patterns P1/P2/P4 need an entity column; map entity_col in the schema "
            "or run assign-entities on synthetic inputs"
        )
    if "P3" in patterns and not schema.attribute_cols:
        raise PatternUnavailableError(
            "pattern P3 needs attribute_cols (shared-infrastructure columns) in the schema"
        )


def composite_metric_ids(
    patterns: Sequence[str],
    include_graph_extras: bool = False,
    composite_fanout: str = "normalized",
) -> list[str]:
    """Sub-metrics that enter the composite, in stable order."""
    ids: list[str] = []
    if "P1" in patterns:
        ids += [M_P1_IETD, M_P1_AC]
    if "P2" in patterns:
        ids += [M_P2_AL, M_P2_BL_MEAN]
    if "P3" in patterns:
        ids.append(M_P3_FO if composite_fanout == "raw" else M_P3_FO_NORM)
        if include_graph_extras:
            ids += [M_P3_CC, M_P3_TRI]
    if "P4" in patterns:
        ids.append(M_P4)
    return ids


def compute_raw_metrics(
    real: TransactionTable, syn: TransactionTable, config: EvalConfig
) -> tuple[dict[str, float], dict]:
    """All requested raw sub-metric values between two tables."""
    metrics: dict[str, float] = {}
    details: dict = {}
    needs_sequences = bool({"P1", "P2", "P4"} & set(config.patterns))
    if needs_sequences:
        real_seqs = build_entity_sequences(real, config.entity_class_mode)
        syn_seqs = build_entity_sequences(syn, config.entity_class_mode)
        details["n_entities"] = {"real": len(real_seqs), "syn": len(syn_seqs)}
        details["n_fraud_entities"] = {
            "real": sum(s.is_fraud for s in real_seqs),
            "syn": sum(s.is_fraud for s in syn_seqs),
        }
    if "P1" in config.patterns:
        r1 = p1_metrics(real_seqs, syn_seqs)
        metrics[M_P1_IETD] = r1.ietd_w1_fraud
        metrics[M_P1_AC] = r1.autocorr_gap
        details["p1"] = {
            "autocorr_mean_real": r1.autocorr_mean_real,
            "autocorr_mean_syn": r1.autocorr_mean_syn,
            "n_ietd_entities": r1.n_ietd_entities,
            "n_autocorr_entities": r1.n_autocorr_entities,
        }
    if "P2" in config.patterns:
        r2 = p2_metrics(real_seqs, syn_seqs, config.burst_deltas)
        metrics[M_P2_AL] = r2.active_lifetime_w1
        for delta, value in r2.burst_len_w1.items():
            metrics[burst_metric_id(delta)] = value
        metrics[M_P2_BL_MEAN] = r2.burst_len_w1_mean
    if "P3" in config.patterns:
        g_real = build_bipartite(real)
        g_syn = build_bipartite(syn)
        r3 = p3_metrics(g_real, g_syn, config.projection_max_fanout)
        metrics[M_P3_FO] = r3.fanout_w1
        metrics[M_P3_FO_NORM] = r3.fanout_w1_normalized
        metrics[M_P3_CC] = r3.cc_gap
        metrics[M_P3_TRI] = r3.triangle_log_gap
        details["p3"] = {
            "cc": r3.cc,
            "triangles": r3.triangles,
            "n_attributes": r3.n_attributes,
        }
    if "P4" in config.patterns:
        ruleset = list(config.ruleset) if config.ruleset else canonical_ruleset()
        tr_real = trigger_rates(real_seqs, real, ruleset)
        tr_syn = trigger_rates(syn_seqs, syn, ruleset)
        metrics[M_P4] = p4_metric(tr_real, tr_syn)
        details["p4"] = {
            "active_rules": list(tr_real.active_rules),
            "rates_real": tr_real.rates,
            "rates_syn": tr_syn.rates,
        }
    return metrics, details


# ---------------------------------------------------------------------------
# Noise floor.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BaselineScores:
    metrics: dict[str, float]
    patterns: tuple[str, ...]
    split_seed: int
    split_unit: str
    burst_deltas: tuple[float, ...]
    ruleset: tuple[VelocityRule, ...]
    entity_class_mode: str
    projection_max_fanout: int | None
    fingerprint: str
    n_rows: int
    schema_digest: str
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "baseline",
            "metrics": self.metrics,
            "patterns": list(self.patterns),
            "split_seed": self.split_seed,
            "split_unit": self.split_unit,
            "burst_deltas": list(self.burst_deltas),
            "ruleset": [
                {
                    "id": r.id,
                    "feature": r.feature,
                    "op": r.op,
                    "threshold": r.threshold,
                    "window": r.window,
                }
                for r in self.ruleset
            ],
            "entity_class_mode": self.entity_class_mode,
            "projection_max_fanout": self.projection_max_fanout,
            "fingerprint": self.fingerprint,
            "n_rows": self.n_rows,
            "schema_digest": self.schema_digest,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BaselineScores":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported baseline schema_version {data.get('schema_version')!r}"
            )
        return cls(
            metrics={k: float(v) for k, v in data["metrics"].items()},
            patterns=tuple(data["patterns"]),
            split_seed=int(data["split_seed"]),
            split_unit=data["split_unit"],
            burst_deltas=tuple(float(d) for d in data["burst_deltas"]),
            ruleset=tuple(
                VelocityRule(
                    id=r["id"],
                    feature=r["feature"],
                    op=r["op"],
                    threshold=float(r["threshold"]),
                    window=float(r["window"]),
                )
                for r in data["ruleset"]
            ),
            entity_class_mode=data["entity_class_mode"],
            projection_max_fanout=data["projection_max_fanout"],
            fingerprint=data["fingerprint"],
            n_rows=int(data["n_rows"]),
            schema_digest=data["schema_digest"],
            metadata=data.get("metadata", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dump_json(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BaselineScores":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"missing baseline file: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _split_half_indices(
    real: TransactionTable, seed: int, unit: str, class_mode: str
) -> tuple[np.ndarray, np.ndarray, dict]:
    rng = np.random.default_rng(seed)
    rows_a: list[np.ndarray] = []
    rows_b: list[np.ndarray] = []
    counts: dict[str, dict[str, int]] = {}
    if unit == "entity":
        seqs = build_entity_sequences(real, class_mode)
        for label, group in (
            ("nonfraud", [s for s in seqs if not s.is_fraud]),
            ("fraud", [s for s in seqs if s.is_fraud]),
        ):
            k = len(group)
            perm = rng.permutation(k)
            half = k // 2
            a_members = [group[i] for i in perm[:half]]
            b_members = [group[i] for i in perm[half:]]
            rows_a.extend(s.row_indices for s in a_members)
            rows_b.extend(s.row_indices for s in b_members)
            counts[label] = {"A": len(a_members), "B": len(b_members)}
    elif unit == "row":
        cls = real.class_values
        for label, mask in (("nonfraud", cls == 0.0), ("fraud", cls == 1.0)):
            idx = np.flatnonzero(mask)
            perm = rng.permutation(idx.size)
            half = idx.size // 2
            rows_a.append(idx[perm[:half]])
            rows_b.append(idx[perm[half:]])
            counts[label] = {"A": half, "B": idx.size - half}
    else:
        raise ConfigError(f"unknown split unit {unit!r}; choose 'entity' or 'row'")
    if counts.get("fraud", {}).get("A", 0) < 1 or counts.get("fraud", {}).get("B", 0) < 1:
        raise InsufficientDataError(
            "dataset too small to split: each half needs at least one fraud "
            f"{'entity' if unit == 'entity' else 'row'}"
        )
    idx_a = np.sort(np.concatenate(rows_a)) if rows_a else np.empty(0, np.int64)
    idx_b = np.sort(np.concatenate(rows_b)) if rows_b else np.empty(0, np.int64)
    return idx_a, idx_b, counts


def noise_floor(
    real: TransactionTable,
    seed: int,
    patterns: Sequence[str] | None = None,
    config: EvalConfig | None = None,
    split_unit: str = "entity",
) -> BaselineScores:
    """Raw sub-metric values between two seeded halves of the real data."""
    if config is None:
        config = EvalConfig(patterns=tuple(patterns) if patterns else PATTERNS)
    elif patterns is not None:
        config = dataclasses.replace(config, patterns=tuple(patterns))
    check_patterns_supported(real, config.patterns)
    unit = split_unit
    if real.schema.entity_col is None:
        unit = "row"  # each row is its own entity
    idx_a, idx_b, counts = _split_half_indices(
        real, seed, unit, config.entity_class_mode
    )
    half_a = real.take(idx_a)
    half_b = real.take(idx_b)
    metrics, details = compute_raw_metrics(half_a, half_b, config)
    ruleset = tuple(config.ruleset) if config.ruleset else tuple(canonical_ruleset())
    return BaselineScores(
        metrics=metrics,
        patterns=tuple(config.patterns),
        split_seed=seed,
        split_unit=unit,
        burst_deltas=tuple(config.burst_deltas),
        ruleset=ruleset,
        entity_class_mode=config.entity_class_mode,
        projection_max_fanout=config.projection_max_fanout,
        fingerprint=real.fingerprint(),
        n_rows=real.n_rows,
        schema_digest=real.schema.digest(),
        metadata={
            "split_counts": counts,
            "details": _jsonable(details),
            "package_version": __version__,
        },
    )


# ---------------------------------------------------------------------------
# Ratios and composite.
# ---------------------------------------------------------------------------


def degradation_ratio(raw: float, baseline: float) -> float:
    """raw / baseline; 1.0 means within real sampling variability."""
    if baseline <= 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return raw / baseline


def composite(
    ratios: Sequence[float], weights: Sequence[float] | None = None
) -> float:
    """Equal-weighted (or user-weighted, normalized) mean of the ratios."""
    arr = np.asarray(ratios, dtype=np.float64)
    if arr.size == 0:
        raise InsufficientDataError("composite needs at least one ratio")
    if weights is None:
        return float(arr.mean())
    w = np.asarray(weights, dtype=np.float64)
    if w.size != arr.size or (w < 0).any() or w.sum() <= 0:
        raise ConfigError("weights must be nonnegative, same length as ratios, sum > 0")
    return float(np.sum(arr * (w / w.sum())))


# ---------------------------------------------------------------------------
# Full evaluation report.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegradationReport:
    submetrics: dict[str, dict]
    composite: float | None
    layer1: dict
    warnings: list[str]
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "report",
            "submetrics": self.submetrics,
            "composite": self.composite,
            "layer1": self.layer1,
            "warnings": self.warnings,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DegradationReport":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported report schema_version {data.get('schema_version')!r}"
            )
        return cls(
            submetrics=data["submetrics"],
            composite=data["composite"],
            layer1=data["layer1"],
            warnings=list(data["warnings"]),
            metadata=data["metadata"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dump_json(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DegradationReport":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"missing report file: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def render_text(self) -> str:
        lines = []
        lines.append(f"{'sub-metric':<28}{'raw':>14}{'baseline':>14}{'ratio':>10}")
        for mid, entry in self.submetrics.items():
            raw = _fmt(entry.get("raw"))
            base = _fmt(entry.get("baseline"))
            ratio = _fmt(entry.get("ratio"), nd=2)
            mark = "" if entry.get("in_composite") else "  (reported only)"
            flag = entry.get("flag")
            if flag:
                mark = f"  [{flag}]"
            lines.append(f"{mid:<28}{raw:>14}{base:>14}{ratio:>10}{mark}")
        comp = _fmt(self.composite, nd=2)
        k = sum(1 for e in self.submetrics.values() if e.get("in_composite"))
        lines.append(f"{'composite (K=' + str(k) + ')':<28}{'':>14}{'':>14}{comp:>10}")
        l1 = self.layer1
        lines.append("")
        lines.append("layer 1 (marginals):")
        lines.append(f"  mean JS (all columns)      {_fmt(l1.get('mean_js_all_columns'))}")
        lines.append(f"  mean JS (categorical)      {_fmt(l1.get('mean_js_categorical'))}")
        lines.append(f"  mean W1 (numeric)          {_fmt(l1.get('mean_w1_numeric'))}")
        lines.append(f"  corr matrix delta          {_fmt(l1.get('corr_matrix_delta'))}")
        lines.append(
            f"  fraud rate real/syn        {_fmt(l1.get('fraud_rate_real'), nd=5)}"
            f" / {_fmt(l1.get('fraud_rate_syn'), nd=5)}"
        )
        for w in self.warnings:
            lines.append(f"WARNING: {w}")
        return "\n".join(lines)


def _fmt(value, nd: int = 4) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{nd}g}" if abs(value) < 1e6 else f"{value:.6g}"
    return str(value)


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_json(data: dict) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, indent=2) + "\n"


def evaluate(
    real: TransactionTable,
    syn: TransactionTable,
    baseline: BaselineScores,
    config: EvalConfig | None = None,
) -> DegradationReport:
    """Full degradation report of a synthetic table against a real one.

    The baseline fixes the split seed, burst thresholds, ruleset, and
    patterns; ``config`` may narrow the pattern set and set report options.
    """
    if real.fingerprint() != baseline.fingerprint:
        raise FingerprintMismatchError(
            "baseline was computed on a different dataset than the supplied real table"
        )
    patterns = tuple(config.patterns) if config is not None else baseline.patterns
    check_patterns_supported(real, patterns)
    unknown = [p for p in patterns if p not in baseline.patterns]
    if unknown:
        raise ConfigError(
            f"patterns {unknown} not covered by the baseline (has {list(baseline.patterns)})"
        )
    if {"P1", "P2", "P4"} & set(patterns) and syn.schema.entity_col is None:
        raise PatternUnavailableError(
            "synthetic table has no entity column; run assign-entities first "
            "(or pass --assign to evaluate)"
        )
    include_extras = config.include_graph_extras if config else False
    weights_map = config.weights if config else None
    composite_fanout = config.composite_fanout if config else "normalized"
    eff = EvalConfig(
        patterns=patterns,
        burst_deltas=baseline.burst_deltas,
        ruleset=baseline.ruleset,
        entity_class_mode=baseline.entity_class_mode,
        projection_max_fanout=baseline.projection_max_fanout,
        include_graph_extras=include_extras,
        composite_fanout=composite_fanout,
        weights=weights_map,
    )
    layer1 = layer1_report(real, syn)
    metrics, details = compute_raw_metrics(real, syn, eff)

    warnings: list[str] = []
    if layer1["fraud_rate_flagged"]:
        ratio = layer1["fraud_rate_ratio"]
        shown = f"{ratio:.1f}x" if ratio is not None else "infinite"
        warnings.append(
            f"fraud rate mismatch ({shown}): real {layer1['fraud_rate_real']:.5f} vs "
            f"synthetic {layer1['fraud_rate_syn']:.5f}; class-conditional sampling "
            "may be required before behavioral scores are meaningful"
        )

    comp_ids = set(composite_metric_ids(patterns, include_extras, composite_fanout))
    submetrics: dict[str, dict] = {}
    ratios: list[float] = []
    ratio_weights: list[float] = []
    for mid in sorted(metrics):
        raw = metrics[mid]
        base = baseline.metrics.get(mid)
        entry: dict = {"raw": raw, "baseline": base, "ratio": None, "in_composite": False}
        if base is None:
            entry["flag"] = "missing_baseline"
            warnings.append(f"{mid}: baseline value missing; ratio unavailable")
        elif base <= 0:
            entry["flag"] = "non_normalizable"
            warnings.append(f"{mid}: zero baseline; excluded from the composite")
        else:
            entry["ratio"] = degradation_ratio(raw, base)
            if mid in comp_ids:
                entry["in_composite"] = True
                ratios.append(entry["ratio"])
                ratio_weights.append(
                    weights_map.get(mid, 1.0) if weights_map else 1.0
                )
        submetrics[mid] = entry

    comp = composite(ratios, ratio_weights if weights_map else None) if ratios else None
    if comp is None:
        warnings.append("no normalizable sub-metrics; composite unavailable")

    ts_real = real.timestamps
    ts_syn = syn.timestamps
    metadata = {
        "patterns": list(patterns),
        "split_seed": baseline.split_seed,
        "split_unit": baseline.split_unit,
        "burst_deltas": list(baseline.burst_deltas),
        "entity_class_mode": baseline.entity_class_mode,
        "active_rules": details.get("p4", {}).get("active_rules", []),
        "real_fingerprint": baseline.fingerprint,
        "syn_fingerprint": syn.fingerprint(),
        "schema_digest": real.schema.digest(),
        "n_rows": {"real": real.n_rows, "syn": syn.n_rows},
        "time_span": {
            "real": [float(ts_real.min()), float(ts_real.max())] if real.n_rows else None,
            "syn": [float(ts_syn.min()), float(ts_syn.max())] if syn.n_rows else None,
        },
        "details": _jsonable(details),
        "package_version": __version__,
    }
    return DegradationReport(
        submetrics=submetrics,
        composite=comp,
        layer1=_jsonable(layer1),
        warnings=warnings,
        metadata=metadata,
    )


def render_baseline_text(baseline: BaselineScores) -> str:
    lines = [f"{'metric':<28}{'baseline value':>18}"]
    for mid in sorted(baseline.metrics):
        lines.append(f"{mid:<28}{_fmt(baseline.metrics[mid]):>18}")
    lines.append(
        f"split: {baseline.split_unit}-level 50/50, seed {baseline.split_seed}, "
        f"{baseline.n_rows} rows, fingerprint {baseline.fingerprint[:12]}"
    )
    return "\n".join(lines)
