"""Velocity-rule engine: windowed aggregates per entity, trigger rates, B4 gap.

Windows are trailing half-open intervals ``(t - w, t]`` anchored at each
transaction that carries the aggregated value; a rule triggers for an
entity when any window satisfies ``aggregate > threshold``.  Rows with a
missing value for the rule's feature are excluded from that rule's
aggregate (a missing merchant is not a merchant).

The canonical eight-rule set:

    R1  transaction count        > 3      per 1 h
    R2  distinct merchants       > 5      per 24 h
    R3  amount sum               > 1000   per 24 h
    R4  transaction count        > 1      while account age < 7 d
    R5  distinct payment methods > 2      per 7 d
    R6  max/median amount ratio  > 3.0    over the trailing 30 d (>= 2
        amounts in the window; zero-median windows are skipped)
    R7  failed transactions      > 2      per 1 h
    R8  distinct IPs             > 3      per 24 h

Rule applicability is schema-driven: a rule is active iff the schema maps
every column role the rule needs.  R4's age comes from the mapped
account-age column (days), or from the entity's first observed timestamp
when the schema maps ``account_age_col = @first_seen``.  R7 counts rows
whose status value equals "failed" (case-insensitive).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, InsufficientDataError, PatternUnavailableError
from .ingest import FIRST_SEEN_SENTINEL, EntitySequence, SchemaConfig, TransactionTable

HOUR = 3600.0
DAY = 86400.0

FAILED_STATUS = "failed"

# feature -> schema role needed beyond timestamps (None: timestamps suffice)
FEATURE_ROLES: dict[str, str | None] = {
    "txn_count": None,
    "distinct_merchants": "merchant_col",
    "amount_sum": "amount_col",
    "txn_count_young_account": "account_age_col",
    "distinct_payment_methods": "payment_method_col",
    "amount_spike_ratio": "amount_col",
    "failed_count": "status_col",
    "distinct_ips": "ip_col",
}


@dataclass(frozen=True)
class VelocityRule:
    id: str
    feature: str
    op: str
    threshold: float
    window: float  # seconds; for txn_count_young_account this is the age limit

    def __post_init__(self) -> None:
        if self.feature not in FEATURE_ROLES:
            raise ConfigError(f"rule {self.id}: unknown feature {self.feature!r}")
        if self.op != ">":
            raise ConfigError(f"rule {self.id}: only the '>' operator is supported")
        if self.threshold <= 0 or self.window <= 0:
            raise ConfigError(f"rule {self.id}: threshold and window must be positive")

    @property
    def required_role(self) -> str | None:
        return FEATURE_ROLES[self.feature]


@dataclass(frozen=True)
class TriggerRates:
    rates: dict[str, float]
    active_rules: tuple[str, ...]
    n_fraud_entities: int


def canonical_ruleset() -> list[VelocityRule]:
    return [
        VelocityRule("R1", "txn_count", ">", 3, HOUR),
        VelocityRule("R2", "distinct_merchants", ">", 5, 24 * HOUR),
        VelocityRule("R3", "amount_sum", ">", 1000.0, 24 * HOUR),
        VelocityRule("R4", "txn_count_young_account", ">", 1, 7 * DAY),
        VelocityRule("R5", "distinct_payment_methods", ">", 2, 7 * DAY),
        VelocityRule("R6", "amount_spike_ratio", ">", 3.0, 30 * DAY),
        VelocityRule("R7", "failed_count", ">", 2, HOUR),
        VelocityRule("R8", "distinct_ips", ">", 3, 24 * HOUR),
    ]


def load_ruleset(path: str | Path) -> list[VelocityRule]:
    """Parse a ``<id>.<field> = value`` rule file into a rule list."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing ruleset file: {path}")
    fields: dict[str, dict[str, str]] = {}
    order: list[str] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line or "." not in line.split("=", 1)[0]:
            raise ConfigError(f"{path}:{lineno}: expected '<id>.<field> = value'")
        key, _, value = line.partition("=")
        rule_id, _, field_name = key.strip().partition(".")
        if rule_id not in fields:
            fields[rule_id] = {}
            order.append(rule_id)
        fields[rule_id][field_name] = value.strip()
    rules = []
    for rule_id in order:
        spec = fields[rule_id]
        try:
            rules.append(
                VelocityRule(
                    id=rule_id,
                    feature=spec["feature"],
                    op=spec.get("op", ">"),
                    threshold=float(spec["threshold"]),
                    window=float(spec["window"]),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"{path}: rule {rule_id} missing field {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"{path}: rule {rule_id}: {exc}") from exc
    if not rules:
        raise ConfigError(f"{path}: no rules defined")
    return rules


def rule_applicability(
    ruleset: Sequence[VelocityRule], schema: SchemaConfig
) -> tuple[VelocityRule, ...]:
    """The subset of rules whose required schema roles are mapped."""
    active = []
    for rule in ruleset:
        role = rule.required_role
        if role is None or getattr(schema, role) is not None:
            active.append(rule)
    return tuple(active)


def _failed_code_mask(table: TransactionTable) -> np.ndarray:
    vocab = table.vocab(table.schema.status_col)
    return np.array([str(v).strip().lower() == FAILED_STATUS for v in vocab], dtype=bool)


def _distinct_inputs(
    seq: EntitySequence, table: TransactionTable, col: str
) -> tuple[np.ndarray, np.ndarray, int]:
    codes = table.codes(col)[seq.row_indices]
    present = codes >= 0
    ts = seq.timestamps[present]
    _, compact = np.unique(codes[present], return_inverse=True)
    return ts, compact.astype(np.int64), int(compact.max()) + 1 if compact.size else 0


def evaluate_rule(
    seq: EntitySequence, table: TransactionTable, rule: VelocityRule
) -> bool:
    """True iff some transaction of the entity satisfies the rule."""
    role = rule.required_role
    schema = table.schema
    if role is not None and getattr(schema, role) is None:
        raise PatternUnavailableError(
            f"rule {rule.id} requires schema role {role} which is not mapped"
        )
    ts = seq.timestamps

    if rule.feature == "txn_count":
        return bool(kernels.window_count_triggered(ts, rule.window, rule.threshold))

    if rule.feature == "failed_count":
        failed_vocab = _failed_code_mask(table)
        if not failed_vocab.any():
            return False
        codes = table.codes(schema.status_col)[seq.row_indices]
        mask = (codes >= 0) & failed_vocab[np.clip(codes, 0, None)]
        return bool(
            kernels.window_count_triggered(ts[mask], rule.window, rule.threshold)
        )

    if rule.feature in ("distinct_merchants", "distinct_payment_methods", "distinct_ips"):
        col = {
            "distinct_merchants": schema.merchant_col,
            "distinct_payment_methods": schema.payment_method_col,
            "distinct_ips": schema.ip_col,
        }[rule.feature]
        wts, compact, n_codes = _distinct_inputs(seq, table, col)
        if wts.size == 0:
            return False
        return bool(
            kernels.window_distinct_triggered(
                wts, compact, n_codes, rule.window, rule.threshold
            )
        )

    if rule.feature in ("amount_sum", "amount_spike_ratio"):
        amounts = table.numeric_values(schema.amount_col)[seq.row_indices]
        finite = np.isfinite(amounts)
        wts = ts[finite]
        vals = amounts[finite]
        if wts.size == 0:
            return False
        if rule.feature == "amount_sum":
            return bool(
                kernels.window_sum_triggered(wts, vals, rule.window, rule.threshold)
            )
        return bool(
            kernels.window_spike_triggered(wts, vals, rule.window, rule.threshold)
        )

    if rule.feature == "txn_count_young_account":
        if schema.account_age_col == FIRST_SEEN_SENTINEL:
            ages_days = (ts - ts[0]) / DAY
        else:
            ages_days = table.numeric_values(schema.account_age_col)[seq.row_indices]
        age_limit_days = rule.window / DAY
        young = ages_days < age_limit_days  # NaN compares False: unknown age rows excluded
        return bool(np.count_nonzero(young) > rule.threshold)

    raise ConfigError(f"rule {rule.id}: unknown feature {rule.feature!r}")


def trigger_rates(
    seqs: Sequence[EntitySequence],
    table: TransactionTable,
    ruleset: Sequence[VelocityRule] | None = None,
    schema: SchemaConfig | None = None,
) -> TriggerRates:
    """Per-rule fraction of fraud entities that trigger at least once."""
    ruleset = list(ruleset) if ruleset is not None else canonical_ruleset()
    schema = schema if schema is not None else table.schema
    fraud = [s for s in seqs if s.is_fraud]
    if not fraud:
        raise InsufficientDataError("no fraud entities to evaluate velocity rules on")
    active = rule_applicability(ruleset, schema)
    rates: dict[str, float] = {}
    for rule in active:
        hits = sum(1 for s in fraud if evaluate_rule(s, table, rule))
        rates[rule.id] = hits / len(fraud)
    return TriggerRates(
        rates=rates,
        active_rules=tuple(r.id for r in active),
        n_fraud_entities=len(fraud),
    )


def p4_metric(real: TriggerRates, syn: TriggerRates) -> float:
    """Mean absolute trigger-rate gap over the shared active rule set."""
    if real.active_rules != syn.active_rules:
        raise PatternUnavailableError(
            f"mismatched active rule sets: {real.active_rules} vs {syn.active_rules}"
        )
    if not real.active_rules:
        raise InsufficientDataError("no active velocity rules")
    gaps = [abs(real.rates[r] - syn.rates[r]) for r in real.active_rules]
    return float(np.mean(gaps))
