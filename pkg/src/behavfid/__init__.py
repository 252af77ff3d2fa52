"""behavfid: behavioral-fidelity scoring for synthetic transaction tables.

Measures whether synthetic tabular transaction data preserves the
sequence- and graph-level behavioral structure of the real data it
imitates: inter-event timing, burst shape, shared-infrastructure graph
motifs, and velocity-rule trigger rates.  Raw metric values are anchored
to a real-data noise floor and reported as degradation ratios (1.0 =
indistinguishable from real sampling variability).
"""

__version__ = "0.1.0"

from .entity import EntitySizeDistribution, assign_entities, size_distribution
from .errors import (
    BehavfidError,
    ConfigError,
    FingerprintMismatchError,
    InsufficientDataError,
    PatternUnavailableError,
    SchemaError,
)
from .graph import (
    BipartiteGraph,
    P3Result,
    ProjectionGraph,
    build_bipartite,
    clustering_coefficient,
    entity_projection,
    fanout_distribution,
    p3_metrics,
    triangle_count,
    write_edgelist,
)
from .ingest import (
    EntitySequence,
    SchemaConfig,
    TransactionTable,
    build_entity_sequences,
    load_schema,
    load_table,
    table_from_columns,
)
from .oracle import (
    MarginalModel,
    PropositionCheck,
    fanout_feasibility,
    fit_marginals,
    generate_bursty_table,
    generate_rowindep,
    pb_fanout_stats,
    verify_prop1,
    verify_prop2,
)
from .scoring import (
    BaselineScores,
    DegradationReport,
    EvalConfig,
    composite,
    degradation_ratio,
    evaluate,
    noise_floor,
)
from .stats import corr_matrix_delta, js_divergence, lag1_autocorr, layer1_report, wasserstein1
from .temporal import (
    Burst,
    IetSequence,
    P1Result,
    P2Result,
    iet_sequence,
    p1_metrics,
    p2_metrics,
    segment_bursts,
)
from .velocity import (
    TriggerRates,
    VelocityRule,
    canonical_ruleset,
    evaluate_rule,
    load_ruleset,
    p4_metric,
    rule_applicability,
    trigger_rates,
)

__all__ = [
    "BaselineScores",
    "BehavfidError",
    "BipartiteGraph",
    "Burst",
    "ConfigError",
    "DegradationReport",
    "EntitySequence",
    "EntitySizeDistribution",
    "EvalConfig",
    "FingerprintMismatchError",
    "IetSequence",
    "InsufficientDataError",
    "MarginalModel",
    "P1Result",
    "P2Result",
    "P3Result",
    "PatternUnavailableError",
    "PropositionCheck",
    "ProjectionGraph",
    "SchemaConfig",
    "SchemaError",
    "TransactionTable",
    "TriggerRates",
    "VelocityRule",
    "assign_entities",
    "build_bipartite",
    "build_entity_sequences",
    "canonical_ruleset",
    "clustering_coefficient",
    "composite",
    "corr_matrix_delta",
    "degradation_ratio",
    "entity_projection",
    "evaluate",
    "evaluate_rule",
    "fanout_distribution",
    "fanout_feasibility",
    "fit_marginals",
    "generate_bursty_table",
    "generate_rowindep",
    "iet_sequence",
    "js_divergence",
    "lag1_autocorr",
    "layer1_report",
    "load_ruleset",
    "load_schema",
    "load_table",
    "noise_floor",
    "p1_metrics",
    "p2_metrics",
    "p3_metrics",
    "p4_metric",
    "pb_fanout_stats",
    "rule_applicability",
    "segment_bursts",
    "size_distribution",
    "table_from_columns",
    "triangle_count",
    "trigger_rates",
    "verify_prop1",
    "verify_prop2",
    "wasserstein1",
    "write_edgelist",
]
