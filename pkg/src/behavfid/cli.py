"""Command-line front door.

Subcommands: ``baseline`` (noise floor from a seeded 50/50 split),
``evaluate`` (degradation report for a synthetic table), ``assign-entities``
(pseudo-entity labeling), and ``oracle`` (row-independent generation and
the two impossibility checks).

Exit codes: 0 success, 1 failed oracle proposition check, 2 usage/config,
3 data insufficiency, 4 baseline fingerprint mismatch, 5 schema/pattern
incompatibility.  The default seed is 42, overridable with --seed or the
BEHAVFID_SEED environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from ._accel import set_num_threads
from .entity import MODES, assign_entities, size_distribution
from .errors import (
    BehavfidError,
    ConfigError,
    FingerprintMismatchError,
    InsufficientDataError,
    PatternUnavailableError,
    SchemaError,
)
from .graph import build_bipartite, write_edgelist
from .ingest import build_entity_sequences, load_schema, load_table
from .oracle import fit_marginals, generate_rowindep, verify_prop1, verify_prop2
from .scoring import (
    PATTERNS,
    BaselineScores,
    EvalConfig,
    evaluate,
    noise_floor,
    render_baseline_text,
)
from .velocity import load_ruleset

DEFAULT_SEED = 42
SEED_ENV = "BEHAVFID_SEED"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_FINGERPRINT = 4
EXIT_PATTERN = 5

_ERROR_CODES = [
    (FingerprintMismatchError, EXIT_FINGERPRINT),
    (PatternUnavailableError, EXIT_PATTERN),
    (InsufficientDataError, EXIT_DATA),
    (SchemaError, EXIT_CONFIG),
    (ConfigError, EXIT_CONFIG),
    (BehavfidError, EXIT_CONFIG),
]


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV, "").strip()
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def _parse_patterns(spec: str | None) -> tuple[str, ...] | None:
    if spec is None:
        return None
    out = []
    for token in spec.split(","):
        token = token.strip().upper()
        if not token:
            continue
        if token not in PATTERNS:
            raise ConfigError(f"unknown pattern {token!r}; choose from {PATTERNS}")
        out.append(token)
    if not out:
        raise ConfigError("no patterns given")
    return tuple(out)


def _auto_patterns(schema) -> tuple[str, ...]:
    pats: list[str] = []
    if schema.entity_col is not None:
        pats += ["P1", "P2"]
    if schema.attribute_cols:
        pats.append("P3")
    if schema.entity_col is not None:
        pats.append("P4")
    if not pats:
        raise PatternUnavailableError(
            "schema supports no pattern: map entity_col for P1/P2/P4 or attribute_cols for P3"
        )
    return tuple(pats)


def _parse_deltas(spec: str | None) -> tuple[float, ...] | None:
    if spec is None:
        return None
    try:
        deltas = tuple(float(v) for v in spec.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad burst deltas {spec!r}: {exc}") from exc
    if not deltas:
        raise ConfigError("no burst deltas given")
    return deltas


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="behavfid",
        description="Behavioral-fidelity scoring for synthetic transaction tables.",
    )
    parser.add_argument("--version", action="version", version=f"behavfid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_base = sub.add_parser("baseline", help="compute the real-data noise floor")
    p_base.add_argument("--real", required=True, help="real CSV")
    p_base.add_argument("--schema", required=True, help="schema config file")
    p_base.add_argument("--out", required=True, help="output baseline JSON")
    p_base.add_argument("--seed", type=int, default=None)
    p_base.add_argument("--patterns", default=None, help="e.g. p1,p2,p4 (default: auto)")
    p_base.add_argument("--burst-deltas", default=None, help="seconds, e.g. 60,300,1800")
    p_base.add_argument("--ruleset", default=None, help="custom velocity rule file")
    p_base.add_argument("--split-unit", choices=("entity", "row"), default="entity")
    p_base.add_argument("--entity-class-mode", choices=("any", "strict"), default="any")
    p_base.add_argument("--threads", type=int, default=None)

    p_eval = sub.add_parser("evaluate", help="score a synthetic table against real data")
    p_eval.add_argument("--real", required=True)
    p_eval.add_argument("--syn", required=True)
    p_eval.add_argument("--schema", required=True)
    p_eval.add_argument("--baseline", required=True)
    p_eval.add_argument("--out", required=True, help="output report file")
    p_eval.add_argument("--format", choices=("json", "text"), default="json")
    p_eval.add_argument("--patterns", default=None, help="subset of the baseline patterns")
    p_eval.add_argument(
        "--assign",
        action="store_true",
        help="assign pseudo-entities to the synthetic table when it lacks an entity column",
    )
    p_eval.add_argument("--assign-mode", choices=MODES, default="consecutive")
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument(
        "--include-graph-extras",
        action="store_true",
        help="include clustering/triangle gaps in the composite (default: fan-out only)",
    )
    p_eval.add_argument(
        "--composite-fanout",
        choices=("normalized", "raw"),
        default="normalized",
        help="fan-out variant entering the composite (raw assumes equally sized tables)",
    )
    p_eval.add_argument(
        "--export-graph",
        default=None,
        metavar="PREFIX",
        help="write bipartite edge lists to PREFIX.real.csv / PREFIX.syn.csv",
    )
    p_eval.add_argument("--threads", type=int, default=None)

    p_assign = sub.add_parser("assign-entities", help="label synthetic rows with pseudo-entities")
    p_assign.add_argument("--real", required=True)
    p_assign.add_argument("--syn", required=True)
    p_assign.add_argument("--schema", required=True)
    p_assign.add_argument("--out", required=True, help="labeled CSV output")
    p_assign.add_argument("--mode", choices=MODES, default="consecutive")
    p_assign.add_argument("--seed", type=int, default=None)
    p_assign.add_argument("--entity-class-mode", choices=("any", "strict"), default="any")

    p_oracle = sub.add_parser("oracle", help="row-independent generator and impossibility checks")
    o_sub = p_oracle.add_subparsers(dest="oracle_command", required=True)

    p_gen = o_sub.add_parser("gen", help="fit marginals and sample a row-independent table")
    p_gen.add_argument("--fit", required=True, help="CSV to fit marginals on")
    p_gen.add_argument("--schema", required=True)
    p_gen.add_argument("--rows", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=None)

    p_check = o_sub.add_parser("check", help="verify an impossibility proposition")
    p_check.add_argument("--prop", type=int, choices=(1, 2), required=True)
    p_check.add_argument("--p", type=float, default=None, help="attribute probability (prop 1)")
    p_check.add_argument("--sizes", default=None, help="entity sizes, e.g. 1,1,4 (prop 1)")
    p_check.add_argument("--trials", type=int, default=10_000, help="prop 1 trials")
    p_check.add_argument("--n", type=int, default=None, help="entity size n_u (prop 2)")
    p_check.add_argument(
        "--dist", choices=("uniform", "exponential"), default="uniform", help="prop 2"
    )
    p_check.add_argument("--entities", type=int, default=100_000, help="prop 2 entities")
    p_check.add_argument("--seed", type=int, default=None)

    return parser


def _cmd_baseline(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    if args.threads:
        set_num_threads(args.threads)
    schema = load_schema(args.schema)
    real = load_table(args.real, schema)
    patterns = _parse_patterns(args.patterns) or _auto_patterns(schema)
    deltas = _parse_deltas(args.burst_deltas)
    ruleset = tuple(load_ruleset(args.ruleset)) if args.ruleset else None
    config = EvalConfig(
        patterns=patterns,
        burst_deltas=deltas or EvalConfig().burst_deltas,
        ruleset=ruleset,
        entity_class_mode=args.entity_class_mode,
    )
    baseline = noise_floor(real, seed, config=config, split_unit=args.split_unit)
    baseline.save(args.out)
    print(render_baseline_text(baseline))
    print(f"baseline written to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    if args.threads:
        set_num_threads(args.threads)
    schema = load_schema(args.schema)
    real = load_table(args.real, schema)
    baseline = BaselineScores.load(args.baseline)
    syn = load_table(args.syn, schema, tolerate_missing_entity=True)
    patterns = _parse_patterns(args.patterns) or baseline.patterns
    if syn.schema.entity_col is None and {"P1", "P2", "P4"} & set(patterns):
        if not args.assign:
            raise PatternUnavailableError(
                "synthetic table has no entity column; re-run with --assign or use "
                "the assign-entities subcommand first"
            )
        dist = size_distribution(
            build_entity_sequences(real, baseline.entity_class_mode)
        )
        syn = assign_entities(
            syn, dist, seed=seed, mode=args.assign_mode, entity_col=schema.entity_col
        )
    config = EvalConfig(
        patterns=patterns,
        include_graph_extras=args.include_graph_extras,
        composite_fanout=args.composite_fanout,
    )
    report = evaluate(real, syn, baseline, config)
    if args.format == "json":
        report.save(args.out)
    else:
        Path(args.out).write_text(report.render_text() + "\n", encoding="utf-8")
    if args.export_graph and "P3" in patterns:
        write_edgelist(build_bipartite(real), f"{args.export_graph}.real.csv")
        write_edgelist(build_bipartite(syn), f"{args.export_graph}.syn.csv")
    print(report.render_text())
    print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_assign(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    schema = load_schema(args.schema)
    real = load_table(args.real, schema)
    syn = load_table(args.syn, schema, tolerate_missing_entity=True)
    if syn.schema.entity_col is not None:
        raise ConfigError(
            f"synthetic table already has entity column {syn.schema.entity_col!r}"
        )
    dist = size_distribution(build_entity_sequences(real, args.entity_class_mode))
    labeled = assign_entities(
        syn, dist, seed=seed, mode=args.mode, entity_col=schema.entity_col
    )
    labeled.to_csv(
        args.out,
        header_comment=(
            f"entity assignment: mode={args.mode} seed={seed} "
            f"size_source={real.fingerprint()[:12]}"
        ),
    )
    n_entities = labeled.vocab(labeled.schema.entity_col).size
    print(f"labeled {labeled.n_rows} rows into {n_entities} entities -> {args.out}")
    return EXIT_OK


def _cmd_oracle_gen(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    schema = load_schema(args.schema)
    real = load_table(args.fit, schema)
    model = fit_marginals(real)
    syn = generate_rowindep(model, args.rows, seed)
    syn.to_csv(
        args.out,
        header_comment=(
            f"row-independent sample: rows={args.rows} seed={seed} "
            f"fitted_on={model.source_fingerprint[:12]}"
        ),
    )
    print(f"wrote {args.rows} row-independent rows to {args.out}")
    return EXIT_OK


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    if args.prop == 1:
        if args.p is None or args.sizes is None:
            raise ConfigError("oracle check --prop 1 needs --p and --sizes")
        try:
            sizes = [int(v) for v in args.sizes.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --sizes {args.sizes!r}: {exc}") from exc
        try:
            check = verify_prop1(args.p, sizes, n_trials=args.trials, seed=seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        print(f"proposition 1: fan-out of grouped i.i.d. rows (p={args.p}, sizes={sizes})")
        for key in ("fanout_mean", "fanout_variance"):
            print(
                f"  {key}: predicted {check.predicted[key]:.6f}, "
                f"observed {check.observed[key]:.6f} "
                f"(tolerance {check.tolerance[key]:.6f})"
            )
        print(f"  variance <= mean observed: {check.details['variance_le_mean_observed']}")
    else:
        if args.n is None:
            raise ConfigError("oracle check --prop 2 needs --n")
        try:
            check = verify_prop2(
                args.n, distribution=args.dist, n_entities=args.entities, seed=seed
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        pred = check.predicted["lag1_autocorr"]
        pred_s = f"{pred:.6f}" if pred is not None else "<= 0"
        print(
            f"proposition 2: spacing lag-1 autocorrelation "
            f"({args.dist}, n_u={args.n}, {args.entities} entities)"
        )
        print(
            f"  predicted {pred_s}, observed {check.observed['lag1_autocorr']:.6f} "
            f"(se {check.observed['standard_error']:.6f})"
        )
    print(f"  pass: {check.passed}")
    return EXIT_OK if check.passed else EXIT_CHECK_FAILED


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "baseline": _cmd_baseline,
        "evaluate": _cmd_evaluate,
        "assign-entities": _cmd_assign,
    }
    try:
        if args.command == "oracle":
            if args.oracle_command == "gen":
                return _cmd_oracle_gen(args)
            return _cmd_oracle_check(args)
        return handlers[args.command](args)
    except BehavfidError as exc:
        for err_type, code in _ERROR_CODES:
            if isinstance(exc, err_type):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
