import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from behavfid import (
    SchemaConfig,
    build_bipartite,
    build_entity_sequences,
    fanout_distribution,
    fanout_feasibility,
    fit_marginals,
    generate_bursty_table,
    generate_rowindep,
    lag1_autocorr,
    pb_fanout_stats,
    table_from_columns,
    verify_prop1,
    verify_prop2,
)
from behavfid.errors import InsufficientDataError
from behavfid.oracle import bursty_schema

SCHEMA = SchemaConfig(
    timestamp_col="ts", class_col="isFraud", column_kinds={"color": "categorical"}
)


def small_table():
    return table_from_columns(
        SCHEMA,
        {
            "ts": np.array([1.0, 2.0, 3.0]),
            "isFraud": np.array([0.0, 0.0, 1.0]),
            "color": np.asarray(["A", "A", "B"], dtype=object),
            "amount": np.array([5.0, 5.0, 5.0]),
        },
    )


# -- fit_marginals ------------------------------------------------------------


def test_categorical_frequencies():
    model = fit_marginals(small_table())
    freqs = dict(zip(model.cat_values["color"], model.cat_probs["color"]))
    assert freqs["A"] == pytest.approx(2 / 3)
    assert freqs["B"] == pytest.approx(1 / 3)


def test_constant_column_point_mass():
    model = fit_marginals(small_table())
    assert model.numeric_pools["amount"].tolist() == [5.0, 5.0, 5.0]


def test_numeric_pool_is_observed_values():
    model = fit_marginals(small_table())
    assert sorted(model.numeric_pools["ts"].tolist()) == [1.0, 2.0, 3.0]


def test_entity_column_dropped():
    table = generate_bursty_table(n_entities=50, seed=1)
    model = fit_marginals(table)
    assert "entity" not in model.column_names
    assert model.schema.entity_col is None


# -- generate_rowindep --------------------------------------------------------


def test_generation_deterministic():
    model = fit_marginals(small_table())
    a = generate_rowindep(model, 100, seed=4)
    b = generate_rowindep(model, 100, seed=4)
    assert a.fingerprint() == b.fingerprint()
    c = generate_rowindep(model, 100, seed=5)
    assert c.fingerprint() != a.fingerprint()


def test_constant_marginals_give_constant_table():
    table = table_from_columns(
        SCHEMA,
        {
            "ts": np.ones(5),
            "isFraud": np.zeros(5),
            "color": np.asarray(["X"] * 5, dtype=object),
        },
    )
    out = generate_rowindep(fit_marginals(table), 20, seed=0)
    assert np.all(out.timestamps == 1.0)
    assert np.all(out.codes("color") == 0)


def test_output_marginals_converge():
    model = fit_marginals(small_table())
    out = generate_rowindep(model, 100_000, seed=8)
    codes = out.codes("color")
    share_a = float(np.mean(codes == np.flatnonzero(out.vocab("color") == "A")[0]))
    assert share_a == pytest.approx(2 / 3, abs=0.01)
    assert float(out.class_values.mean()) == pytest.approx(1 / 3, abs=0.01)


def test_no_designed_cross_column_dependence():
    rng = np.random.default_rng(0)
    n = 4000
    x = rng.normal(size=n)
    table = table_from_columns(
        SchemaConfig(timestamp_col="ts", class_col="isFraud"),
        {
            "ts": np.abs(x) * 10,
            "isFraud": (x > 1.0).astype(float),
            "u": x,  # strongly dependent columns in the source
            "v": x * 2 + 1,
        },
    )
    out = generate_rowindep(fit_marginals(table), 100_000, seed=3)
    cols = [out.numeric_values(c) for c in ("ts", "u", "v")]
    corr = np.corrcoef(np.stack(cols))
    off = np.abs(corr[np.triu_indices(3, 1)])
    assert np.all(off < 0.01)


# -- Poisson-Binomial fan-out --------------------------------------------------


def test_pb_stats_binomial_case():
    mean, var = pb_fanout_stats(0.5, [1, 1])
    assert mean == pytest.approx(1.0)
    assert var == pytest.approx(0.5)


def test_pb_stats_zero_probability():
    assert pb_fanout_stats(0.0, [3, 5]) == (0.0, 0.0)


def test_pb_stats_validation():
    with pytest.raises(ValueError):
        pb_fanout_stats(1.5, [1])
    with pytest.raises(ValueError):
        pb_fanout_stats(0.5, [])
    with pytest.raises(ValueError):
        pb_fanout_stats(0.5, [0, 2])


@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.lists(st.integers(min_value=1, max_value=20), min_size=1, max_size=12),
)
@settings(max_examples=200, deadline=None)
def test_pb_variance_never_exceeds_mean(p, sizes):
    mean, var = pb_fanout_stats(p, sizes)
    assert var <= mean + 1e-12


def test_verify_prop1_binomial_cell():
    check = verify_prop1(0.5, [1, 1], n_trials=10_000, seed=0)
    assert check.passed
    assert check.observed["fanout_mean"] == pytest.approx(1.0, abs=0.05)
    assert check.details["variance_le_mean_observed"]


def test_verify_prop1_grouped_rows():
    check = verify_prop1(0.1, [3, 5, 2, 8], n_trials=5_000, seed=1)
    assert check.passed


def test_verify_prop1_requires_trials():
    with pytest.raises(ValueError, match="1000"):
        verify_prop1(0.5, [1, 1], n_trials=10)


def test_heavy_tail_unreachable():
    # zipf-like fan-out sample: variance far above mean
    heavy = np.concatenate([np.ones(980), np.full(20, 200.0)])
    report = fanout_feasibility(heavy)
    assert not report["reachable_by_row_independent"]
    assert report["var_to_mean"] > 10
    # while any actually grouped-iid fan-out sample is reachable
    check = verify_prop1(0.05, [4] * 30, n_trials=2_000, seed=2)
    assert check.observed["fanout_variance"] <= check.observed["fanout_mean"]


# -- spacing autocorrelation -----------------------------------------------------


def test_prop2_uniform_exact_values():
    c4 = verify_prop2(4, "uniform", n_entities=60_000, seed=0)
    assert c4.passed
    assert c4.observed["lag1_autocorr"] == pytest.approx(-0.25, abs=0.01)
    c10 = verify_prop2(10, "uniform", n_entities=60_000, seed=0)
    assert c10.passed
    assert c10.observed["lag1_autocorr"] == pytest.approx(-0.10, abs=0.01)


def test_prop2_exponential_nonpositive():
    check = verify_prop2(6, "exponential", n_entities=40_000, seed=1)
    assert check.passed
    se = check.observed["standard_error"]
    assert check.observed["lag1_autocorr"] <= 3 * se


def test_prop2_empirical_pool():
    pool = np.random.default_rng(3).exponential(100.0, 5000)
    check = verify_prop2(5, "empirical", n_entities=20_000, seed=2, pool=pool)
    assert check.observed["lag1_autocorr"] <= 3 * check.observed["standard_error"]


def test_prop2_validation():
    with pytest.raises(ValueError, match="n_u"):
        verify_prop2(3, "uniform")
    with pytest.raises(ValueError, match="10000"):
        verify_prop2(4, "uniform", n_entities=100)
    with pytest.raises(ValueError, match="pool"):
        verify_prop2(4, "empirical", n_entities=10_000)
    with pytest.raises(ValueError, match="unknown distribution"):
        verify_prop2(4, "cauchy", n_entities=10_000)


# -- ground-truth factory --------------------------------------------------------


def test_bursty_table_has_positive_autocorr(bursty_real):
    seqs = build_entity_sequences(bursty_real)
    rhos = [
        r
        for s in seqs
        if s.is_fraud
        for r in [lag1_autocorr(np.diff(s.timestamps))]
        if r is not None
    ]
    assert np.mean(rhos) >= 0.3


def test_bursty_table_heavy_fanout(bursty_real):
    fo = fanout_distribution(build_bipartite(bursty_real))
    report = fanout_feasibility(fo)
    assert not report["reachable_by_row_independent"]
    assert report["var_to_mean"] > 10


def test_bursty_table_deterministic():
    a = generate_bursty_table(n_entities=100, seed=5)
    b = generate_bursty_table(n_entities=100, seed=5)
    assert a.fingerprint() == b.fingerprint()


def test_bursty_schema_supports_all_rules(bursty_real):
    from behavfid import canonical_ruleset, rule_applicability

    active = rule_applicability(canonical_ruleset(), bursty_schema())
    assert len(active) == 8


def test_rowindep_of_bursty_collapses_autocorr(bursty_real):
    from behavfid import assign_entities, size_distribution

    model = fit_marginals(bursty_real)
    syn = generate_rowindep(model, bursty_real.n_rows, seed=21)
    seqs = build_entity_sequences(bursty_real)
    syn = assign_entities(syn, size_distribution(seqs), seed=42)
    syn_seqs = build_entity_sequences(syn)
    rhos = [
        r
        for s in syn_seqs
        if s.is_fraud
        for r in [lag1_autocorr(np.diff(s.timestamps))]
        if r is not None
    ]
    assert np.mean(rhos) <= 0.0  # non-positive, the impossibility direction


def test_empty_table_rejected():
    with pytest.raises(InsufficientDataError):
        generate_rowindep(fit_marginals(small_table()), 0, seed=0)
