import numpy as np
import pytest

from behavfid import (
    SchemaConfig,
    assign_entities,
    build_entity_sequences,
    size_distribution,
    table_from_columns,
)
from behavfid.entity import EntitySizeDistribution, _draw_sizes
from behavfid.errors import ConfigError, InsufficientDataError
from behavfid.ingest import EntitySequence

SYN_SCHEMA = SchemaConfig(timestamp_col="ts", class_col="isFraud")


def syn_table(ts, fraud):
    return table_from_columns(
        SYN_SCHEMA,
        {"ts": np.asarray(ts, dtype=float), "isFraud": np.asarray(fraud, dtype=float)},
    )


def seq(n, fraud, label):
    ts = np.arange(n, dtype=float)
    return EntitySequence(0, label, fraud, ts, np.arange(n, dtype=np.int64))


# -- size_distribution --------------------------------------------------------


def test_size_multiset_per_class():
    seqs = [seq(2, True, "a"), seq(4, True, "b"), seq(3, False, "c")]
    d = size_distribution(seqs)
    assert d.sizes(1).tolist() == [2, 4]
    assert d.sizes(0).tolist() == [3]


def test_all_singletons():
    seqs = [seq(1, True, f"e{i}") for i in range(5)]
    d = size_distribution(seqs)
    assert d.sizes(1).tolist() == [1, 1, 1, 1, 1]


def test_empty_errors():
    with pytest.raises(InsufficientDataError):
        size_distribution([])


# -- assign_entities ----------------------------------------------------------


def test_deterministic_replay_matches_rng_draws():
    table = syn_table(ts=[10, 20, 30, 40, 50, 60], fraud=[1] * 6)
    d = EntitySizeDistribution({1: np.array([2, 4], dtype=np.int64)})
    labeled = assign_entities(table, d, seed=5)
    col = labeled.schema.entity_col
    labels = [str(labeled.vocab(col)[c]) for c in labeled.codes(col)]
    # replay the documented draw stream
    rng = np.random.default_rng([5, 1])
    expect_sizes = _draw_sizes(rng, np.array([2, 4], dtype=np.int64), 6)
    expected = []
    for k, s in enumerate(expect_sizes, start=1):
        expected.extend([f"syn_1_{k}"] * int(s))
    assert labels == expected[:6]
    # group sizes sum to the class row count
    from collections import Counter

    assert sum(Counter(labels).values()) == 6


def test_unit_distribution_every_row_own_entity():
    table = syn_table(ts=[1, 2, 3], fraud=[0, 0, 0])
    labeled = assign_entities(table, EntitySizeDistribution({0: np.array([1])}), seed=1)
    col = labeled.schema.entity_col
    assert len(set(labeled.codes(col).tolist())) == 3


def test_truncation_of_final_group():
    table = syn_table(ts=[1, 2, 3, 4, 5], fraud=[1] * 5)
    labeled = assign_entities(
        table, EntitySizeDistribution({1: np.array([4])}), seed=0
    )
    col = labeled.schema.entity_col
    from collections import Counter

    sizes = sorted(Counter(labeled.codes(col).tolist()).values())
    assert sizes == [1, 4]


def test_consecutive_groups_are_time_contiguous():
    rng = np.random.default_rng(2)
    ts = rng.uniform(0, 1000, 40)
    table = syn_table(ts=ts.tolist(), fraud=[1] * 40)
    labeled = assign_entities(
        table, EntitySizeDistribution({1: np.array([3, 5, 7])}), seed=3
    )
    seqs = build_entity_sequences(labeled)
    spans = sorted((s.timestamps[0], s.timestamps[-1]) for s in seqs)
    for (lo1, hi1), (lo2, hi2) in zip(spans[:-1], spans[1:]):
        assert hi1 <= lo2  # groups do not interleave in time


def test_permuted_mode_keeps_size_multiset():
    ts = list(range(30))
    table = syn_table(ts=ts, fraud=[1] * 30)
    d = EntitySizeDistribution({1: np.array([2, 3, 5])})
    cons = assign_entities(table, d, seed=9, mode="consecutive")
    perm = assign_entities(table, d, seed=9, mode="permuted")
    from collections import Counter

    col = cons.schema.entity_col
    sizes_c = sorted(Counter(cons.codes(col).tolist()).values())
    sizes_p = sorted(Counter(perm.codes(col).tolist()).values())
    assert sizes_c == sizes_p
    assert cons.fingerprint() != perm.fingerprint()


def test_same_seed_identical_output():
    ts = list(range(25))
    table = syn_table(ts=ts, fraud=[1, 0, 1, 0, 1] * 5)
    d = EntitySizeDistribution({0: np.array([1, 2]), 1: np.array([2, 3])})
    a = assign_entities(table, d, seed=7)
    b = assign_entities(table, d, seed=7)
    assert a.fingerprint() == b.fingerprint()
    c = assign_entities(table, d, seed=8)
    assert c.fingerprint() != a.fingerprint()


def test_rows_labeled_exactly_once_per_class():
    ts = list(range(50))
    fraud = [1 if i % 3 == 0 else 0 for i in range(50)]
    table = syn_table(ts=ts, fraud=fraud)
    d = EntitySizeDistribution({0: np.array([2, 4]), 1: np.array([1, 3])})
    labeled = assign_entities(table, d, seed=11)
    col = labeled.schema.entity_col
    labels = labeled.vocab(col)[labeled.codes(col)]
    assert all(str(v).startswith("syn_") for v in labels)
    fraud_labels = {str(v) for v, f in zip(labels, fraud) if f == 1}
    nonfraud_labels = {str(v) for v, f in zip(labels, fraud) if f == 0}
    assert all(v.startswith("syn_1_") for v in fraud_labels)
    assert all(v.startswith("syn_0_") for v in nonfraud_labels)
    assert not (fraud_labels & nonfraud_labels)


def test_missing_class_in_distribution_errors():
    table = syn_table(ts=[1, 2], fraud=[0, 1])
    with pytest.raises(InsufficientDataError, match="class 1"):
        assign_entities(table, EntitySizeDistribution({0: np.array([1])}), seed=0)


def test_unknown_mode_errors():
    table = syn_table(ts=[1], fraud=[1])
    with pytest.raises(ConfigError, match="mode"):
        assign_entities(table, EntitySizeDistribution({1: np.array([1])}), mode="zig")


def test_assigned_sizes_converge_to_source_distribution():
    # draws with replacement from {2, 6} should produce ~50/50 group mix
    n_rows = 40_000
    table = syn_table(ts=list(range(n_rows)), fraud=[1] * n_rows)
    d = EntitySizeDistribution({1: np.array([2, 6])})
    labeled = assign_entities(table, d, seed=13)
    from collections import Counter

    col = labeled.schema.entity_col
    sizes = np.array(list(Counter(labeled.codes(col).tolist()).values()))
    sizes = sizes[np.isin(sizes, (2, 6))]  # drop the truncated tail group
    share_of_twos = np.mean(sizes == 2)
    assert share_of_twos == pytest.approx(0.5, abs=0.02)
