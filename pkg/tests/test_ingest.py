import numpy as np
import pytest

from behavfid import (
    SchemaConfig,
    build_entity_sequences,
    load_schema,
    load_table,
)
from behavfid.errors import ConfigError, PatternUnavailableError, SchemaError
from behavfid.ingest import FIRST_SEEN_SENTINEL


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


CSV3 = "ts,card,isFraud\n5,c1,0\n2,c1,1\n9,c2,0\n"


def test_load_three_rows(tmp_path, tiny_schema):
    table = load_table(_write(tmp_path, "t.csv", CSV3), tiny_schema)
    assert table.n_rows == 3
    assert table.timestamps.tolist() == [5.0, 2.0, 9.0]
    assert table.fraud_mask.tolist() == [False, True, False]


def test_missing_file(tiny_schema, tmp_path):
    with pytest.raises(ConfigError, match="missing file"):
        load_table(tmp_path / "nope.csv", tiny_schema)


def test_missing_column(tmp_path, tiny_schema):
    schema = SchemaConfig(
        timestamp_col="ts", entity_col="card", class_col="isFraud",
        attribute_cols=("device_id",),
    )
    with pytest.raises(SchemaError, match="missing column 'device_id'"):
        load_table(_write(tmp_path, "t.csv", CSV3), schema)


def test_non_binary_class(tmp_path, tiny_schema):
    csv = "ts,card,isFraud\n1,c1,0\n2,c1,2\n"
    with pytest.raises(SchemaError, match="non-binary class"):
        load_table(_write(tmp_path, "t.csv", csv), tiny_schema)


def test_non_numeric_timestamp(tmp_path, tiny_schema):
    csv = "ts,card,isFraud\nabc,c1,0\n"
    with pytest.raises(SchemaError, match="non-numeric"):
        load_table(_write(tmp_path, "t.csv", csv), tiny_schema)


def test_negative_timestamp_rejected(tmp_path, tiny_schema):
    csv = "ts,card,isFraud\n-5,c1,0\n"
    with pytest.raises(SchemaError, match="finite and >= 0"):
        load_table(_write(tmp_path, "t.csv", csv), tiny_schema)


def test_reload_is_bit_stable(tmp_path, tiny_schema):
    path = _write(tmp_path, "t.csv", CSV3)
    a = load_table(path, tiny_schema)
    b = load_table(path, tiny_schema)
    assert a.fingerprint() == b.fingerprint()


def test_comment_header_skipped(tmp_path, tiny_schema):
    path = _write(tmp_path, "t.csv", "# produced by a tool\n" + CSV3)
    assert load_table(path, tiny_schema).n_rows == 3


def test_kind_inference(tmp_path, tiny_schema):
    csv = "ts,card,isFraud,x,y\n1,c1,0,3,red\n2,c2,1,,blue\n"
    table = load_table(_write(tmp_path, "t.csv", csv), tiny_schema)
    assert table.is_numeric("x")
    assert np.isnan(table.numeric_values("x")[1])
    assert not table.is_numeric("y")


def test_role_kind_conflict():
    with pytest.raises(SchemaError, match="conflicts"):
        schema = SchemaConfig(
            timestamp_col="ts",
            entity_col="card",
            class_col="isFraud",
            column_kinds={"ts": "categorical"},
        )
        # conflict surfaces when building a table
        from behavfid import table_from_columns

        table_from_columns(
            schema,
            {
                "ts": np.array([1.0]),
                "card": np.array(["c"], dtype=object),
                "isFraud": np.array([0.0]),
            },
        )


def test_two_roles_one_column():
    with pytest.raises(SchemaError, match="two roles"):
        SchemaConfig(timestamp_col="ts", entity_col="ts", class_col="isFraud")


def test_attribute_may_share_with_ip_role():
    schema = SchemaConfig(
        timestamp_col="ts",
        class_col="isFraud",
        attribute_cols=("ip",),
        ip_col="ip",
    )
    assert schema.attribute_cols == ("ip",)


def test_tolerate_missing_entity(tmp_path, tiny_schema):
    csv = "ts,isFraud\n1,0\n"
    path = _write(tmp_path, "t.csv", csv)
    with pytest.raises(SchemaError):
        load_table(path, tiny_schema)
    table = load_table(path, tiny_schema, tolerate_missing_entity=True)
    assert table.schema.entity_col is None


def test_sequences_sorted_with_ties(tmp_path, tiny_schema):
    csv = "ts,card,isFraud\n5,e1,0\n2,e1,0\n9,e2,0\n"
    table = load_table(_write(tmp_path, "t.csv", csv), tiny_schema)
    seqs = {s.entity_label: s for s in build_entity_sequences(table)}
    assert seqs["e1"].timestamps.tolist() == [2.0, 5.0]
    assert seqs["e2"].timestamps.tolist() == [9.0]
    assert sum(s.n for s in seqs.values()) == table.n_rows


def test_sequence_tie_keeps_input_order(make_table, tiny_schema):
    table = make_table(
        tiny_schema, ts=[7, 7, 8], card=["e", "e", "e"], isFraud=[0, 0, 0]
    )
    (seq,) = build_entity_sequences(table)
    assert seq.timestamps.tolist() == [7.0, 7.0, 8.0]
    assert seq.row_indices.tolist() == [0, 1, 2]


def test_sequence_timestamps_are_sorted_permutation(make_table, tiny_schema):
    rng = np.random.default_rng(3)
    ts = rng.integers(0, 100, 50).astype(float).tolist()
    cards = [f"e{i % 7}" for i in range(50)]
    table = make_table(tiny_schema, ts=ts, card=cards, isFraud=[0] * 50)
    for seq in build_entity_sequences(table):
        raw = [ts[i] for i in range(50) if cards[i] == seq.entity_label]
        assert sorted(raw) == seq.timestamps.tolist()
        assert np.all(np.diff(seq.timestamps) >= 0)


def test_mixed_class_any_vs_strict(make_table, tiny_schema):
    table = make_table(
        tiny_schema, ts=[1, 2], card=["e1", "e1"], isFraud=[0, 1]
    )
    (seq,) = build_entity_sequences(table, "any")
    assert seq.is_fraud
    with pytest.raises(SchemaError, match="mixed class"):
        build_entity_sequences(table, "strict")


def test_missing_entity_value_rejected(make_table, tiny_schema):
    table = make_table(tiny_schema, ts=[1], card=[""], isFraud=[0])
    with pytest.raises(SchemaError, match="missing entity"):
        build_entity_sequences(table)


def test_no_entity_column_guides_to_assign(make_table):
    schema = SchemaConfig(timestamp_col="ts", class_col="isFraud")
    table = make_table(schema, ts=[1], isFraud=[0])
    with pytest.raises(PatternUnavailableError, match="assign-entities"):
        build_entity_sequences(table)


def test_take_subset_and_fingerprint(make_table, tiny_schema):
    table = make_table(
        tiny_schema, ts=[1, 2, 3], card=["a", "b", "a"], isFraud=[0, 1, 0]
    )
    sub = table.take(np.array([0, 2]))
    assert sub.n_rows == 2
    assert sub.fingerprint() != table.fingerprint()
    assert sub.timestamps.tolist() == [1.0, 3.0]


def test_to_csv_roundtrip(tmp_path, make_table, tiny_schema):
    table = make_table(
        tiny_schema, ts=[1, 2], card=["a", "b"], isFraud=[0, 1], amount=[1.5, None]
    )
    out = tmp_path / "out.csv"
    table.to_csv(out, header_comment="mode=test")
    text = out.read_text()
    assert text.startswith("# mode=test\n")
    again = load_table(out, tiny_schema)
    assert again.timestamps.tolist() == [1.0, 2.0]
    assert np.isnan(again.numeric_values("amount")[1])


def test_schema_file_parse(tmp_path):
    text = """
# comment
timestamp_col = ts
class_col = isFraud
entity_col = card
amount_col = amount
attribute_cols = device, ip
account_age_col = @first_seen
kind.D1 = numeric
"""
    schema = load_schema(_write(tmp_path, "s.cfg", text))
    assert schema.timestamp_col == "ts"
    assert schema.attribute_cols == ("device", "ip")
    assert schema.account_age_col == FIRST_SEEN_SENTINEL
    assert schema.column_kinds == {"D1": "numeric"}


def test_schema_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="missing schema file"):
        load_schema(tmp_path / "none.cfg")
    with pytest.raises(ConfigError, match="unknown schema key"):
        load_schema(_write(tmp_path, "bad.cfg", "timestamp_col = ts\nclass_col = c\nwhat = x\n"))
    with pytest.raises(ConfigError, match="must set class_col"):
        load_schema(_write(tmp_path, "bad2.cfg", "timestamp_col = ts\n"))
