import numpy as np
import pytest

from behavfid import SchemaConfig, generate_bursty_table, table_from_columns
from behavfid.ingest import FIRST_SEEN_SENTINEL


@pytest.fixture
def tiny_schema():
    return SchemaConfig(timestamp_col="ts", entity_col="card", class_col="isFraud")


@pytest.fixture
def full_schema():
    return SchemaConfig(
        timestamp_col="ts",
        entity_col="card",
        class_col="isFraud",
        amount_col="amount",
        attribute_cols=("device", "ip"),
        merchant_col="merchant",
        payment_method_col="pm",
        account_age_col=FIRST_SEEN_SENTINEL,
        status_col="status",
        ip_col="ip",
    )


@pytest.fixture
def make_table():
    """Build a table from python lists; strings go categorical, numbers numeric."""

    def _make(schema, **cols):
        columns = {}
        for name, values in cols.items():
            first = next((v for v in values if v not in (None, "")), None)
            if isinstance(first, str):
                columns[name] = np.array([v if v is not None else "" for v in values], dtype=object)
            else:
                columns[name] = np.array(
                    [np.nan if v in (None, "") else float(v) for v in values], dtype=np.float64
                )
        return table_from_columns(schema, columns)

    return _make


@pytest.fixture(scope="session")
def bursty_real():
    return generate_bursty_table(n_entities=900, seed=7)
