"""CSV ingestion: schema-role mapping, columnar tables, entity sequences.

Tables are columnar and immutable after load: numeric columns as float64
(NaN marks a missing value, parsed from the empty string), categorical
columns as int64 codes into a per-column vocabulary (-1 marks missing).
Interning keeps the graph and velocity modules integer-only.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .errors import ConfigError, PatternUnavailableError, SchemaError

FIRST_SEEN_SENTINEL = "@first_seen"

NUMERIC = "numeric"
CATEGORICAL = "categorical"

_SCHEMA_KEYS = {
    "timestamp_col",
    "entity_col",
    "class_col",
    "amount_col",
    "attribute_cols",
    "merchant_col",
    "payment_method_col",
    "account_age_col",
    "status_col",
    "ip_col",
}

# single-column roles that must not share a column with each other
_UNIQUE_ROLES = (
    "timestamp_col",
    "entity_col",
    "class_col",
    "amount_col",
    "merchant_col",
    "payment_method_col",
    "account_age_col",
    "status_col",
    "ip_col",
)

_NUMERIC_ROLES = ("timestamp_col", "class_col", "amount_col", "account_age_col")


@dataclass(frozen=True)
class SchemaConfig:
    """Role mapping from CSV columns onto the quantities the metrics need.

    ``account_age_col`` accepts either a numeric column holding the account
    age in days at each transaction, or the sentinel ``"@first_seen"`` which
    derives the age from the entity's first observed timestamp.
    """

    timestamp_col: str
    class_col: str
    entity_col: str | None = None
    amount_col: str | None = None
    attribute_cols: tuple[str, ...] = ()
    merchant_col: str | None = None
    payment_method_col: str | None = None
    account_age_col: str | None = None
    status_col: str | None = None
    ip_col: str | None = None
    column_kinds: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: dict[str, str] = {}
        for role in _UNIQUE_ROLES:
            name = getattr(self, role)
            if name is None or name == FIRST_SEEN_SENTINEL:
                continue
            if name in seen:
                raise SchemaError(
                    f"column {name!r} mapped to two roles: {seen[name]} and {role}"
                )
            seen[name] = role
        numeric_role_cols = {
            getattr(self, r)
            for r in _NUMERIC_ROLES
            if getattr(self, r) not in (None, FIRST_SEEN_SENTINEL)
        }
        for col in self.attribute_cols:
            if col in numeric_role_cols or col == self.entity_col:
                raise SchemaError(
                    f"attribute column {col!r} cannot double as a numeric role or the entity column"
                )
        for col, kind in self.column_kinds.items():
            if kind not in (NUMERIC, CATEGORICAL):
                raise SchemaError(f"unknown column kind {kind!r} for column {col!r}")

    def role_columns(self) -> dict[str, str]:
        """Mapped role -> column name (sentinel and empty roles omitted)."""
        out = {}
        for role in _UNIQUE_ROLES:
            name = getattr(self, role)
            if name is not None and name != FIRST_SEEN_SENTINEL:
                out[role] = name
        return out

    def role_kind(self, col: str) -> str | None:
        for role in _NUMERIC_ROLES:
            if getattr(self, role) == col:
                return NUMERIC
        for role in ("entity_col", "merchant_col", "payment_method_col", "status_col", "ip_col"):
            if getattr(self, role) == col:
                return CATEGORICAL
        if col in self.attribute_cols:
            return CATEGORICAL
        return None

    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=8)
        for role in _UNIQUE_ROLES:
            h.update(f"{role}={getattr(self, role)};".encode())
        h.update(f"attrs={','.join(self.attribute_cols)};".encode())
        for col in sorted(self.column_kinds):
            h.update(f"kind.{col}={self.column_kinds[col]};".encode())
        return h.hexdigest()


def load_schema(path: str | Path) -> SchemaConfig:
    """Parse the flat ``key = value`` schema file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing schema file: {path}")
    scalars: dict[str, str] = {}
    kinds: dict[str, str] = {}
    attribute_cols: tuple[str, ...] = ()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key.startswith("kind."):
            kinds[key[len("kind.") :]] = value
        elif key == "attribute_cols":
            attribute_cols = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _SCHEMA_KEYS:
            scalars[key] = value
        else:
            raise ConfigError(f"{path}:{lineno}: unknown schema key {key!r}")
    for required in ("timestamp_col", "class_col"):
        if required not in scalars:
            raise ConfigError(f"{path}: schema must set {required}")
    try:
        return SchemaConfig(
            timestamp_col=scalars["timestamp_col"],
            class_col=scalars["class_col"],
            entity_col=scalars.get("entity_col"),
            amount_col=scalars.get("amount_col"),
            attribute_cols=attribute_cols,
            merchant_col=scalars.get("merchant_col"),
            payment_method_col=scalars.get("payment_method_col"),
            account_age_col=scalars.get("account_age_col"),
            status_col=scalars.get("status_col"),
            ip_col=scalars.get("ip_col"),
            column_kinds=kinds,
        )
    except SchemaError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


class TransactionTable:
    """Immutable columnar view of an ingested CSV with role-mapped columns."""

    def __init__(
        self,
        schema: SchemaConfig,
        column_names: list[str],
        kinds: dict[str, str],
        numeric: dict[str, np.ndarray],
        cat_codes: dict[str, np.ndarray],
        cat_vocab: dict[str, np.ndarray],
    ) -> None:
        self.schema = schema
        self.column_names = list(column_names)
        self.kinds = dict(kinds)
        self._numeric = numeric
        self._cat_codes = cat_codes
        self._cat_vocab = cat_vocab
        lengths = {arr.size for arr in numeric.values()}
        lengths.update(arr.size for arr in cat_codes.values())
        if len(lengths) > 1:
            raise SchemaError("columns have inconsistent lengths")
        self.n_rows = lengths.pop() if lengths else 0
        for arr in self._numeric.values():
            arr.setflags(write=False)
        for arr in self._cat_codes.values():
            arr.setflags(write=False)

    # -- accessors ---------------------------------------------------------

    def is_numeric(self, col: str) -> bool:
        return self.kinds.get(col) == NUMERIC

    def numeric_values(self, col: str) -> np.ndarray:
        return self._numeric[col]

    def codes(self, col: str) -> np.ndarray:
        return self._cat_codes[col]

    def vocab(self, col: str) -> np.ndarray:
        return self._cat_vocab[col]

    @property
    def timestamps(self) -> np.ndarray:
        return self._numeric[self.schema.timestamp_col]

    @property
    def class_values(self) -> np.ndarray:
        return self._numeric[self.schema.class_col]

    @property
    def fraud_mask(self) -> np.ndarray:
        return self.class_values == 1.0

    def fraud_rate(self) -> float:
        return float(self.fraud_mask.mean()) if self.n_rows else 0.0

    # -- derived tables ----------------------------------------------------

    def take(self, indices: np.ndarray) -> "TransactionTable":
        idx = np.asarray(indices, dtype=np.int64)
        return TransactionTable(
            self.schema,
            self.column_names,
            self.kinds,
            {c: a[idx].copy() for c, a in self._numeric.items()},
            {c: a[idx].copy() for c, a in self._cat_codes.items()},
            self._cat_vocab,
        )

    def with_entity_column(self, name: str, labels: np.ndarray) -> "TransactionTable":
        if name in self.column_names:
            raise SchemaError(f"column {name!r} already exists")
        if labels.shape != (self.n_rows,):
            raise SchemaError("entity labels must align with the table rows")
        vocab, codes = np.unique(np.asarray(labels, dtype=object), return_inverse=True)
        schema = replace(self.schema, entity_col=name)
        return TransactionTable(
            schema,
            self.column_names + [name],
            {**self.kinds, name: CATEGORICAL},
            dict(self._numeric),
            {**self._cat_codes, name: codes.astype(np.int64)},
            {**self._cat_vocab, name: vocab},
        )

    # -- identity ----------------------------------------------------------

    def fingerprint(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(str(self.n_rows).encode())
        for col in self.column_names:
            h.update(col.encode())
            h.update(self.kinds[col].encode())
            if self.is_numeric(col):
                h.update(np.ascontiguousarray(self._numeric[col]).tobytes())
            else:
                h.update(np.ascontiguousarray(self._cat_codes[col]).tobytes())
                h.update("\x1f".join(map(str, self._cat_vocab[col])).encode())
        return h.hexdigest()

    # -- output ------------------------------------------------------------

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        frame: dict[str, np.ndarray] = {}
        for col in self.column_names:
            if self.is_numeric(col):
                vals = self._numeric[col]
                finite = np.isfinite(vals)
                integral = bool(np.all(vals[finite] == np.floor(vals[finite]))) if finite.any() else False
                out = np.empty(self.n_rows, dtype=object)
                out[~finite] = ""
                if integral:
                    out[finite] = vals[finite].astype(np.int64).astype(str)
                else:
                    out[finite] = vals[finite].astype(str)
            else:
                codes = self._cat_codes[col]
                vocab = self._cat_vocab[col]
                out = np.empty(self.n_rows, dtype=object)
                missing = codes < 0
                out[missing] = ""
                out[~missing] = vocab[codes[~missing]]
            frame[col] = out
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            pd.DataFrame(frame).to_csv(fh, index=False)


@dataclass(frozen=True, eq=False)
class EntitySequence:
    """One entity's chronologically sorted timestamps with row references."""

    entity_code: int
    entity_label: str
    is_fraud: bool
    timestamps: np.ndarray
    row_indices: np.ndarray

    @property
    def n(self) -> int:
        return self.timestamps.size


def _parse_numeric(col: str, raw: np.ndarray, strict: bool) -> np.ndarray:
    ser = pd.Series(raw, dtype=object)
    ser = ser.where(ser != "", other=None)
    parsed = pd.to_numeric(ser, errors="coerce").to_numpy(dtype=np.float64)
    if strict:
        bad = np.isnan(parsed) & (raw != "")
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise SchemaError(
                f"column {col!r}: non-numeric value {raw[i]!r} at row {i}"
            )
    return parsed


def table_from_columns(
    schema: SchemaConfig,
    columns: dict[str, np.ndarray],
    kinds: dict[str, str] | None = None,
) -> TransactionTable:
    """Build a validated table from typed arrays.

    Numeric columns are float64 (NaN = missing); categorical columns are
    string/object arrays ("" = missing).  Used by the CSV loader, the
    row-independent generator and the test fixtures.
    """
    column_names = list(columns)
    resolved: dict[str, str] = {}
    for col in column_names:
        role_kind = schema.role_kind(col)
        user_kind = schema.column_kinds.get(col)
        if role_kind and user_kind and role_kind != user_kind:
            raise SchemaError(
                f"column {col!r}: declared kind {user_kind!r} conflicts with its role ({role_kind})"
            )
        kind = role_kind or user_kind or (kinds or {}).get(col)
        if kind is None:
            kind = NUMERIC if np.issubdtype(np.asarray(columns[col]).dtype, np.number) else CATEGORICAL
        resolved[col] = kind

    for role, name in schema.role_columns().items():
        if name not in columns:
            raise SchemaError(f"missing column {name!r} (role {role})")
    for name in schema.attribute_cols:
        if name not in columns:
            raise SchemaError(f"missing column {name!r} (attribute)")

    numeric: dict[str, np.ndarray] = {}
    cat_codes: dict[str, np.ndarray] = {}
    cat_vocab: dict[str, np.ndarray] = {}
    for col in column_names:
        arr = columns[col]
        if resolved[col] == NUMERIC:
            values = np.asarray(arr, dtype=np.float64)
            numeric[col] = values
        else:
            values = pd.Series(arr, dtype=object).fillna("").astype(str).to_numpy(dtype=object)
            missing = values == ""
            if missing.all():
                vocab = np.empty(0, dtype=object)
                codes = np.full(values.size, -1, dtype=np.int64)
            else:
                vocab, inv = np.unique(values[~missing], return_inverse=True)
                codes = np.full(values.size, -1, dtype=np.int64)
                codes[~missing] = inv
            cat_codes[col] = codes
            cat_vocab[col] = vocab.astype(object)

    ts = numeric[schema.timestamp_col]
    if np.isnan(ts).any():
        raise SchemaError(f"column {schema.timestamp_col!r}: non-numeric timestamp (missing value)")
    if not np.isfinite(ts).all() or (ts < 0).any():
        raise SchemaError(f"column {schema.timestamp_col!r}: timestamps must be finite and >= 0")
    cls = numeric[schema.class_col]
    if np.isnan(cls).any() or not np.isin(cls, (0.0, 1.0)).all():
        bad = cls[~np.isin(cls, (0.0, 1.0))]
        shown = "missing" if bad.size and np.isnan(bad[0]) else repr(bad[0]) if bad.size else "?"
        raise SchemaError(f"column {schema.class_col!r}: non-binary class value ({shown})")

    return TransactionTable(schema, column_names, resolved, numeric, cat_codes, cat_vocab)


def load_table(
    path: str | Path,
    schema: SchemaConfig,
    *,
    tolerate_missing_entity: bool = False,
) -> TransactionTable:
    """Load and validate a CSV against the schema.

    ``tolerate_missing_entity`` supports synthetic inputs: when the mapped
    entity column is absent from the file header the schema is relaxed to
    ``entity_col=None`` instead of failing (all other mapped columns stay
    mandatory).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing file: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines(keepends=True)
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        start += 1
    if start >= len(lines):
        raise SchemaError(f"{path}: no header row")
    frame = pd.read_csv(
        io.StringIO("".join(lines[start:])), dtype=str, keep_default_na=False
    )
    header = list(frame.columns)

    if (
        tolerate_missing_entity
        and schema.entity_col is not None
        and schema.entity_col not in header
    ):
        schema = replace(schema, entity_col=None)

    for role, name in schema.role_columns().items():
        if name not in header:
            raise SchemaError(f"{path}: missing column {name!r} (role {role})")
    for name in schema.attribute_cols:
        if name not in header:
            raise SchemaError(f"{path}: missing column {name!r} (attribute)")

    raw_columns = {col: frame[col].to_numpy(dtype=object) for col in header}

    columns: dict[str, np.ndarray] = {}
    kinds: dict[str, str] = {}
    strict_cols = {schema.timestamp_col, schema.class_col}
    if schema.amount_col is not None:
        strict_cols.add(schema.amount_col)
    if schema.account_age_col not in (None, FIRST_SEEN_SENTINEL):
        strict_cols.add(schema.account_age_col)
    for col in header:
        raw = raw_columns[col]
        kind = schema.role_kind(col) or schema.column_kinds.get(col)
        if kind is None:
            parsed = _parse_numeric(col, raw, strict=False)
            nonmissing = raw != ""
            kind = NUMERIC if nonmissing.any() and not np.isnan(parsed[nonmissing]).any() else CATEGORICAL
        if kind == NUMERIC:
            columns[col] = _parse_numeric(col, raw, strict=col in strict_cols)
        else:
            columns[col] = raw
        kinds[col] = kind

    return table_from_columns(schema, columns, kinds)


def build_entity_sequences(
    table: TransactionTable, class_mode: str = "any"
) -> list[EntitySequence]:
    """Group rows by entity into chronologically sorted sequences.

    ``class_mode``: "any" labels an entity fraud when any of its rows is
    fraud; "strict" raises on mixed-class entities instead.
    """
    if class_mode not in ("any", "strict"):
        raise ConfigError(f"unknown entity class mode {class_mode!r}")
    entity_col = table.schema.entity_col
    if entity_col is None:
        raise PatternUnavailableError(
            "table has no entity column; run assign-entities to label synthetic rows"
        )
    codes = table.codes(entity_col)
    if (codes < 0).any():
        i = int(np.flatnonzero(codes < 0)[0])
        raise SchemaError(f"column {entity_col!r}: missing entity value at row {i}")
    ts = table.timestamps
    cls = table.class_values
    vocab = table.vocab(entity_col)

    order = np.lexsort((np.arange(table.n_rows), ts, codes))
    sorted_codes = codes[order]
    boundaries = np.concatenate(
        ([0], np.flatnonzero(np.diff(sorted_codes)) + 1, [table.n_rows])
    )
    sequences: list[EntitySequence] = []
    for b, e in zip(boundaries[:-1], boundaries[1:]):
        rows = order[b:e]
        code = int(sorted_codes[b])
        entity_cls = cls[rows]
        if class_mode == "strict" and np.unique(entity_cls).size > 1:
            raise SchemaError(
                f"entity {vocab[code]!r} has mixed class labels (strict mode)"
            )
        sequences.append(
            EntitySequence(
                entity_code=code,
                entity_label=str(vocab[code]),
                is_fraud=bool((entity_cls == 1.0).any()),
                timestamps=ts[rows],
                row_indices=rows,
            )
        )
    return sequences
