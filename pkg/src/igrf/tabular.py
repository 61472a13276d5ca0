"""Column-typed tables, CSV ingestion and the preprocessing chain.

The chain used for UNSW-NB15 is::

    load_csv -> clean -> remove_minority -+-> deduplicate            (ranking copy)
                                          +-> oversample_normal
                                              -> one_hot -> minmax   (MLP inputs)

Tables and encoded matrices are immutable: every operation returns a new
value and the underlying arrays are flagged read-only.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL = "label"
_KINDS = (NUMERIC, CATEGORICAL, LABEL)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Column:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Schema:
    """Ordered column declaration plus the fixed class-name order.

    ``ignored`` lists header names that may appear in a file but are skipped
    at load time (the row ``id`` of the UNSW-NB15 files).
    """

    columns: tuple[Column, ...]
    label_classes: tuple[str, ...]
    ignored: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "label_classes", tuple(self.label_classes))
        object.__setattr__(self, "ignored", tuple(self.ignored))
        names = [c.name for c in self.columns]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise SchemaError(f"duplicate column names: {sorted(dup)}")
        labels = [c.name for c in self.columns if c.kind == LABEL]
        if len(labels) != 1:
            raise SchemaError(f"schema needs exactly one label column, got {labels}")
        if len(set(self.label_classes)) != len(self.label_classes):
            raise SchemaError("duplicate class names")
        clash = set(self.ignored) & set(names)
        if clash:
            raise SchemaError(f"ignored columns also declared: {sorted(clash)}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], label_classes, ignored=()):
        return cls(tuple(Column(n, k) for n, k in pairs), tuple(label_classes), tuple(ignored))

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def numeric_names(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == NUMERIC]

    @property
    def categorical_names(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == CATEGORICAL]

    @property
    def feature_names(self) -> list[str]:
        """Numeric and categorical columns in declaration order."""
        return [c.name for c in self.columns if c.kind != LABEL]

    @property
    def label_name(self) -> str:
        return next(c.name for c in self.columns if c.kind == LABEL)

    @property
    def n_classes(self) -> int:
        return len(self.label_classes)

    def kind_of(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise SchemaError(f"unknown column {name!r}")

    def class_index(self, name: str) -> int:
        try:
            return self.label_classes.index(name)
        except ValueError:
            raise DataError(f"unknown class {name!r}") from None

    def drop_columns(self, names: Iterable[str]) -> "Schema":
        names = set(names)
        return Schema(tuple(c for c in self.columns if c.name not in names),
                      self.label_classes, self.ignored)

    def with_classes(self, classes: Sequence[str]) -> "Schema":
        return Schema(self.columns, tuple(classes), self.ignored)


@dataclass(frozen=True)
class Table:
    """Rows of one dataset split.

    numeric      (n, n_numeric) float64, NaN marks a missing/unparseable cell
    categorical  (n, n_categorical) object array of str, None marks missing
    labels       (n,) int64 class indices into ``schema.label_classes``
    """

    schema: Schema
    numeric: np.ndarray
    categorical: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        numeric = np.asarray(self.numeric, dtype=np.float64).reshape(n, len(self.schema.numeric_names))
        categorical = np.asarray(self.categorical, dtype=object).reshape(
            n, len(self.schema.categorical_names))
        labels = np.asarray(self.labels, dtype=np.int64)
        if n and (labels.min() < 0 or labels.max() >= self.schema.n_classes):
            raise DataError("label index out of range for the class list")
        object.__setattr__(self, "numeric", _frozen(numeric.copy()))
        object.__setattr__(self, "categorical", _frozen(categorical.copy()))
        object.__setattr__(self, "labels", _frozen(labels.copy()))

    @property
    def row_count(self) -> int:
        return len(self.labels)

    def __len__(self):
        return self.row_count

    def take(self, rows) -> "Table":
        rows = np.asarray(rows, dtype=np.int64)
        return Table(self.schema, self.numeric[rows], self.categorical[rows], self.labels[rows])

    def missing_mask(self) -> np.ndarray:
        """Per-row flag: True when any numeric or categorical cell is missing."""
        bad = ~np.isfinite(self.numeric).all(axis=1)
        if self.categorical.size:
            bad |= np.array([any(v is None for v in row) for row in self.categorical], dtype=bool)
        return bad

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=self.schema.n_classes)
        return {name: int(c) for name, c in zip(self.schema.label_classes, counts)}

    def numeric_column(self, name: str) -> np.ndarray:
        return self.numeric[:, self.schema.numeric_names.index(name)]

    def categorical_column(self, name: str) -> np.ndarray:
        return self.categorical[:, self.schema.categorical_names.index(name)]


def _parse_number(cell: str) -> float:
    cell = cell.strip()
    if not cell:
        return math.nan
    try:
        v = float(cell)
    except ValueError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def load_csv(path, schema: Schema) -> Table:
    """Read an RFC-4180 CSV whose header matches ``schema`` in any order.

    Empty or unparseable numeric cells and empty categorical cells become
    missing markers; :func:`clean` drops those rows.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        declared = set(schema.names)
        for h in header:
            if h not in declared and h not in schema.ignored:
                raise SchemaError(f"{path}: unknown column {h!r}")
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        pos = {h: i for i, h in enumerate(header)}
        num_idx = [pos[n] for n in schema.numeric_names]
        cat_idx = [pos[n] for n in schema.categorical_names]
        lab_idx = pos[schema.label_name]
        class_of = {c: i for i, c in enumerate(schema.label_classes)}

        numeric, categorical, labels = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(row)}", row=rownum)
            raw = row[lab_idx].strip()
            if raw not in class_of:
                raise DataError(f"unparseable label {raw!r}", row=rownum)
            labels.append(class_of[raw])
            numeric.append([_parse_number(row[i]) for i in num_idx])
            categorical.append([row[i] if row[i].strip() else None for i in cat_idx])

    n = len(labels)
    num = np.array(numeric, dtype=np.float64).reshape(n, len(num_idx))
    cat = np.empty((n, len(cat_idx)), dtype=object)
    for r, vals in enumerate(categorical):
        cat[r, :] = vals
    return Table(schema, num, cat, np.array(labels, dtype=np.int64))


def _format_number(v) -> str:
    v = float(v)
    if math.isnan(v):
        return ""
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def export_csv(t: Table, path) -> None:
    """Write ``t`` with the same quoting conventions :func:`load_csv` reads."""
    schema = t.schema
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(schema.names)
        ni = {n: i for i, n in enumerate(schema.numeric_names)}
        ci = {n: i for i, n in enumerate(schema.categorical_names)}
        for r in range(t.row_count):
            out = []
            for col in schema.columns:
                if col.kind == NUMERIC:
                    out.append(_format_number(t.numeric[r, ni[col.name]]))
                elif col.kind == CATEGORICAL:
                    v = t.categorical[r, ci[col.name]]
                    out.append("" if v is None else v)
                else:
                    out.append(schema.label_classes[t.labels[r]])
            w.writerow(out)


def clean(t: Table, drop_columns: Sequence[str] = ("label",)) -> Table:
    """Drop rows holding any missing marker, then drop auxiliary columns.

    ``drop_columns`` defaults to the binary ``label`` column of UNSW-NB15;
    names absent from the schema are ignored, so cleaning is idempotent.
    """
    keep = ~t.missing_mask()
    t = t.take(np.flatnonzero(keep))
    drop = [n for n in drop_columns if n in t.schema.names]
    if not drop:
        return t
    for n in drop:
        if t.schema.kind_of(n) == LABEL:
            raise SchemaError(f"cannot drop the label column {n!r}")
    schema = t.schema.drop_columns(drop)
    num_keep = [t.schema.numeric_names.index(n) for n in schema.numeric_names]
    cat_keep = [t.schema.categorical_names.index(n) for n in schema.categorical_names]
    return Table(schema, t.numeric[:, num_keep], t.categorical[:, cat_keep], t.labels)


def remove_minority(t: Table, drop: Iterable[str]) -> Table:
    """Remove every row of the ``drop`` classes and re-index the rest."""
    drop = set(drop)
    unknown = drop - set(t.schema.label_classes)
    if unknown:
        raise DataError(f"cannot drop unknown classes {sorted(unknown)}")
    if not drop:
        return t
    kept = [c for c in t.schema.label_classes if c not in drop]
    remap = np.full(t.schema.n_classes, -1, dtype=np.int64)
    for new, name in enumerate(kept):
        remap[t.schema.label_classes.index(name)] = new
    rows = np.flatnonzero(remap[t.labels] >= 0)
    return Table(t.schema.with_classes(kept), t.numeric[rows], t.categorical[rows],
                 remap[t.labels[rows]])


def oversample_normal(t: Table, factor: int = 2, class_name: str = "Normal") -> Table:
    """Repeat every ``class_name`` row so it appears ``factor`` times.

    Output order is the original rows followed by the copies.
    """
    if factor < 1:
        raise DataError(f"oversampling factor must be >= 1, got {factor}")
    cls = t.schema.class_index(class_name)
    normal = np.flatnonzero(t.labels == cls)
    if normal.size == 0:
        raise DataError(f"no {class_name!r} rows to oversample")
    rows = np.concatenate([np.arange(t.row_count)] + [normal] * (factor - 1))
    return t.take(rows)


def deduplicate(t: Table) -> Table:
    """Keep the first occurrence of rows equal in every feature and the label."""
    if t.row_count == 0:
        return t
    parts = [(t.numeric + 0.0).view(np.uint64)]  # +0.0 folds -0.0 into 0.0
    for j in range(t.categorical.shape[1]):
        col = np.array(["\x00" if v is None else v for v in t.categorical[:, j]], dtype=object)
        _, codes = np.unique(col.astype(str), return_inverse=True)
        parts.append(codes.astype(np.uint64).reshape(-1, 1))
    parts.append(t.labels.astype(np.uint64).reshape(-1, 1))
    key = np.hstack(parts)
    _, first = np.unique(key, axis=0, return_index=True)
    return t.take(np.sort(first))


def split_holdout(t: Table, ratio: float = 0.5, seed: int = 0) -> tuple[Table, Table]:
    """Stratified split into (first, second) with ``ratio`` of rows in ``first``.

    Per-class sizes use largest-remainder rounding so the first part holds
    ``round(n * ratio)`` rows overall; equal remainders go to the larger class,
    then to the lower class index.  Within a class the members are chosen by a
    seeded permutation; both parts keep the original row order.
    """
    if not 0.0 < ratio < 1.0:
        raise DataError(f"split ratio must lie in (0, 1), got {ratio}")
    counts = np.bincount(t.labels, minlength=t.schema.n_classes)
    exact = counts * ratio
    base = np.floor(exact).astype(np.int64)
    extra = int(math.floor(t.row_count * ratio + 0.5)) - int(base.sum())
    order = sorted(range(len(counts)), key=lambda c: (-(exact[c] - base[c]), -counts[c], c))
    for c in order[:max(extra, 0)]:
        base[c] += 1

    rng = np.random.default_rng(seed)
    first = []
    for c in range(len(counts)):
        members = np.flatnonzero(t.labels == c)
        pick = rng.permutation(members.size)[: base[c]]
        first.append(members[pick])
    first = np.sort(np.concatenate(first)) if first else np.zeros(0, dtype=np.int64)
    mask = np.zeros(t.row_count, dtype=bool)
    mask[first] = True
    return t.take(np.flatnonzero(mask)), t.take(np.flatnonzero(~mask))


@dataclass(frozen=True)
class EncodedMatrix:
    """Model-ready design matrix.

    ``group_map`` maps each original feature name to the indices of its
    encoded columns (a single index for numeric features).
    """

    feature_names: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray
    group_map: dict = field(default_factory=dict)
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "group_map",
                           {k: tuple(int(i) for i in v) for k, v in self.group_map.items()})
        values = np.asarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != len(self.feature_names):
            raise SchemaError("values width does not match feature_names")
        if values.shape[0] != labels.shape[0]:
            raise SchemaError("values and labels differ in length")
        object.__setattr__(self, "values", _frozen(values.copy()))
        object.__setattr__(self, "labels", _frozen(labels.copy()))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def features(self) -> list[str]:
        """Original (pre-encoding) feature names in column order."""
        return sorted(self.group_map, key=lambda k: self.group_map[k][0] if self.group_map[k] else -1)

    def columns_for(self, features: Iterable[str]) -> list[int]:
        cols = []
        for f in features:
            if f not in self.group_map:
                raise SchemaError(f"unknown feature {f!r}")
            cols.extend(self.group_map[f])
        return sorted(cols)

    def select(self, features: Iterable[str]) -> "EncodedMatrix":
        """Restrict to whole feature groups; column order follows this matrix."""
        wanted = set(features)
        cols, gmap = [], {}
        for f in self.features:
            if f in wanted:
                gmap[f] = list(range(len(cols), len(cols) + len(self.group_map[f])))
                cols.extend(self.group_map[f])
        missing = wanted - set(gmap)
        if missing:
            raise SchemaError(f"unknown features {sorted(missing)}")
        return EncodedMatrix(tuple(self.feature_names[c] for c in cols), self.values[:, cols],
                             self.labels, gmap, self.class_names)

    def save(self, path) -> None:
        meta = json.dumps({"feature_names": list(self.feature_names),
                           "group_map": {k: list(v) for k, v in self.group_map.items()},
                           "class_names": list(self.class_names)})
        with Path(path).open("wb") as fh:
            np.savez(fh, values=self.values, labels=self.labels, meta=np.array(meta))

    @classmethod
    def load(cls, path) -> "EncodedMatrix":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            return cls(meta["feature_names"], z["values"], z["labels"], meta["group_map"],
                       meta["class_names"])


def category_vocabulary(t: Table) -> dict[str, list[str]]:
    """Sorted distinct non-missing categories per categorical column."""
    vocab = {}
    for j, name in enumerate(t.schema.categorical_names):
        vocab[name] = sorted({v for v in t.categorical[:, j] if v is not None})
    return vocab


def one_hot(t: Table, vocabulary_source: Table) -> EncodedMatrix:
    """Expand categorical columns into ``name=value`` indicator columns.

    The vocabulary comes from ``vocabulary_source`` (the training table);
    categories it never saw encode as an all-zero group.  Numeric columns pass
    through unscaled and every feature keeps its schema position.
    """
    if t.schema.categorical_names != vocabulary_source.schema.categorical_names:
        raise SchemaError("vocabulary source has different categorical columns")
    vocab = category_vocabulary(vocabulary_source)
    names, blocks, gmap = [], [], {}
    num_pos = {n: i for i, n in enumerate(t.schema.numeric_names)}
    cat_pos = {n: i for i, n in enumerate(t.schema.categorical_names)}
    for col in t.schema.columns:
        if col.kind == NUMERIC:
            gmap[col.name] = [len(names)]
            names.append(col.name)
            blocks.append(t.numeric[:, num_pos[col.name]].reshape(-1, 1))
        elif col.kind == CATEGORICAL:
            cats = vocab[col.name]
            index = {c: i for i, c in enumerate(cats)}
            block = np.zeros((t.row_count, len(cats)))
            for r, v in enumerate(t.categorical[:, cat_pos[col.name]]):
                i = index.get(v)
                if i is not None:
                    block[r, i] = 1.0
            gmap[col.name] = list(range(len(names), len(names) + len(cats)))
            names.extend(f"{col.name}={c}" for c in cats)
            blocks.append(block)
    values = np.hstack(blocks) if blocks else np.zeros((t.row_count, 0))
    return EncodedMatrix(tuple(names), values, t.labels, gmap, t.schema.label_classes)


@dataclass(frozen=True)
class MinMax:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "MinMax":
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] == 0:
            raise DataError("cannot fit min-max scaling on zero rows")
        return cls(values.min(axis=0), values.max(axis=0))

    def transform(self, values: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        out = (np.asarray(values, dtype=np.float64) - self.lo) / safe
        out[:, span <= 0] = 0.0
        return np.clip(out, 0.0, 1.0)


def minmax_fit_transform(train: EncodedMatrix, others: Sequence[EncodedMatrix] = ()):
    """Scale columns to [0, 1] with minima/maxima taken from ``train`` only.

    Other matrices reuse the training range and are clipped to [0, 1];
    constant training columns become 0 everywhere.
    """
    scaler = MinMax.fit(train.values)

    def apply(m: EncodedMatrix) -> EncodedMatrix:
        if m.feature_names != train.feature_names:
            raise SchemaError("matrix columns differ from the training matrix")
        return EncodedMatrix(m.feature_names, scaler.transform(m.values), m.labels, m.group_map,
                             m.class_names)

    return apply(train), [apply(m) for m in others]


UNSW_NB15_CLASSES = ("Normal", "Generic", "Exploits", "Fuzzers", "DoS", "Reconnaissance",
                     "Analysis", "Backdoor", "Shellcode", "Worms")
UNSW_NB15_MINORITY = ("Analysis", "Backdoor", "Shellcode", "Worms")
UNSW_NB15_CATEGORICAL = ("proto", "service", "state")
UNSW_NB15_FEATURES = (
    "dur", "proto", "service", "state", "spkts", "dpkts", "sbytes", "dbytes", "rate", "sttl",
    "dttl", "sload", "dload", "sloss", "dloss", "sinpkt", "dinpkt", "sjit", "djit", "swin",
    "stcpb", "dtcpb", "dwin", "tcprtt", "synack", "ackdat", "smean", "dmean", "trans_depth",
    "response_body_len", "ct_srv_src", "ct_state_ttl", "ct_dst_ltm", "ct_src_dport_ltm",
    "ct_dst_sport_ltm", "ct_dst_src_ltm", "is_ftp_login", "ct_ftp_cmd", "ct_flw_http_mthd",
    "ct_src_ltm", "ct_srv_dst", "is_sm_ips_ports",
)


def unsw_nb15_schema() -> Schema:
    """Schema of the UNSW-NB15 10% training/testing CSV files.

    42 features (39 numeric, 3 categorical), the multiclass ``attack_cat``
    label and the binary ``label`` column, which is read as numeric and
    removed by :func:`clean`.
    """
    pairs = [(f, CATEGORICAL if f in UNSW_NB15_CATEGORICAL else NUMERIC) for f in UNSW_NB15_FEATURES]
    pairs += [("attack_cat", LABEL), ("label", NUMERIC)]
    return Schema.from_pairs(pairs, UNSW_NB15_CLASSES, ignored=("id",))
