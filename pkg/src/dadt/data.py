"""Tabular data model: schema, datasets, split conditions, and paths.

Datasets are immutable after load. Views produced by filtering share the
underlying column storage and only carry a row-index array.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDataset,
    ParseError,
    SchemaMismatch,
    UnknownAttribute,
    UnlabeledData,
    ValueOutOfDomain,
)

DISCRETE = "discrete"
CONTINUOUS = "continuous"

EQ = "eq"
NEQ = "neq"
LEQ = "leq"
GT = "gt"

_NEGATE = {EQ: NEQ, NEQ: EQ, LEQ: GT, GT: LEQ}


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str
    domain: tuple[str, ...] | None = None
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise ValueError(f"unknown attribute kind {self.kind!r}")
        if self.kind == DISCRETE:
            if not self.domain:
                raise ValueError(f"discrete attribute {self.name!r} needs a non-empty domain")
            if len(set(self.domain)) != len(self.domain):
                raise ValueError(f"duplicate labels in domain of {self.name!r}")

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE


@dataclass(frozen=True)
class Schema:
    predictive: tuple[Attribute, ...]
    class_attr: Attribute
    protected_attr: str | None = None

    def __post_init__(self):
        names = [a.name for a in self.predictive] + [self.class_attr.name]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique within a schema")
        if not self.class_attr.is_discrete or len(self.class_attr.domain) < 2:
            raise ValueError("class attribute must be discrete with at least 2 values")
        if self.protected_attr is not None:
            attr = next((a for a in self.predictive if a.name == self.protected_attr), None)
            if attr is None or not attr.is_discrete:
                raise ValueError("protected attribute must name a discrete predictive attribute")

    def attribute(self, name: str) -> Attribute:
        for a in self.predictive:
            if a.name == name:
                return a
        if name == self.class_attr.name:
            return self.class_attr
        raise UnknownAttribute(f"no attribute named {name!r} in schema")

    @property
    def predictive_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.predictive)

    @property
    def class_values(self) -> tuple[str, ...]:
        return self.class_attr.domain

    def to_json_dict(self) -> dict:
        def attr_dict(a: Attribute) -> dict:
            d = {"name": a.name, "kind": a.kind}
            if a.domain is not None:
                d["domain"] = list(a.domain)
            if a.bounds is not None:
                d["bounds"] = list(a.bounds)
            return d

        doc = {
            "predictive": [attr_dict(a) for a in self.predictive],
            "class": attr_dict(self.class_attr),
        }
        if self.protected_attr is not None:
            doc["protected"] = self.protected_attr
        return doc


def schema_from_json(source) -> Schema:
    """Parse a schema document from a byte/text stream, path, or dict."""
    doc = _read_json(source)
    try:
        predictive = tuple(_attr_from_dict(d) for d in doc["predictive"])
        class_attr = _attr_from_dict(doc["class"])
        protected = doc.get("protected")
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed schema document: {exc}") from exc
    try:
        return Schema(predictive=predictive, class_attr=class_attr, protected_attr=protected)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _attr_from_dict(d: dict) -> Attribute:
    kind = d["kind"]
    domain = tuple(str(v) for v in d["domain"]) if d.get("domain") is not None else None
    bounds = tuple(d["bounds"]) if d.get("bounds") is not None else None
    return Attribute(name=d["name"], kind=kind, domain=domain, bounds=bounds)


def _read_json(source):
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, bytes)) and not str(source).lstrip().startswith(("{", "[")):
        try:
            with open(source, "rb") as fh:
                return json.load(fh)
        except OSError as exc:
            raise ParseError(f"cannot read {source!r}: {exc}") from exc
    if isinstance(source, (str, bytes)):
        return json.loads(source)
    return json.load(source)


@dataclass(frozen=True)
class SplitCondition:
    """A binary split condition: X=t / X≠t (discrete), X≤t / X>t (continuous)."""

    attribute: str
    op: str
    threshold: object

    def __post_init__(self):
        if self.op not in _NEGATE:
            raise ValueError(f"unknown op {self.op!r}")

    def negate(self) -> "SplitCondition":
        return SplitCondition(self.attribute, _NEGATE[self.op], self.threshold)

    def matches(self, values: np.ndarray) -> np.ndarray:
        if self.op == EQ:
            return values == self.threshold
        if self.op == NEQ:
            return values != self.threshold
        if self.op == LEQ:
            return values <= self.threshold
        return values > self.threshold

    def describe(self) -> str:
        sym = {EQ: "=", NEQ: "!=", LEQ: "<=", GT: ">"}[self.op]
        return f"{self.attribute}{sym}{self.threshold}"


@dataclass(frozen=True)
class Path:
    """Conjunction of split conditions in root-to-node order."""

    conditions: tuple[SplitCondition, ...] = ()

    def extend(self, cond: SplitCondition) -> "Path":
        return Path(self.conditions + (cond,))

    def attributes(self) -> tuple[str, ...]:
        seen: list[str] = []
        for c in self.conditions:
            if c.attribute not in seen:
                seen.append(c.attribute)
        return tuple(seen)

    def __len__(self) -> int:
        return len(self.conditions)

    def describe(self) -> str:
        return " & ".join(c.describe() for c in self.conditions) if self.conditions else "(root)"


EMPTY_PATH = Path()


class Dataset:
    """Immutable typed table; `index` selects the rows visible in this view."""

    def __init__(self, schema: Schema, columns: dict[str, np.ndarray],
                 index: np.ndarray | None = None, labeled: bool = True):
        self.schema = schema
        self._columns = columns
        if index is None:
            lengths = {len(v) for v in columns.values()}
            n = lengths.pop() if lengths else 0
            index = np.arange(n)
        self.index = index
        self.labeled = labeled

    @property
    def n(self) -> int:
        return len(self.index)

    def column(self, name: str) -> np.ndarray:
        if name not in self._columns:
            raise UnknownAttribute(f"no column named {name!r}")
        return self._columns[name][self.index]

    def class_column(self) -> np.ndarray:
        if not self.labeled:
            raise UnlabeledData("dataset has no class labels")
        return self.column(self.schema.class_attr.name)

    def subset(self, mask_or_index: np.ndarray) -> "Dataset":
        if mask_or_index.dtype == bool:
            new_index = self.index[mask_or_index]
        else:
            new_index = self.index[mask_or_index]
        return Dataset(self.schema, self._columns, new_index, self.labeled)

    def without_labels(self) -> "Dataset":
        cols = {k: v for k, v in self._columns.items() if k != self.schema.class_attr.name}
        return Dataset(self.schema, cols, self.index, labeled=False)

    def row(self, i: int) -> dict:
        names = list(self.schema.predictive_names)
        if self.labeled:
            names.append(self.schema.class_attr.name)
        ridx = self.index[i]
        return {name: self._columns[name][ridx] for name in names}

    def iter_rows(self):
        for i in range(self.n):
            yield self.row(i)


def dataset_from_rows(schema: Schema, rows: list[dict], labeled: bool = True) -> Dataset:
    """Build a validated dataset from row dicts (values already typed)."""
    names = list(schema.predictive_names)
    if labeled:
        names.append(schema.class_attr.name)
    columns: dict[str, np.ndarray] = {}
    for name in names:
        attr = schema.attribute(name)
        raw = [r[name] for r in rows]
        columns[name] = _typed_column(attr, raw, col=name)
    return Dataset(schema, columns, labeled=labeled)


def _typed_column(attr: Attribute, raw: list, col: str) -> np.ndarray:
    if attr.is_discrete:
        domain = set(attr.domain)
        vals = []
        for i, v in enumerate(raw):
            s = str(v)
            if s not in domain:
                raise ValueOutOfDomain(
                    f"row {i}, column {col!r}: value {s!r} not in domain {list(attr.domain)}")
            vals.append(s)
        return np.array(vals, dtype=object)
    out = np.empty(len(raw), dtype=np.float64)
    for i, v in enumerate(raw):
        try:
            out[i] = float(v)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"row {i}, column {col!r}: cannot parse {v!r} as a number") from exc
        if not math.isfinite(out[i]):
            raise ParseError(f"row {i}, column {col!r}: non-finite value {v!r}")
    return out


def load_dataset(csv_source, schema_source) -> Dataset:
    """Load and validate a CSV (header row required) against a schema document."""
    schema = schema_source if isinstance(schema_source, Schema) else schema_from_json(schema_source)
    text = _read_text(csv_source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("CSV has no header row")
    expected = set(schema.predictive_names)
    class_name = schema.class_attr.name
    labeled = class_name in header
    allowed = expected | ({class_name} if labeled else set())
    if set(header) != allowed:
        missing = sorted(allowed - set(header))
        extra = sorted(set(header) - allowed)
        raise SchemaMismatch(f"columns missing={missing} extra={extra}")
    if len(set(header)) != len(header):
        raise SchemaMismatch("duplicate column names in CSV header")

    raw_rows = []
    for lineno, cells in enumerate(reader):
        if len(cells) != len(header):
            raise ParseError(f"row {lineno}: expected {len(header)} cells, got {len(cells)}")
        for cell, col in zip(cells, header):
            if cell == "":
                raise ParseError(f"row {lineno}, column {col!r}: missing value")
        raw_rows.append(dict(zip(header, cells)))
    return dataset_from_rows(schema, raw_rows, labeled=labeled)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        if source == "" or "\n" in source or "," in source:
            return source
        try:
            with open(source, "r", encoding="utf-8") as fh:
                return fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read {source!r}: {exc}") from exc
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def serialize_dataset(d: Dataset) -> str:
    """Emit the dataset as CSV; round-trips through load_dataset."""
    names = list(d.schema.predictive_names)
    if d.labeled:
        names.append(d.schema.class_attr.name)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    cols = {name: d.column(name) for name in names}
    kinds = {name: d.schema.attribute(name).is_discrete for name in names}
    for i in range(d.n):
        writer.writerow([
            cols[name][i] if kinds[name] else repr(float(cols[name][i]))
            for name in names
        ])
    return buf.getvalue()


def split_train_test(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded uniform shuffle then prefix cut; train size rounds half up."""
    if d.n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n_train = math.floor(train_fraction * d.n + 0.5)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(d.n)
    train_pos = np.sort(perm[:n_train])
    test_pos = np.sort(perm[n_train:])
    if n_train == 0 or n_train == d.n:
        warnings.warn("train/test split produced an empty part", stacklevel=2)
    return d.subset(train_pos), d.subset(test_pos)


def filter_by_path(d: Dataset, path: Path) -> Dataset:
    """Rows satisfying every condition in the path; empty path keeps all rows."""
    mask = np.ones(d.n, dtype=bool)
    for cond in path.conditions:
        mask &= cond.matches(d.column(cond.attribute))
    return d.subset(mask)
