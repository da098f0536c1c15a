"""Tabular ingestion, protected-attribute binarization and weighted samples.

A raw CSV becomes an :class:`AuditDataset`: protected attributes one-hot
encoded per attribute, features scaled to [0, 1], and identical rows merged
into a single weighted row.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    MissingColumn,
    NonBinaryLabel,
    ParseFailure,
    UnruledNumericProtected,
)

MISSING = "missing"
KINDS = ("categorical", "numeric")
ROLES = ("protected", "feature", "label", "ignore")


@dataclass(frozen=True)
class ColumnMeta:
    kind: str = "categorical"
    role: str = "feature"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")
        if self.role not in ROLES:
            raise ValueError(f"unknown column role {self.role!r}")


@dataclass(frozen=True)
class DiscretizationRule:
    column: str
    cut_points: tuple
    labels: tuple = ()

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cut_points)
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError(f"cut points for {self.column!r} must be strictly increasing")
        object.__setattr__(self, "cut_points", cuts)
        labels = tuple(self.labels) if self.labels else self.default_labels(self.column, cuts)
        if len(labels) != len(cuts) + 1:
            raise ValueError(f"rule for {self.column!r} needs {len(cuts) + 1} labels")
        object.__setattr__(self, "labels", labels)

    @staticmethod
    def default_labels(column: str, cuts: Sequence[float]) -> tuple:
        fmt = [f"{c:g}" for c in cuts]
        if not fmt:
            return (column,)
        labels = [f"{column}≤{fmt[0]}"]
        labels += [f"{lo}<{column}≤{hi}" for lo, hi in zip(fmt, fmt[1:])]
        labels.append(f"{column}>{fmt[-1]}")
        return tuple(labels)

    def bin(self, value: float) -> str:
        # right-closed bins: value <= cut falls into the lower bin
        return self.labels[int(np.searchsorted(self.cut_points, value, side="left"))]


@dataclass
class RawTable:
    rows: list
    column_meta: dict

    def __post_init__(self):
        labels = [c for c, m in self.column_meta.items() if m.role == "label"]
        if len(labels) != 1:
            raise ValueError(f"schema needs exactly one label column, got {labels}")

    @property
    def label_column(self) -> str:
        return next(c for c, m in self.column_meta.items() if m.role == "label")

    def columns(self, role: str) -> list:
        return [c for c, m in self.column_meta.items() if m.role == role]

    def __len__(self) -> int:
        return len(self.rows)


def _is_missing(value) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "") or (
        isinstance(value, float) and math.isnan(value))


def _coerce_label(value, row: int) -> int:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise NonBinaryLabel(row, value) from None
    if v not in (0.0, 1.0):
        raise NonBinaryLabel(row, value)
    return int(v)


def ingest_csv(path, schema: Mapping[str, ColumnMeta]) -> RawTable:
    """Parse a headed, comma-separated UTF-8 file according to ``schema``.

    Numeric cells are converted to float (empty cells become ``None``), the
    label is coerced to 0/1 and categorical cells are kept as stripped strings.
    """
    schema = dict(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn("file has no header row") from None
        missing = [c for c in schema if c not in header]
        if missing:
            raise MissingColumn(f"columns absent from header: {missing}")
        pos = {c: header.index(c) for c in schema}
        rows = []
        for i, record in enumerate(reader):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseFailure(i, "<row>", ",".join(record))
            parsed = {}
            for col, meta in schema.items():
                cell = record[pos[col]].strip()
                if meta.role == "label":
                    parsed[col] = _coerce_label(cell, i)
                elif meta.kind == "numeric":
                    if cell == "":
                        parsed[col] = None
                    else:
                        try:
                            parsed[col] = float(cell)
                        except ValueError:
                            raise ParseFailure(i, col, cell) from None
                else:
                    parsed[col] = cell if cell != "" else None
            rows.append(parsed)
    return RawTable(rows=rows, column_meta=schema)


def load_schema(path) -> tuple:
    """Read a schema sidecar; returns ``(column_meta, rules)``.

    Two formats are accepted. JSON: ``{"columns": {name: {"kind", "role",
    "cuts", "labels"}}}``. Otherwise one ``name = kind role [cuts=a;b]
    [labels=x;y;z]`` entry per line, ``#`` starting a comment.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    meta, rules = {}, []
    if path.suffix == ".json":
        spec = json.loads(text).get("columns", {})
        for name, entry in spec.items():
            meta[name] = ColumnMeta(entry.get("kind", "categorical"), entry.get("role", "feature"))
            if "cuts" in entry:
                rules.append(DiscretizationRule(name, tuple(entry["cuts"]), tuple(entry.get("labels", ()))))
        return meta, rules
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'name = kind role'")
        name, rest = (s.strip() for s in line.split("=", 1))
        words = rest.split()
        opts = dict(w.split("=", 1) for w in words if "=" in w)
        plain = [w for w in words if "=" not in w]
        kind = plain[0] if plain else "categorical"
        role = plain[1] if len(plain) > 1 else "feature"
        meta[name] = ColumnMeta(kind, role)
        if "cuts" in opts:
            cuts = tuple(float(c) for c in opts["cuts"].split(";") if c)
            labels = tuple(opts["labels"].split(";")) if "labels" in opts else ()
            rules.append(DiscretizationRule(name, cuts, labels))
    return meta, rules


@dataclass(frozen=True)
class AuditDataset:
    """Weighted, binarized view of a tabular dataset.

    ``protected`` is an n x m 0/1 matrix, one-hot per protected attribute;
    ``attribute_groups`` lists ``(name, start, stop)`` column ranges into it and
    ``protected_values`` names the value of every one-hot column.
    """

    protected: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    attribute_groups: tuple
    protected_values: tuple
    feature_names: tuple = ()
    _codes: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.labels.shape[0]
        if n == 0:
            raise EmptyDataset("dataset has no rows")
        if self.protected.shape[0] != n or self.features.shape[0] != n or self.weights.shape[0] != n:
            raise ValueError("row counts of protected/features/labels/weights differ")
        if np.any(self.weights < 1):
            raise ValueError("weights must be positive integers")
        for arr in (self.protected, self.features, self.labels, self.weights):
            arr.setflags(write=False)
        codes = np.zeros((n, len(self.attribute_groups)), dtype=np.int32)
        for a, (name, lo, hi) in enumerate(self.attribute_groups):
            block = self.protected[:, lo:hi]
            if not np.all(block.sum(axis=1) == 1):
                raise ValueError(f"attribute {name!r} is not one-hot in every row")
            codes[:, a] = block.argmax(axis=1)
        codes.setflags(write=False)
        object.__setattr__(self, "_codes", codes)

    @classmethod
    def from_arrays(cls, codes, labels, features=None, weights=None, cardinalities=None,
                    attribute_names=None, value_names=None, feature_names=None,
                    aggregate: bool = True) -> "AuditDataset":
        """Build a dataset from categorical codes (n x attributes) directly."""
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim == 1:
            codes = codes[:, None]
        n, k = codes.shape
        if n == 0:
            raise EmptyDataset("dataset has no rows")
        labels = np.asarray(labels, dtype=np.int8)
        if cardinalities is None:
            cardinalities = [int(codes[:, a].max()) + 1 for a in range(k)]
        attribute_names = list(attribute_names or [f"a{a}" for a in range(k)])
        groups, values, start = [], [], 0
        for a, card in enumerate(cardinalities):
            groups.append((attribute_names[a], start, start + card))
            names = value_names[a] if value_names else [str(v) for v in range(card)]
            values.extend(names)
            start += card
        protected = np.zeros((n, start), dtype=np.uint8)
        for a, (_, lo, _) in enumerate(groups):
            protected[np.arange(n), lo + codes[:, a]] = 1
        feats = np.zeros((n, 0)) if features is None else np.asarray(features, dtype=float).reshape(n, -1)
        w = np.ones(n, dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
        fnames = tuple(feature_names or [f"f{j}" for j in range(feats.shape[1])])
        if aggregate:
            protected, feats, labels, w = _aggregate(protected, feats, labels, w)
        return cls(protected, feats, labels, w, tuple(groups), tuple(values), fnames)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def m(self) -> int:
        return int(self.protected.shape[1])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def codes(self) -> np.ndarray:
        return self._codes

    @property
    def cardinalities(self) -> list:
        return [hi - lo for _, lo, hi in self.attribute_groups]

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    @property
    def class_counts(self) -> tuple:
        n1 = int(self.weights[self.labels == 1].sum())
        return self.total_weight - n1, n1

    def column_label(self, j: int) -> tuple:
        for name, lo, hi in self.attribute_groups:
            if lo <= j < hi:
                return name, self.protected_values[j]
        raise IndexError(j)

    def column_index(self, attr: str, value: str) -> int:
        for name, lo, hi in self.attribute_groups:
            if name == attr:
                for j in range(lo, hi):
                    if self.protected_values[j] == str(value):
                        return j
                raise KeyError(f"{attr} has no value {value!r}")
        raise KeyError(f"unknown attribute {attr!r}")

    def subset(self, rows) -> "AuditDataset":
        rows = np.asarray(rows)
        return AuditDataset(self.protected[rows].copy(), self.features[rows].copy(),
                            self.labels[rows].copy(), self.weights[rows].copy(),
                            self.attribute_groups, self.protected_values, self.feature_names)

    def expand(self) -> tuple:
        """Undo aggregation: repeat every row ``weight`` times."""
        idx = np.repeat(np.arange(self.n), self.weights)
        return self.protected[idx], self.features[idx], self.labels[idx]

    def to_text(self) -> str:
        """Deterministic plain-text dump used for fixtures."""
        out = ["# fairmio-dataset v1"]
        for name, lo, hi in self.attribute_groups:
            out.append("# attr " + json.dumps([name, list(self.protected_values[lo:hi])], ensure_ascii=False))
        out.append("# features " + json.dumps(list(self.feature_names), ensure_ascii=False))
        for i in range(self.n):
            bits = "".join(str(int(b)) for b in self.protected[i])
            feats = ",".join(repr(float(v)) for v in self.features[i])
            out.append(f"{int(self.weights[i])}\t{bits}\t{feats}\t{int(self.labels[i])}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AuditDataset":
        groups, values, fnames, rows = [], [], (), []
        start = 0
        for line in text.splitlines():
            if line.startswith("# attr "):
                name, vals = json.loads(line[len("# attr "):])
                groups.append((name, start, start + len(vals)))
                values.extend(vals)
                start += len(vals)
            elif line.startswith("# features "):
                fnames = tuple(json.loads(line[len("# features "):]))
            elif line and not line.startswith("#"):
                rows.append(line.split("\t"))
        if not rows:
            raise EmptyDataset("dump has no rows")
        w = np.array([int(r[0]) for r in rows], dtype=np.int64)
        prot = np.array([[int(b) for b in r[1]] for r in rows], dtype=np.uint8).reshape(len(rows), start)
        feats = np.array([[float(v) for v in r[2].split(",")] if r[2] else [] for r in rows],
                         dtype=float).reshape(len(rows), len(fnames))
        labels = np.array([int(r[3]) for r in rows], dtype=np.int8)
        return cls(prot, feats, labels, w, tuple(groups), tuple(values), fnames)


def _aggregate(protected, features, labels, weights):
    key = np.concatenate([protected.astype(float), features, labels[:, None].astype(float)], axis=1)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    # keep first-occurrence order so the result is stable under row permutations of duplicates
    order = np.argsort(first, kind="stable")
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    merged = np.zeros(order.size, dtype=np.int64)
    np.add.at(merged, remap[inverse], weights)
    keep = first[order]
    return protected[keep], features[keep], labels[keep], merged


def _categories(values: Iterable) -> list:
    present = sorted({v for v in values if v is not None}, key=str)
    if any(v is None for v in values):
        present.append(MISSING)
    return [str(v) for v in present]


def build_dataset(raw: RawTable, rules: Sequence[DiscretizationRule] = (),
                  protected_in_features: bool = True) -> AuditDataset:
    """Binarize ``raw`` into an :class:`AuditDataset`.

    Protected columns are one-hot encoded (numeric ones through their rule),
    categorical features one-hot, numeric features min-max scaled. Identical
    binarized rows are merged. Protected one-hot columns are prepended to the
    feature matrix unless ``protected_in_features`` is false.
    """
    if len(raw) == 0:
        raise EmptyDataset("no rows to build a dataset from")
    rules = {r.column: r for r in rules}
    label_col = raw.label_column
    n = len(raw)

    groups, values, blocks = [], [], []
    start = 0
    for col in raw.columns("protected"):
        meta = raw.column_meta[col]
        column = [row.get(col) for row in raw.rows]
        if meta.kind == "numeric":
            if col not in rules:
                raise UnruledNumericProtected(col)
            rule = rules[col]
            column = [None if _is_missing(v) else rule.bin(float(v)) for v in column]
            cats = [lab for lab in rule.labels if lab in set(column)]
            if any(v is None for v in column):
                cats.append(MISSING)
        else:
            column = [None if _is_missing(v) else str(v) for v in column]
            cats = _categories(column)
        index = {c: k for k, c in enumerate(cats)}
        block = np.zeros((n, len(cats)), dtype=np.uint8)
        for i, v in enumerate(column):
            block[i, index[MISSING if v is None else v]] = 1
        groups.append((col, start, start + len(cats)))
        values.extend(cats)
        blocks.append(block)
        start += len(cats)
    protected = np.concatenate(blocks, axis=1) if blocks else np.zeros((n, 0), dtype=np.uint8)

    fblocks, fnames = [], []
    if protected_in_features and start:
        fblocks.append(protected.astype(float))
        fnames.extend(f"{g}={v}" for g, lo, hi in groups for v in values[lo:hi])
    for col in raw.columns("feature"):
        meta = raw.column_meta[col]
        column = [row.get(col) for row in raw.rows]
        if meta.kind == "numeric":
            vals = np.empty(n)
            for i, v in enumerate(column):
                if _is_missing(v):
                    raise ParseFailure(i, col, v)
                vals[i] = float(v)
            lo, hi = vals.min(), vals.max()
            # constant columns scale to zeros
            scaled = (vals - lo) / (hi - lo) if hi > lo else np.zeros(n)
            fblocks.append(scaled[:, None])
            fnames.append(col)
        else:
            column = [None if _is_missing(v) else str(v) for v in column]
            cats = _categories(column)
            block = np.zeros((n, len(cats)))
            for i, v in enumerate(column):
                block[i, cats.index(MISSING if v is None else v)] = 1.0
            fblocks.append(block)
            fnames.extend(f"{col}={c}" for c in cats)
    features = np.concatenate(fblocks, axis=1) if fblocks else np.zeros((n, 0))
    labels = np.array([_coerce_label(row[label_col], i) for i, row in enumerate(raw.rows)], dtype=np.int8)

    protected, features, labels, weights = _aggregate(protected, features, labels, np.ones(n, dtype=np.int64))
    return AuditDataset(protected, features, labels, weights, tuple(groups), tuple(values), tuple(fnames))


def split(ds: AuditDataset, test_fraction: float, seed: int) -> tuple:
    """Partition stored rows into ``(train, test)``; weights travel with rows."""
    if ds.n < 2:
        raise EmptyDataset("need at least two stored rows to split")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n_test = min(ds.n - 1, max(1, math.floor(test_fraction * ds.n)))
    perm = np.random.default_rng(seed).permutation(ds.n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return ds.subset(train_rows), ds.subset(test_rows)
