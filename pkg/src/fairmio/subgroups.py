"""Subgroup representations: attribute-value conjunctions and linear thresholds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import IndexOutOfRange

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class Conjunction:
    """AND over one-hot protected columns; ``literals`` are column indices."""

    literals: tuple = ()
    n_min: int = 0

    def __post_init__(self):
        object.__setattr__(self, "literals", tuple(sorted(int(j) for j in self.literals)))
        if len(set(self.literals)) != len(self.literals):
            raise ValueError("duplicate literal in conjunction")

    def __len__(self) -> int:
        return len(self.literals)

    def validate(self, attribute_groups) -> None:
        seen = set()
        for j in self.literals:
            owner = next((name for name, lo, hi in attribute_groups if lo <= j < hi), None)
            if owner is None:
                raise IndexOutOfRange(f"literal {j} outside protected columns")
            if owner in seen:
                raise ValueError(f"two literals of attribute {owner!r} define an empty subgroup")
            seen.add(owner)


@dataclass(frozen=True)
class LinearThresholdGroup:
    """Members satisfy ``c . x >= t`` over the protected one-hot columns."""

    c: tuple
    t: float
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "t", float(self.t))
        if any(abs(v) > 1 + 1e-12 for v in self.c):
            raise ValueError("linear subgroup coefficients must lie in [-1, 1]")
        if self.eps <= 0:
            raise ValueError("strictness eps must be positive")


Subgroup = Union[Conjunction, LinearThresholdGroup]


def membership(s: Subgroup, ds) -> np.ndarray:
    """0/1 indicator of every stored row of ``ds`` belonging to ``s``."""
    return membership_matrix(s, ds.protected)


def membership_matrix(s: Subgroup, protected: np.ndarray) -> np.ndarray:
    m = protected.shape[1]
    if isinstance(s, Conjunction):
        if any(j < 0 or j >= m for j in s.literals):
            raise IndexOutOfRange(f"conjunction {s.literals} exceeds {m} protected columns")
        if not s.literals:
            return np.ones(protected.shape[0], dtype=np.uint8)
        return np.all(protected[:, list(s.literals)] == 1, axis=1).astype(np.uint8)
    if isinstance(s, LinearThresholdGroup):
        if len(s.c) != m:
            raise IndexOutOfRange(f"linear subgroup has {len(s.c)} coefficients for {m} columns")
        return (protected @ np.asarray(s.c) >= s.t).astype(np.uint8)
    raise TypeError(f"not a subgroup: {s!r}")


def conjunction_count(cardinalities: Sequence[int]) -> int:
    total = 1
    for c in cardinalities:
        total *= c + 1
    return total - 1


def enumerate_conjunctions(attribute_groups) -> Iterator[Conjunction]:
    """Yield every nonempty conjunction with at most one literal per attribute.

    Order is lexicographic over the sorted literal tuples, which is exactly a
    depth-first pre-order walk over attributes.
    """
    groups = [(lo, hi) for _, lo, hi in attribute_groups]

    def walk(prefix, first):
        for a in range(first, len(groups)):
            lo, hi = groups[a]
            for j in range(lo, hi):
                lits = prefix + (j,)
                yield Conjunction(lits)
                yield from walk(lits, a + 1)

    return walk((), 0)


def conjunction_as_linear(conj: Conjunction, m: int, eps: float = DEFAULT_EPS) -> LinearThresholdGroup:
    """Linear encoding with identical membership on one-hot data."""
    c = np.zeros(m)
    c[list(conj.literals)] = 1.0
    return LinearThresholdGroup(tuple(c), len(conj.literals) - 0.5, eps)


def _fmt(v: float, digits: int) -> str:
    s = f"{abs(v):.{digits}f}"
    return ("−" if v < 0 and float(s) != 0 else "") + s


def describe(s: Subgroup, vocab, digits: int = 2) -> str:
    """Human-readable rendering.

    ``vocab`` is an :class:`AuditDataset` or a sequence of ``(attr, value)``
    pairs, one per protected column.
    """
    if isinstance(s, Conjunction):
        if not s.literals:
            return "⊤ (entire population)"
        label = vocab.column_label if hasattr(vocab, "column_label") else (lambda j: vocab[j])
        return " ∧ ".join("{} = {}".format(*label(j)) for j in s.literals)
    terms = []
    for j, cj in enumerate(s.c):
        mag = f"{abs(cj):.{digits}f}·x{j + 1}"
        if not terms:
            terms.append(("−" if cj < 0 else "") + mag)
        else:
            terms.append(("− " if cj < 0 else "+ ") + mag)
    return f"{' '.join(terms)} ≥ {_fmt(s.t, digits)}"


def to_json(s: Subgroup, ds) -> dict:
    if isinstance(s, Conjunction):
        return {"kind": "conjunction",
                "literals": [{"attr": a, "value": v} for a, v in map(ds.column_label, s.literals)]}
    return {"kind": "linear", "c": list(s.c), "t": s.t, "eps": s.eps}


def from_json(obj: dict, ds) -> Subgroup:
    if obj["kind"] == "conjunction":
        return Conjunction(tuple(ds.column_index(l["attr"], l["value"]) for l in obj["literals"]))
    if obj["kind"] == "linear":
        return LinearThresholdGroup(tuple(obj["c"]), obj["t"], obj.get("eps", DEFAULT_EPS))
    raise ValueError(f"unknown subgroup kind {obj['kind']!r}")
