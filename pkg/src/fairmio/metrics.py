"""Intersectional bias measures on weighted empirical distributions.

All measures reduce to a signed per-row weight ``a_i``: the pre-absolute
value of a subgroup is ``sum(a_i for i in S)``. That is what lets exhaustive
enumeration and the auditors share one kernel.

``raw_signed`` conventions:

* SD:   P1(S) - P2(S)
* SPSF: P(S) * (P(h=1) - P(h=1 | S))
* FPSF: P(S, y=0) * (P(h=1 | y=0) - P(h=1 | S, y=0))
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import kernels
from .errors import DegenerateClassifier, EmptyConditional, EnumerationCapExceeded, NoNegativeClass
from .subgroups import Conjunction, conjunction_count, enumerate_conjunctions, membership, to_json

ENUMERATION_CAP = 10 ** 6
TIE_TOL = 1e-12


class Measure(str, Enum):
    SD = "SD"
    SPSF = "SPSF"
    FPSF = "FPSF"

    @classmethod
    def parse(cls, value) -> "Measure":
        if isinstance(value, cls):
            return value
        return cls(str(value).upper())


@dataclass(frozen=True)
class PredictionVector:
    values: np.ndarray
    pos_mass: int
    neg_mass: int

    @classmethod
    def from_array(cls, ds, yhat) -> "PredictionVector":
        values = np.asarray(yhat).astype(np.uint8).reshape(-1)
        if values.shape[0] != ds.n:
            raise ValueError(f"prediction length {values.shape[0]} != {ds.n} rows")
        if np.any(values > 1):
            raise ValueError("predictions must be 0/1")
        values.setflags(write=False)
        pos = int(ds.weights[values == 1].sum())
        return cls(values, pos, ds.total_weight - pos)

    @property
    def p_h(self) -> float:
        return self.pos_mass / (self.pos_mass + self.neg_mass)


def as_prediction(ds, yhat) -> PredictionVector:
    return yhat if isinstance(yhat, PredictionVector) else PredictionVector.from_array(ds, yhat)


@dataclass(frozen=True)
class MetricReport:
    measure: Measure
    value: float
    subgroup: object
    raw_signed: float
    denominators: dict

    def to_json(self, ds) -> dict:
        return {"measure": self.measure.value, "value": self.value, "raw_signed": self.raw_signed,
                "subgroup": to_json(self.subgroup, ds), "denominators": dict(self.denominators)}


def _mask(ds, part) -> np.ndarray:
    part = np.asarray(part)
    if part.dtype == bool and part.shape == (ds.n,):
        return part
    mask = np.zeros(ds.n, dtype=bool)
    mask[part.astype(np.int64)] = True
    return mask


def p_y0(ds) -> float:
    return ds.class_counts[0] / ds.total_weight


# --- signed weights -------------------------------------------------------

def sd_weights(ds, part1, part2) -> np.ndarray:
    """Per-row weights whose subgroup sum is P1(S) - P2(S)."""
    m1, m2 = _mask(ds, part1), _mask(ds, part2)
    w1 = float(ds.weights[m1].sum())
    w2 = float(ds.weights[m2].sum())
    if w1 == 0 or w2 == 0:
        raise EmptyConditional("both parts need positive weight")
    return ds.weights * (m1 / w1 - m2 / w2)


def spsf_weights(ds, yhat) -> np.ndarray:
    yhat = as_prediction(ds, yhat)
    total = ds.total_weight
    return ds.weights * (yhat.p_h - yhat.values) / total


def fpsf_weights(ds, yhat) -> np.ndarray:
    yhat = as_prediction(ds, yhat)
    neg = ds.labels == 0
    n0 = ds.weights[neg].sum()
    if n0 == 0:
        raise NoNegativeClass("no rows with y = 0")
    fp_rate = ds.weights[neg & (yhat.values == 1)].sum() / n0
    return np.where(neg, ds.weights * (fp_rate - yhat.values) / ds.total_weight, 0.0)


def conditional_sd_weights(ds, yhat, negatives_only: bool = False) -> np.ndarray:
    """SD weights between predicted-positive and predicted-negative rows."""
    yhat = as_prediction(ds, yhat)
    pos = yhat.values == 1
    if negatives_only:
        neg_rows = ds.labels == 0
        return sd_weights(ds, pos & neg_rows, ~pos & neg_rows)
    return sd_weights(ds, pos, ~pos)


def measure_weights(ds, yhat, kind) -> np.ndarray:
    kind = Measure.parse(kind)
    if kind is Measure.SPSF:
        return spsf_weights(ds, yhat)
    if kind is Measure.FPSF:
        return fpsf_weights(ds, yhat)
    return conditional_sd_weights(ds, yhat)


# --- single-subgroup measures ---------------------------------------------

def _denominators(ds, p_h: Optional[float]) -> dict:
    return {"p_h": p_h, "p_hbar": None if p_h is None else 1.0 - p_h, "p_y0": p_y0(ds)}


def subgroup_discrepancy(ds, part1, part2, s) -> MetricReport:
    a = sd_weights(ds, part1, part2)
    raw = float(a @ membership(s, ds))
    m1 = ds.weights[_mask(ds, part1)].sum()
    m2 = ds.weights[_mask(ds, part2)].sum()
    return MetricReport(Measure.SD, abs(raw), s, raw, _denominators(ds, float(m1 / (m1 + m2))))


def spsf(ds, yhat, s) -> MetricReport:
    yhat = as_prediction(ds, yhat)
    raw = float(spsf_weights(ds, yhat) @ membership(s, ds))
    return MetricReport(Measure.SPSF, abs(raw), s, raw, _denominators(ds, yhat.p_h))


def fpsf(ds, yhat, s) -> MetricReport:
    yhat = as_prediction(ds, yhat)
    raw = float(fpsf_weights(ds, yhat) @ membership(s, ds))
    return MetricReport(Measure.FPSF, abs(raw), s, raw, _denominators(ds, yhat.p_h))


def evaluate_measure(ds, yhat, s, kind) -> MetricReport:
    """SD here means the discrepancy between predicted positives and negatives."""
    kind = Measure.parse(kind)
    if kind is Measure.SPSF:
        return spsf(ds, yhat, s)
    if kind is Measure.FPSF:
        return fpsf(ds, yhat, s)
    yhat = as_prediction(ds, yhat)
    return subgroup_discrepancy(ds, yhat.values == 1, yhat.values == 0, s)


# --- enumeration ----------------------------------------------------------

def compress(codes: np.ndarray, weights: np.ndarray) -> tuple:
    """Merge rows with identical protected codes, summing their weights."""
    uniq, inverse = np.unique(codes, axis=0, return_inverse=True)
    weights = np.asarray(weights, dtype=float)
    if weights.ndim == 1:
        weights = weights[:, None]
    merged = np.zeros((uniq.shape[0], weights.shape[1]))
    np.add.at(merged, inverse.reshape(-1), weights)
    return uniq.astype(np.int32), merged


def enumerate_sums(ds, weights, cap: int = ENUMERATION_CAP) -> tuple:
    """Signed sums of all conjunctions of ``ds`` (lexicographic order).

    ``weights`` may be (n,) or (n, q). Returns ``(conjunctions, sums)``.
    """
    count = conjunction_count(ds.cardinalities)
    if count > cap:
        raise EnumerationCapExceeded(f"{count} conjunctions exceed the cap of {cap}")
    codes, merged = compress(ds.codes, weights)
    sums = kernels.conjunction_sums(codes, merged, np.asarray(ds.cardinalities, dtype=np.int64))
    conjs = list(enumerate_conjunctions(ds.attribute_groups))
    return conjs, sums if np.ndim(weights) == 2 else sums[:, 0]


def argmax_set(conjs, values, tol: float = TIE_TOL) -> tuple:
    values = np.abs(np.asarray(values))
    best = float(values.max())
    return best, [c for c, v in zip(conjs, values) if v >= best - tol]


def msd_enumerate(ds, part1, part2, cap: int = ENUMERATION_CAP) -> tuple:
    """Maximum subgroup discrepancy over all conjunctions, with every argmax."""
    conjs, sums = enumerate_sums(ds, sd_weights(ds, part1, part2), cap)
    return argmax_set(conjs, sums)


def enumerate_measure(ds, yhat, kind, cap: int = ENUMERATION_CAP) -> tuple:
    """``(max value, argmax conjunctions)`` of a measure over all conjunctions."""
    conjs, sums = enumerate_sums(ds, measure_weights(ds, yhat, kind), cap)
    return argmax_set(conjs, sums)


# --- analytic conversions -------------------------------------------------

def _check_p_h(p_h: float) -> None:
    if not 0.0 < p_h < 1.0:
        raise DegenerateClassifier(f"P(h=1) = {p_h} leaves the conversion undefined")


def spsf_from_sd(sd_value: float, p_h: float, p_hbar: Optional[float] = None) -> float:
    _check_p_h(p_h)
    p_hbar = 1.0 - p_h if p_hbar is None else p_hbar
    return sd_value * p_h * p_hbar


def fpsf_from_spsf_conditional(spsf_on_y0: float, p_y0: float) -> float:
    if not 0.0 < p_y0 <= 1.0:
        raise ValueError("P(y=0) must lie in (0, 1]")
    return p_y0 * spsf_on_y0


def gamma_bound_for_msd(gamma: float, p_h: float, p_y0: Optional[float] = None) -> float:
    """SD threshold equivalent to a gamma-SPSF (or, with ``p_y0``, gamma-FPSF) bound.

    In FPSF mode ``p_h`` is the positive rate on the y=0 rows.
    """
    _check_p_h(p_h)
    bound = gamma / (p_h * (1.0 - p_h))
    if p_y0 is not None:
        if not 0.0 < p_y0 <= 1.0:
            raise ValueError("P(y=0) must lie in (0, 1]")
        bound /= p_y0
    return bound
