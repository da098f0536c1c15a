"""Synthetic tables with marginal parity but one planted biased intersection.

Cell ``(a, b)`` of two protected attributes receives a fixed number of rows
(the planted cell counts double) and ``n_ab / 2 - D_ab`` positives, where

    D_ab = h * r_a * s_b,   r_0 = k1 - 1, r_a = -1 otherwise (same for s_b).

Every row and column of ``D`` sums to zero, so each single attribute value
has exactly the overall positive rate, while the planted cell ``(0, 0)``
is the one most disproportionately negative. Counts are
deterministic; the seed only shuffles rows and draws the features.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .dataset import AuditDataset


class InfeasiblePlant(ValueError):
    """The requested discrepancy cannot coexist with marginal parity at this size."""


@dataclass(frozen=True)
class PlantedData:
    attr_names: tuple
    attr_values: tuple
    codes: np.ndarray
    labels: np.ndarray
    features: np.ndarray
    feature_names: tuple
    planted: tuple
    planted_sd: float
    h: int

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    def planted_literals(self) -> list:
        return [{"attr": a, "value": v} for a, v in self.planted]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.attr_names) + list(self.feature_names) + ["y"])
        for i in range(self.n):
            vals = [self.attr_values[a][self.codes[i, a]] for a in range(len(self.attr_names))]
            w.writerow(vals + [str(int(v)) for v in self.features[i]] + [str(int(self.labels[i]))])
        return buf.getvalue()

    def schema_text(self) -> str:
        lines = [f"{a} = categorical protected" for a in self.attr_names]
        lines += [f"{f} = numeric feature" for f in self.feature_names]
        lines.append("y = categorical label")
        return "\n".join(lines) + "\n"

    def to_dataset(self, protected_in_features: bool = False, aggregate: bool = True) -> AuditDataset:
        feats = self.features.astype(float)
        names = list(self.feature_names)
        cards = [len(v) for v in self.attr_values]
        if protected_in_features:
            onehot = [np.eye(c)[self.codes[:, a]] for a, c in enumerate(cards)]
            feats = np.hstack(onehot + [feats])
            names = [f"{a}={v}" for a, vals in zip(self.attr_names, self.attr_values) for v in vals] + names
        return AuditDataset.from_arrays(self.codes, self.labels, feats, cardinalities=cards,
                                        attribute_names=self.attr_names, value_names=self.attr_values,
                                        feature_names=names, aggregate=aggregate)


def _cell_sizes(n: int, k1: int, k2: int) -> np.ndarray:
    units = k1 * k2 + 1
    if n % (2 * units):
        raise InfeasiblePlant(f"n must be a multiple of {2 * units} for {k1}x{k2} attributes")
    sizes = np.full((k1, k2), n // units)
    sizes[0, 0] *= 2
    return sizes


def planted_counts(n: int, sd: float, cards=(3, 3)) -> tuple:
    """``(sizes, positives, h, planted_sd)`` per cell for a planted discrepancy ``sd``."""
    k1, k2 = cards
    if k1 < 2 or k2 < 2:
        raise InfeasiblePlant("both attributes need at least two values")
    if sd < 0:
        raise InfeasiblePlant("planted discrepancy must be nonnegative")
    sizes = _cell_sizes(n, k1, k2)
    scale = 4 * (k1 - 1) * (k2 - 1)
    h = math.ceil(round(sd * n / scale, 9))
    r = np.array([k1 - 1] + [-1] * (k1 - 1))
    s = np.array([k2 - 1] + [-1] * (k2 - 1))
    dev = h * np.outer(r, s)
    pos = sizes // 2 - dev
    if np.any(pos < 0) or np.any(pos > sizes):
        h_max = int(np.min(sizes // 2 // np.abs(np.outer(r, s))))
        raise InfeasiblePlant(f"discrepancy {sd} is not plantable at n={n}; "
                              f"the largest is {scale * h_max / n:.4f}")
    return sizes, pos, h, scale * h / n


def generate(n: int = 400, sd: float = 0.3, seed: int = 0, cards=(3, 3), noise_features: int = 1,
             signal_flip: float = 0.2, proxy_flip: float = 0.1, measurement_bias: float = 0.0) -> PlantedData:
    """Draw a planted table.

    Features: ``signal`` (the label flipped with probability ``signal_flip``),
    ``proxy`` (membership of the planted cell flipped with ``proxy_flip``) and
    ``noise_features`` fair coins. ``measurement_bias`` raises the flip rate
    of ``signal`` on the negatives of the planted cell, so a classifier that
    trusts ``signal`` has a higher false positive rate there.
    """
    sizes, pos, h, planted_sd = planted_counts(n, sd, cards)
    k1, k2 = cards
    rng = np.random.default_rng(seed)
    codes, labels = [], []
    for a in range(k1):
        for b in range(k2):
            size, p = int(sizes[a, b]), int(pos[a, b])
            codes.append(np.tile([a, b], (size, 1)))
            labels.append(np.r_[np.ones(p, dtype=np.int8), np.zeros(size - p, dtype=np.int8)])
    codes = np.vstack(codes)
    labels = np.concatenate(labels)
    perm = rng.permutation(n)
    codes, labels = codes[perm], labels[perm]
    in_cell = (codes[:, 0] == 0) & (codes[:, 1] == 0)
    flip = np.where(in_cell & (labels == 0), signal_flip + measurement_bias, signal_flip)
    signal = labels ^ (rng.random(n) < flip)
    proxy = in_cell ^ (rng.random(n) < proxy_flip)
    noise = (rng.random((n, noise_features)) < 0.5)
    features = np.column_stack([signal, proxy, noise]).astype(np.uint8)
    names = ("signal", "proxy") + tuple(f"noise{j + 1}" for j in range(noise_features))
    attr_values = (tuple(f"v{v}" for v in range(k1)), tuple(f"v{v}" for v in range(k2)))
    planted = (("attr1", "v0"), ("attr2", "v0"))
    return PlantedData(("attr1", "attr2"), attr_values, codes, labels, features, names, planted,
                       planted_sd, h)
