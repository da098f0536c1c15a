"""Fair 0-1-loss classifiers trained by a solve / audit / cut loop.

The master problem minimizes ``FPR + FNR`` (reported halved as the balanced
error). Rows sharing a feature vector always receive the same prediction, so
the master carries one prediction variable per distinct feature vector and
every fairness cut is a linear inequality over those variables.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .auditor import (
    ORACLE_TIME_LIMIT,
    audit_conjunction_bnb,
    audit_linear_milp,
    logistic_warm_start,
    make_objective,
)
from .errors import DegenerateClassifier, EmptyConditional, NonBinaryFeatures, SingleClassDataset, VacuousCut
from .metrics import Measure, as_prediction, evaluate_measure, gamma_bound_for_msd, p_y0
from .milp import MilpModel, Status, solve_with
from .subgroups import describe, membership, to_json

log = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.01
DEFAULT_MAX_CUTS = 50
MASTER_TIME_LIMIT = 300.0
VIOLATION_TOL = 1e-9
# cuts are rendered this far inside gamma so solver feasibility tolerance cannot
# let a violating incumbent through
CUT_MARGIN = 1e-7
NONZERO_TOL = 1e-9


class TrainStatus(str, Enum):
    FAIR_OPTIMAL = "FairOptimal"
    FAIR_FEASIBLE = "FairFeasible"
    MAX_CUTS = "MaxCuts"
    FAIR_UNPROVEN = "FairUnproven"
    TIME_LIMIT = "TimeLimit"
    NO_INCUMBENT = "NoIncumbent"


# --- classifiers ----------------------------------------------------------

@dataclass(frozen=True)
class LinearClassifierSpec:
    """Predicts 1 iff ``c . x >= t``."""

    coefficients: tuple
    threshold: float
    eps: float = 1e-6
    sigma: float = 0.0
    feature_names: tuple = ()

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        return (X @ np.asarray(self.coefficients, dtype=float) >= self.threshold).astype(np.uint8)

    @property
    def sparsity(self) -> tuple:
        return tuple(int(abs(c) > NONZERO_TOL) for c in self.coefficients)

    @property
    def nonzero(self) -> int:
        return int(sum(self.sparsity))

    def describe(self, digits: int = 3) -> str:
        names = self.feature_names or tuple(f"x{j}" for j in range(len(self.coefficients)))
        terms = [f"{c:+.{digits}f}·{n}" for c, n in zip(self.coefficients, names) if abs(c) > NONZERO_TOL]
        return (" ".join(terms) or "0") + f" ≥ {self.threshold:.{digits}f}"

    def to_json(self) -> dict:
        return {"kind": "linear",
                "params": {"coefficients": [float(c) for c in self.coefficients],
                           "threshold": float(self.threshold), "eps": self.eps, "sigma": self.sigma,
                           "feature_names": list(self.feature_names), "nonzero": self.nonzero}}


@dataclass(frozen=True)
class DnfSpec:
    """An OR of ``len(clauses)`` ANDs; each clause lists literal columns.

    Literal ``j < d`` is feature ``j``; with ``negations`` literal ``d + j``
    is its complement. An empty clause is always true.
    """

    clauses: tuple
    n_features: int
    negations: bool = False
    feature_names: tuple = ()

    @property
    def clause_count(self) -> int:
        return len(self.clauses)

    def literals(self, features) -> np.ndarray:
        X = np.asarray(features)
        if X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} features, got {X.shape[1]}")
        X = X.astype(np.uint8)
        return np.hstack([X, 1 - X]) if self.negations else X

    def predict(self, features) -> np.ndarray:
        L = self.literals(features)
        out = np.zeros(L.shape[0], dtype=bool)
        for clause in self.clauses:
            out |= np.all(L[:, list(clause)] == 1, axis=1) if clause else True
        return out.astype(np.uint8)

    def literal_matrix(self) -> np.ndarray:
        """``u[j, k] = 1`` iff literal ``j`` appears in clause ``k``."""
        u = np.zeros((self.n_features * (2 if self.negations else 1), self.clause_count), dtype=np.uint8)
        for k, clause in enumerate(self.clauses):
            u[list(clause), k] = 1
        return u

    def describe(self) -> str:
        names = self.feature_names or tuple(f"x{j}" for j in range(self.n_features))

        def lit(j):
            return names[j] if j < self.n_features else "¬" + names[j - self.n_features]

        parts = ["(" + " ∧ ".join(lit(j) for j in c) + ")" if c else "(⊤)" for c in self.clauses]
        return " ∨ ".join(parts)

    def to_json(self) -> dict:
        return {"kind": "dnf",
                "params": {"clauses": [list(map(int, c)) for c in self.clauses],
                           "n_features": self.n_features, "negations": self.negations,
                           "feature_names": list(self.feature_names)}}


def model_from_json(obj: dict):
    """Inverse of ``to_json`` for either classifier kind."""
    params = obj["params"]
    if obj["kind"] == "linear":
        return LinearClassifierSpec(tuple(float(c) for c in params["coefficients"]),
                                    float(params["threshold"]), float(params.get("eps", 1e-6)),
                                    float(params.get("sigma", 0.0)), tuple(params.get("feature_names", ())))
    if obj["kind"] == "dnf":
        return DnfSpec(tuple(tuple(int(j) for j in c) for c in params["clauses"]), int(params["n_features"]),
                       bool(params.get("negations", False)), tuple(params.get("feature_names", ())))
    raise ValueError(f"unknown model kind {obj['kind']!r}")


# --- configuration --------------------------------------------------------

@dataclass
class TrainConfig:
    model: str = "linear"
    clauses: int = 1
    sigma: float = 0.0
    cut_kind: str = "FPSF"
    oracle_kind: str = "same"
    subgroup_class: str = "conjunction"
    gamma: float = DEFAULT_GAMMA
    master_time_limit: float = MASTER_TIME_LIMIT
    oracle_time_limit: float = ORACLE_TIME_LIMIT
    max_cuts: int = DEFAULT_MAX_CUTS
    total_time_limit: Optional[float] = None
    eps: float = 1e-6
    negations: bool = False
    solver: str = "builtin"

    def validate(self) -> None:
        if self.model not in ("linear", "dnf"):
            raise ValueError(f"model must be linear or dnf, not {self.model!r}")
        if self.clauses < 1:
            raise ValueError("clauses must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if Measure.parse(self.cut_kind) is Measure.SD:
            raise ValueError("cut_kind must be SPSF or FPSF")
        if self.oracle_kind not in ("same", "sd-proxy"):
            raise ValueError("oracle_kind must be 'same' or 'sd-proxy'")
        if self.subgroup_class not in ("conjunction", "linear"):
            raise ValueError("subgroup_class must be conjunction or linear")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if self.max_cuts < 1:
            raise ValueError("max_cuts must be >= 1")


# --- master problems ------------------------------------------------------

@dataclass
class SdCutAux:
    """Shared inverse-count variables used by SD cuts (one set per master)."""

    p_plus: np.ndarray
    p_minus: np.ndarray
    p_ref_plus: int
    p_ref_minus: int


@dataclass
class Master:
    """A master MILP plus the bookkeeping needed to add cuts and read models."""

    model: MilpModel
    ds: object
    kind: str
    group_of_row: np.ndarray
    group_x: np.ndarray
    w: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    yhat: np.ndarray
    params: dict
    sd_aux: Optional[SdCutAux] = None
    cut_rows: list = field(default_factory=list)

    @property
    def groups(self) -> int:
        return int(self.yhat.size)

    def group_sums(self, row_values) -> np.ndarray:
        out = np.zeros(self.groups)
        np.add.at(out, self.group_of_row, row_values)
        return out


def _check_classes(ds) -> tuple:
    n0, n1 = ds.class_counts
    if n0 == 0 or n1 == 0:
        raise SingleClassDataset("training needs both classes")
    return n0, n1


def _feature_groups(ds) -> tuple:
    uniq, first, inverse = np.unique(ds.features, axis=0, return_index=True, return_inverse=True)
    # renumber groups by first occurrence for stable variable names
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return uniq[order], rank[inverse.reshape(-1)]


def _new_master(ds, kind: str, name: str) -> tuple:
    n0, n1 = _check_classes(ds)
    if ds.d == 0:
        raise ValueError("training needs at least one feature")
    X, group_of_row = _feature_groups(ds)
    G = X.shape[0]
    w = np.zeros(G)
    w0 = np.zeros(G)
    np.add.at(w, group_of_row, ds.weights)
    np.add.at(w0, group_of_row, ds.weights * (ds.labels == 0))
    w1 = w - w0
    model = MilpModel(name)
    return model, X, group_of_row, w, w0, w1, n0, n1


def _error_objective(yhat, w0, w1, n0, n1) -> tuple:
    """Terms of FPR + FNR in the group prediction variables."""
    return yhat, w0 / n0 - w1 / n1, float(w1.sum() / n1)


def build_master_linear(ds, cfg: TrainConfig) -> Master:
    """0-1-loss linear classifier: ``yhat_g = 1`` iff ``c . x_g >= t``, big-M ``2d``.

    Features must lie in [0, 1]. With ``sigma > 0`` binary indicators
    ``s_j >= |c_j|`` are charged ``sigma / d`` each.
    """
    model, X, group_of_row, w, w0, w1, n0, n1 = _new_master(ds, "linear", "master_linear")
    if X.size and (X.min() < 0 or X.max() > 1):
        raise ValueError("linear master needs features scaled to [0, 1]")
    G, d = X.shape
    big = 2.0 * d
    c = model.add_vars("c", d, "continuous", -1.0, 1.0)
    t = model.add_var("t", "continuous", -float(d), float(d))
    yhat = model.add_vars("yhat", G, "binary")
    for g in range(G):
        nz = np.flatnonzero(X[g])
        idx = np.concatenate([c[nz], [t, yhat[g]]])
        coef = np.concatenate([X[g, nz], [-1.0, -big]])
        model.add_constraint((idx, coef), ">=", -big, f"fit_pos_{g}")
        model.add_constraint((idx, coef), "<=", -cfg.eps, f"fit_neg_{g}")
    idx, coef, const = _error_objective(yhat, w0, w1, n0, n1)
    params = {"c": c, "t": t, "eps": cfg.eps, "sigma": cfg.sigma}
    if cfg.sigma > 0:
        s = model.add_vars("s", d, "binary")
        for j in range(d):
            model.add_constraint({int(s[j]): 1.0, int(c[j]): -1.0}, ">=", 0.0, f"sparse_pos_{j}")
            model.add_constraint({int(s[j]): 1.0, int(c[j]): 1.0}, ">=", 0.0, f"sparse_neg_{j}")
        idx = np.concatenate([idx, s])
        coef = np.concatenate([coef, np.full(d, cfg.sigma / d)])
        params["s"] = s
    model.set_objective((idx, coef), "min", const)
    return Master(model, ds, "linear", group_of_row, X, w, w0, w1, yhat, params)


def build_master_dnf(ds, cfg: TrainConfig) -> Master:
    """DNF with ``cfg.clauses`` clauses, encoded as a CNF on negated literals.

    ``sat[g, k]`` says clause ``k`` of the CNF holds for group ``g`` (some
    chosen negated literal is 1); the DNF predicts 1 iff some CNF clause
    fails. Besides the three usual constraint families the upper bound
    ``sat <= sum(xbar u)`` is added and all families apply to every group, so
    the prediction variables are exact even when fairness cuts push on them.
    """
    model, X, group_of_row, w, w0, w1, n0, n1 = _new_master(ds, "dnf", "master_dnf")
    if not np.all((X == 0) | (X == 1)):
        raise NonBinaryFeatures("DNF training needs 0/1 features")
    L = np.hstack([X, 1 - X]) if cfg.negations else X
    xbar = 1 - L.astype(np.int64)
    G, p = xbar.shape
    C = cfg.clauses
    u = model.add_vars("u", p * C, "binary").reshape(C, p)
    sat = model.add_vars("sat", G * C, "continuous", 0.0, 1.0).reshape(G, C)
    yhat = model.add_vars("yhat", G, "continuous", 0.0, 1.0)
    for g in range(G):
        on = np.flatnonzero(xbar[g])
        for k in range(C):
            # clause k unsatisfied in the CNF -> positive prediction
            model.add_constraint((np.concatenate([[yhat[g]], u[k, on]]), 1.0), ">=", 1.0, f"neg_{g}_{k}")
            for j in on:
                model.add_constraint({int(sat[g, k]): 1.0, int(u[k, j]): -1.0}, ">=", 0.0, f"sat_{g}_{k}_{j}")
            model.add_constraint((np.concatenate([[sat[g, k]], u[k, on]]),
                                  np.concatenate([[1.0], -np.ones(on.size)])), "<=", 0.0, f"satx_{g}_{k}")
        model.add_constraint((np.concatenate([[yhat[g]], sat[g]]), 1.0), "<=", float(C), f"pos_{g}")
    idx, coef, const = _error_objective(yhat, w0, w1, n0, n1)
    model.set_objective((idx, coef), "min", const)
    return Master(model, ds, "dnf", group_of_row, X, w, w0, w1, yhat,
                  {"u": u, "clauses": C, "negations": cfg.negations})


def build_master(ds, cfg: TrainConfig) -> Master:
    return build_master_linear(ds, cfg) if cfg.model == "linear" else build_master_dnf(ds, cfg)


def extract_model(master: Master, x: np.ndarray):
    ds = master.ds
    p = master.params
    if master.kind == "linear":
        c = np.clip(x[p["c"]], -1.0, 1.0)
        if "s" in p:
            c = np.where(x[p["s"]] > 0.5, c, 0.0)
        c = np.where(np.abs(c) > NONZERO_TOL, c, 0.0)
        d = c.size
        # move the threshold into the strictness margin so exact evaluation agrees
        t = float(np.clip(x[p["t"]] - p["eps"] / 2, -d, d))
        return LinearClassifierSpec(tuple(float(v) for v in c), t, p["eps"], p["sigma"], ds.feature_names)
    u = np.round(x[p["u"]]).astype(int)
    clauses = tuple(tuple(int(j) for j in np.flatnonzero(u[k])) for k in range(p["clauses"]))
    return DnfSpec(clauses, ds.d, p["negations"], ds.feature_names)


# --- fairness cuts --------------------------------------------------------

@dataclass
class FairnessCut:
    kind: Measure
    members: np.ndarray
    direction: int
    gamma: float
    subgroup: Optional[object] = None
    value: float = math.nan
    iteration: int = 0
    tag: str = ""

    def to_json(self, ds) -> dict:
        return {"kind": self.kind.value, "direction": self.direction, "gamma": self.gamma,
                "value": self.value, "iteration": self.iteration, "size": int(ds.weights[self.members].sum()),
                "subgroup": None if self.subgroup is None else to_json(self.subgroup, ds),
                "description": None if self.subgroup is None else describe(self.subgroup, ds)}


def _install_sd_aux(master: Master) -> SdCutAux:
    model, yhat, w = master.model, master.yhat, master.w
    G = master.groups
    plus = model.add_vars("p_plus", G, "continuous", 0.0, 1.0)
    minus = model.add_vars("p_minus", G, "continuous", 0.0, 1.0)
    ref_plus = model.add_var("p_ref_plus", "continuous", 0.0, 1.0)
    ref_minus = model.add_var("p_ref_minus", "continuous", 0.0, 1.0)
    for g in range(G):
        # merged groups carry weight w_g, so each p is w_g times the reference
        wg = float(w[g])
        model.add_constraint({int(plus[g]): 1.0, int(yhat[g]): -wg}, "<=", 0.0, f"pp_on_{g}")
        model.add_constraint({int(plus[g]): 1.0, ref_plus: -wg}, "<=", 0.0, f"pp_ref_{g}")
        model.add_constraint({int(plus[g]): 1.0, ref_plus: -wg, int(yhat[g]): -wg}, ">=", -wg, f"pp_eq_{g}")
        model.add_constraint({int(minus[g]): 1.0, int(yhat[g]): wg}, "<=", wg, f"pm_on_{g}")
        model.add_constraint({int(minus[g]): 1.0, ref_minus: -wg}, "<=", 0.0, f"pm_ref_{g}")
        model.add_constraint({int(minus[g]): 1.0, ref_minus: -wg, int(yhat[g]): wg}, ">=", 0.0, f"pm_eq_{g}")
    model.add_constraint((plus, 1.0), "=", 1.0, "pp_sum")
    model.add_constraint((minus, 1.0), "=", 1.0, "pm_sum")
    master.sd_aux = SdCutAux(plus, minus, ref_plus, ref_minus)
    return master.sd_aux


def cut_coefficients(cut: FairnessCut, master: Master) -> np.ndarray:
    """Coefficients over the group prediction variables (SPSF/FPSF cuts)."""
    ds = master.ds
    total = float(ds.total_weight)
    member_w = master.group_sums(ds.weights * cut.members)
    if cut.kind is Measure.SPSF:
        coef = master.w * float(member_w.sum()) / total ** 2 - member_w / total
    else:
        neg = ds.labels == 0
        s0 = master.group_sums(ds.weights * (cut.members & neg))
        if s0.sum() == 0:
            raise VacuousCut("subgroup has no y = 0 rows")
        coef = master.w0 * float(s0.sum()) / (total * master.w0.sum()) - s0 / total
    return cut.direction * coef


def render_cut(cut: FairnessCut, master: Master) -> int:
    """Add ``cut`` to the master and return the constraint's position."""
    if cut.direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    model = master.model
    tag = cut.tag or f"cut_{len(master.cut_rows)}_{cut.kind.value.lower()}"
    cut.tag = tag
    rhs = cut.gamma - CUT_MARGIN
    if cut.kind is Measure.SD:
        aux = master.sd_aux or _install_sd_aux(master)
        inside = master.group_sums(cut.members.astype(float)) > 0
        idx = np.concatenate([aux.p_plus[inside], aux.p_minus[inside]])
        coef = cut.direction * np.concatenate([np.ones(inside.sum()), -np.ones(inside.sum())])
        master.cut_rows.append(None)
        return model.add_constraint((idx, coef), "<=", rhs, tag)
    coef = cut_coefficients(cut, master)
    master.cut_rows.append((coef, rhs))
    return model.add_constraint((master.yhat, coef), "<=", rhs, tag)


# --- oracle ---------------------------------------------------------------

@dataclass
class OracleOutcome:
    subgroup: Optional[object]
    value: float
    raw_signed: float
    certified: bool
    status: str
    elapsed: float = 0.0


def _relevant_rates(ds, yhat, kind: Measure) -> tuple:
    rows = ds.labels == 0 if kind is Measure.FPSF else np.ones(ds.n, dtype=bool)
    pos = float(ds.weights[rows & (yhat.values == 1)].sum())
    neg = float(ds.weights[rows & (yhat.values == 0)].sum())
    return pos, neg


def run_oracle(ds, yhat, cfg: TrainConfig, time_limit: Optional[float] = None) -> OracleOutcome:
    """Look for a subgroup whose ``cfg.cut_kind`` value exceeds gamma."""
    start = time.monotonic()
    kind = Measure.parse(cfg.cut_kind)
    pred = as_prediction(ds, yhat)
    limit = cfg.oracle_time_limit if time_limit is None else time_limit
    pos, neg = _relevant_rates(ds, pred, kind)
    if pos == 0 or neg == 0 or math.isinf(cfg.gamma):
        # constant on the audited rows: every SPSF/FPSF value is 0
        return OracleOutcome(None, 0.0, 0.0, True, "Degenerate", time.monotonic() - start)
    if cfg.oracle_kind == "sd-proxy":
        negatives = kind is Measure.FPSF
        obj = make_objective(ds, pred, Measure.SD, negatives_only=negatives)
        threshold = gamma_bound_for_msd(cfg.gamma, pos / (pos + neg), p_y0(ds) if negatives else None)
    else:
        obj = make_objective(ds, pred, kind)
        threshold = cfg.gamma
    if cfg.subgroup_class == "linear":
        try:
            warm = logistic_warm_start(ds, pred.values == 1, pred.values == 0, obj.weights)
        except EmptyConditional:
            warm = None
        res = audit_linear_milp(ds, pred, obj, warm, limit)
    else:
        res = audit_conjunction_bnb(ds, pred, obj, limit)
    certified = res.status in (Status.OPTIMAL, Status.INFEASIBLE)
    elapsed = time.monotonic() - start
    if res.found and res.objective_value > threshold + VIOLATION_TOL:
        rep = evaluate_measure(ds, pred, res.subgroup, kind)
        if rep.value > cfg.gamma + VIOLATION_TOL:
            return OracleOutcome(res.subgroup, rep.value, rep.raw_signed, certified, res.status.value, elapsed)
    return OracleOutcome(None, res.objective_value if res.found else 0.0, 0.0, certified,
                         res.status.value, elapsed)


# --- training loop --------------------------------------------------------

@dataclass
class TrainResult:
    model: object
    balanced_error: float
    cuts: list
    iterations: int
    status: TrainStatus
    history: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    master_status: str = ""
    objective: float = math.nan

    def to_json(self, ds, test=None, timings: bool = True) -> dict:
        metrics = {"train": evaluate(self.model, ds)}
        if test is not None:
            metrics["test"] = evaluate(self.model, test)
        out = {"model": self.model.to_json(), "description": self.model.describe(),
               "cuts": [c.to_json(ds) for c in self.cuts], "metrics": metrics,
               "status": self.status.value, "master_status": self.master_status,
               "iterations": self.iterations, "objective": self.objective}
        if timings:
            out["timings"] = dict(self.timings)
        return out


def balanced_error(ds, yhat) -> float:
    """Mean of the false positive and false negative rates."""
    yhat = np.asarray(yhat).reshape(-1)
    n0, n1 = ds.class_counts
    fp = ds.weights[(ds.labels == 0) & (yhat == 1)].sum()
    fn = ds.weights[(ds.labels == 1) & (yhat == 0)].sum()
    fpr = fp / n0 if n0 else 0.0
    fnr = fn / n1 if n1 else 0.0
    return float(0.5 * (fpr + fnr))


def _warm_candidates(master: Master, previous: Optional[np.ndarray]) -> list:
    """Group-level prediction vectors worth trying as a warm start."""
    G = master.groups
    cands = [np.ones(G), np.zeros(G)]
    if previous is not None:
        cands.append(previous)
    if master.kind == "linear" and G > 1:
        X = master.group_x
        y = np.where(master.w1 / master.w1.sum() > master.w0 / master.w0.sum(), 1.0, 0.0)
        sw = master.w0 / master.w0.sum() + master.w1 / master.w1.sum()
        coef, b = np.zeros(X.shape[1]), 0.0
        for _ in range(300):
            z = np.clip(X @ coef + b, -30, 30)
            r = (1.0 / (1.0 + np.exp(-z)) - y) * sw
            coef -= 0.5 * (X.T @ r + 1e-3 * coef)
            b -= 0.5 * r.sum()
        score = X @ coef
        for level in np.unique(score):
            cands.append((score >= level).astype(float))
    return cands


def _pick_warm(master: Master, previous: Optional[np.ndarray]) -> dict:
    n0, n1 = master.w0.sum(), master.w1.sum()
    best, best_err = None, math.inf
    for cand in _warm_candidates(master, previous):
        if any(row is not None and row[0] @ cand > row[1] for row in master.cut_rows):
            continue
        err = float(master.w0 @ cand / n0 + master.w1 @ (1 - cand) / n1)
        if err < best_err - 1e-15:
            best, best_err = cand, err
    if best is None:
        return {}
    names = master.model.variables
    if master.kind == "linear":
        warm = {names[int(v)].name: float(best[g]) for g, v in enumerate(master.yhat)}
        for v in master.params.get("s", ()):
            warm[names[int(v)].name] = 1.0
        return warm
    # a DNF warm start only fixes literals; the all-ones vector is the empty clause
    if np.all(best == 1):
        return {names[int(v)].name: 0.0 for v in master.params["u"].reshape(-1)}
    return {}


def train(ds, cfg: Optional[TrainConfig] = None) -> TrainResult:
    """Solve the master, audit the incumbent, add a cut, repeat."""
    cfg = cfg or TrainConfig()
    cfg.validate()
    kind = Measure.parse(cfg.cut_kind)
    start = time.monotonic()
    deadline = start + cfg.total_time_limit if cfg.total_time_limit is not None else math.inf
    master = build_master(ds, cfg)
    cuts, history = [], []
    timings = {"master_s": 0.0, "oracle_s": 0.0, "master_nodes": 0}
    spec, status, master_status, objective = None, None, "", math.nan
    previous = None
    iteration = 0
    while True:
        iteration += 1
        remaining = deadline - time.monotonic()
        limit = cfg.master_time_limit if math.isinf(remaining) else max(0.0, min(cfg.master_time_limit, remaining))
        t0 = time.monotonic()
        warm = _pick_warm(master, previous) if cfg.solver == "builtin" else None
        sol = solve_with(master.model, cfg.solver, warm_start=warm, time_limit=limit)
        timings["master_s"] += time.monotonic() - t0
        timings["master_nodes"] += sol.nodes
        master_status = sol.status.value
        if not sol.has_incumbent:
            status = TrainStatus.NO_INCUMBENT
            break
        spec = extract_model(master, sol.x)
        objective = float(sol.objective_value)
        yhat = spec.predict(ds.features)
        group_pred = np.round(sol.x[master.yhat])
        if not np.array_equal(group_pred[master.group_of_row], yhat):
            log.warning("recovered classifier disagrees with master predictions on %d rows",
                        int(np.sum(group_pred[master.group_of_row] != yhat)))
        previous = np.zeros(master.groups)
        previous[master.group_of_row] = yhat
        remaining = deadline - time.monotonic()
        olimit = cfg.oracle_time_limit if math.isinf(remaining) else max(0.0, min(cfg.oracle_time_limit, remaining))
        out = run_oracle(ds, yhat, cfg, olimit)
        timings["oracle_s"] += out.elapsed
        history.append({"iteration": iteration, "objective": objective,
                        "balanced_error": balanced_error(ds, yhat),
                        "accuracy": _accuracy(ds, yhat), "violation": out.value, "cuts": len(cuts),
                        "master_status": master_status, "oracle_status": out.status})
        if out.subgroup is None:
            if not out.certified:
                status = TrainStatus.FAIR_UNPROVEN
            elif sol.status is Status.OPTIMAL:
                status = TrainStatus.FAIR_OPTIMAL
            else:
                status = TrainStatus.FAIR_FEASIBLE
            break
        if len(cuts) >= cfg.max_cuts:
            status = TrainStatus.MAX_CUTS
            break
        if time.monotonic() >= deadline:
            status = TrainStatus.TIME_LIMIT
            break
        members = membership(out.subgroup, ds).astype(bool)
        cut = FairnessCut(kind, members, 1 if out.raw_signed >= 0 else -1, cfg.gamma, out.subgroup,
                          out.value, iteration)
        render_cut(cut, master)
        cuts.append(cut)
    timings["total_s"] = time.monotonic() - start
    if spec is None:
        return TrainResult(None, math.nan, cuts, iteration, status, history, timings, master_status)
    yhat = spec.predict(ds.features)
    return TrainResult(spec, balanced_error(ds, yhat), cuts, iteration, status, history, timings,
                       master_status, objective)


# --- evaluation -----------------------------------------------------------

def _accuracy(ds, yhat) -> float:
    return float(ds.weights[np.asarray(yhat) == ds.labels].sum() / ds.total_weight)


def _f1(ds, yhat) -> float:
    yhat = np.asarray(yhat)
    tp = ds.weights[(yhat == 1) & (ds.labels == 1)].sum()
    fp = ds.weights[(yhat == 1) & (ds.labels == 0)].sum()
    fn = ds.weights[(yhat == 0) & (ds.labels == 1)].sum()
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def worst_violation(ds, yhat, kind, time_limit: float = ORACLE_TIME_LIMIT) -> tuple:
    """``(value, subgroup)`` of the most unfair conjunction; 0 for degenerate predictions."""
    kind = Measure.parse(kind)
    pred = as_prediction(ds, yhat)
    pos, neg = _relevant_rates(ds, pred, kind)
    if pos == 0 or neg == 0 or ds.m == 0:
        return 0.0, None
    try:
        obj = make_objective(ds, pred, kind)
    except (EmptyConditional, DegenerateClassifier):
        return 0.0, None
    res = audit_conjunction_bnb(ds, pred, obj, time_limit)
    return (res.objective_value, res.subgroup) if res.found else (0.0, None)


def evaluate(spec, ds, time_limit: float = ORACLE_TIME_LIMIT) -> dict:
    """Deterministic quality and worst-case fairness metrics of ``spec`` on ``ds``."""
    yhat = spec.predict(ds.features)
    out = {"balanced_error": balanced_error(ds, yhat), "accuracy": _accuracy(ds, yhat),
           "f1": _f1(ds, yhat), "positive_rate": float(ds.weights[yhat == 1].sum() / ds.total_weight),
           "worst_violation": {}, "worst_subgroup": {}}
    for kind in Measure:
        if kind is Measure.FPSF and ds.class_counts[0] == 0:
            out["worst_violation"][kind.value.lower()] = 0.0
            out["worst_subgroup"][kind.value.lower()] = None
            continue
        value, s = worst_violation(ds, yhat, kind, time_limit)
        out["worst_violation"][kind.value.lower()] = value
        out["worst_subgroup"][kind.value.lower()] = None if s is None else describe(s, ds)
    return out
