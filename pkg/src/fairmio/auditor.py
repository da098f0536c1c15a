"""Find the most unfair protected subgroup for a fixed prediction vector.

Every objective is ``|sum_{i in S} a_i|`` for per-row signed coefficients
``a`` (see :mod:`fairmio.metrics`). Rows sharing a protected vector are
merged before searching since only the subgroup sum matters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import DegenerateClassifier, EmptyConditional, NoNegativeClass
from .metrics import (
    Measure,
    as_prediction,
    compress,
    conditional_sd_weights,
    evaluate_measure,
    fpsf_weights,
    gamma_bound_for_msd,
    p_y0,
    spsf_weights,
)
from .milp import MilpModel, Status, solve
from .subgroups import (
    DEFAULT_EPS,
    Conjunction,
    LinearThresholdGroup,
    membership,
    membership_matrix,
    to_json,
)

DETECT_TIME_LIMIT = 600.0
ORACLE_TIME_LIMIT = 300.0
STRICT_TOL = 1e-9


@dataclass
class AuditObjective:
    """Signed per-row coefficients plus the big-M valid for them.

    ``big_m`` must be at least twice the largest reachable ``|sum a_i|``.
    """

    kind: Measure
    weights: np.ndarray
    big_m: float
    gamma_floor: Optional[float] = None
    feasibility: bool = False
    n_min: float = 0.0
    negatives_only: bool = False


def make_objective(ds, yhat, kind, gamma_floor: Optional[float] = None, feasibility: bool = False,
                   n_min: float = 0.0, negatives_only: bool = False) -> AuditObjective:
    """Build the objective for ``kind``; SD compares predicted positives to negatives.

    With ``negatives_only`` the SD objective is taken on the y=0 rows, the
    form used to audit FPSF through SD.
    """
    kind = Measure.parse(kind)
    yhat = as_prediction(ds, yhat)
    total = ds.total_weight
    if kind is Measure.SD:
        weights = conditional_sd_weights(ds, yhat, negatives_only)
        big_m = 2.0
    elif kind is Measure.SPSF:
        weights = spsf_weights(ds, yhat)
        big_m = min(2.0, 2.0 * yhat.pos_mass * yhat.neg_mass / total ** 2)
    else:
        weights = fpsf_weights(ds, yhat)
        neg = ds.labels == 0
        d0 = ds.weights[neg].sum()
        d0_pos = ds.weights[neg & (yhat.values == 1)].sum()
        big_m = min(2.0, 2.0 * d0_pos * (d0 - d0_pos) / (total * d0))
    return AuditObjective(kind, weights, float(big_m), gamma_floor, feasibility, n_min, negatives_only)


@dataclass
class AuditResult:
    subgroup: Optional[object]
    objective_value: float
    sign_branch: int
    status: Status
    measure_values: dict = field(default_factory=dict)
    bound: float = math.nan
    elapsed: float = 0.0
    kind: Measure = Measure.SD
    nodes: int = 0
    warm_start_value: Optional[float] = None

    @property
    def found(self) -> bool:
        return self.subgroup is not None

    def to_json(self, ds) -> dict:
        return {
            "subgroup": None if self.subgroup is None else to_json(self.subgroup, ds),
            "objective": self.objective_value,
            "kind": self.kind.value,
            "status": self.status.value,
            "measures": {k.lower(): v for k, v in self.measure_values.items()},
            "bound": self.bound,
            "elapsed_s": self.elapsed,
        }


def _all_measures(ds, yhat, s) -> dict:
    out = {}
    for kind in Measure:
        try:
            out[kind.value] = evaluate_measure(ds, yhat, s, kind).value
        except (EmptyConditional, NoNegativeClass):
            out[kind.value] = None
    return out


def _finish(ds, yhat, obj, s, status, bound, start, nodes=0, warm=None) -> AuditResult:
    if s is None:
        return AuditResult(None, math.nan, 0, status, {}, bound, time.monotonic() - start, obj.kind,
                           nodes, warm)
    raw = float(obj.weights @ membership(s, ds))
    return AuditResult(s, abs(raw), 0 if raw >= 0 else 1, status, _all_measures(ds, yhat, s), bound,
                       time.monotonic() - start, obj.kind, nodes, warm)


def _check_preconditions(ds, yhat, obj: AuditObjective) -> None:
    if ds.m == 0:
        raise ValueError("dataset has no protected attributes")
    if obj.kind is Measure.SD:
        return  # weights construction already checked both parts
    yhat = as_prediction(ds, yhat)
    rows = ds.labels == 0 if obj.kind is Measure.FPSF else np.ones(ds.n, dtype=bool)
    pos = ds.weights[rows & (yhat.values == 1)].sum()
    neg = ds.weights[rows & (yhat.values == 0)].sum()
    if pos == 0 or neg == 0:
        raise EmptyConditional(f"{obj.kind.value} audit needs both prediction classes")


# --- conjunctions: specialized branch-and-bound ---------------------------

def _search_order(ds, codes, a):
    cards = ds.cardinalities
    attr_order = sorted(range(len(cards)), key=lambda k: (-cards[k], k))
    value_order = []
    for k in attr_order:
        mass = np.zeros(cards[k])
        np.add.at(mass, codes[:, k], np.maximum(a, 0.0))
        value_order.append(sorted(range(cards[k]), key=lambda v: (-mass[v], v)))
    return attr_order, value_order


def audit_conjunction_bnb(ds, yhat, obj: AuditObjective, time_limit: float = DETECT_TIME_LIMIT) -> AuditResult:
    """Exact conjunction search maximizing ``|sum a|`` over both sign branches.

    Adding a literal only removes rows, so the sum of positive coefficients
    among a node's members bounds every descendant.
    """
    start = time.monotonic()
    _check_preconditions(ds, yhat, obj)
    codes, merged = compress(ds.codes, np.column_stack([obj.weights, ds.weights]))
    counts = merged[:, 1]
    deadline = start + time_limit
    threshold = None if obj.gamma_floor is None else obj.gamma_floor
    best = (-math.inf, None, 0)
    done, nodes, bound = True, 0, -math.inf
    for branch, a in enumerate((merged[:, 0], -merged[:, 0])):
        attr_order, value_order = _search_order(ds, codes, a)
        value, lits, n_nodes, completed = kernels.best_conjunction(
            codes, a, attr_order, value_order, [len(v) for v in value_order],
            deadline, threshold, counts, obj.n_min)
        nodes += n_nodes
        done &= completed
        bound = max(bound, value if completed else float(np.maximum(a, 0).sum()))
        if lits and value > best[0]:
            best = (value, lits, branch)
        if threshold is not None and lits and value > threshold:
            break
    if best[1] is None:
        status = Status.INFEASIBLE if done else Status.TIME_LIMIT
        return _finish(ds, yhat, obj, None, status, bound, start, nodes)
    groups = ds.attribute_groups
    s = Conjunction(tuple(groups[attr][1] + v for attr, v in best[1]))
    if threshold is not None:
        status = Status.FEASIBLE if best[0] > threshold else (Status.INFEASIBLE if done else Status.TIME_LIMIT)
        if best[0] <= threshold:
            return _finish(ds, yhat, obj, None, status, bound, start, nodes)
    else:
        status = Status.OPTIMAL if done else Status.TIME_LIMIT
    return _finish(ds, yhat, obj, s, status, bound, start, nodes)


# --- conjunctions: MILP ---------------------------------------------------

def _objective_block(model: MilpModel, member_vars, a: np.ndarray, obj: AuditObjective) -> tuple:
    """Add ``o <= |sum a_i y_i|`` through the sign binary ``b``."""
    lower = 0.0 if obj.gamma_floor is None else obj.gamma_floor + STRICT_TOL
    o = model.add_var("o", "continuous", lower, max(obj.big_m, lower))
    b = model.add_var("b", "binary")
    nz = np.flatnonzero(a)
    idx = np.concatenate([[o], member_vars[nz], [b]])
    model.add_constraint((idx, np.concatenate([[1.0], -a[nz], [-obj.big_m]])), "<=", 0.0, "abs_pos")
    model.add_constraint((idx, np.concatenate([[1.0], a[nz], [obj.big_m]])), "<=", obj.big_m, "abs_neg")
    if obj.feasibility and obj.gamma_floor is not None:
        model.set_objective({}, "max")
    else:
        model.set_objective({o: 1.0}, "max")
    return o, b


def _min_size(model: MilpModel, member_vars, counts, n_min: float) -> None:
    if n_min > 0:
        model.add_constraint((member_vars, counts), ">=", n_min, "min_size")


def build_conjunction_model(ds, obj: AuditObjective, codes, merged) -> tuple:
    """Conjunction-finding MILP over merged rows: binary literal choices ``u``
    and continuous memberships that the linking constraints force to 0/1."""
    a, counts = merged[:, 0], merged[:, 1]
    n, m = codes.shape[0], ds.m
    x = np.zeros((n, m), dtype=np.uint8)
    for k, (_, lo, _) in enumerate(ds.attribute_groups):
        x[np.arange(n), lo + codes[:, k]] = 1
    model = MilpModel("audit_conjunction")
    u = model.add_vars("u", m, "binary")
    y = model.add_vars("y", n, "continuous", 0.0, 1.0)
    for i in range(n):
        absent = np.flatnonzero(x[i] == 0)
        for j in absent:
            model.add_constraint({int(y[i]): 1.0, int(u[j]): 1.0}, "<=", 1.0, f"out_{i}_{j}")
        model.add_constraint((np.concatenate([[y[i]], u[absent]]), 1.0), ">=", 1.0, f"in_{i}")
    _min_size(model, y, counts, obj.n_min)
    model.add_constraint((u, 1.0), ">=", 1.0, "nonempty")
    for name, lo, hi in ds.attribute_groups:
        if hi - lo > 1:
            model.add_constraint((u[lo:hi], 1.0), "<=", 1.0, f"one_{len(model.constraints)}")
    _objective_block(model, y, a, obj)
    return model, u


def audit_conjunction_milp(ds, yhat, obj: AuditObjective, time_limit: float = DETECT_TIME_LIMIT) -> AuditResult:
    start = time.monotonic()
    _check_preconditions(ds, yhat, obj)
    codes, merged = compress(ds.codes, np.column_stack([obj.weights, ds.weights]))
    model, u = build_conjunction_model(ds, obj, codes, merged)
    sol = solve(model, time_limit=time_limit)
    if not sol.has_incumbent:
        return _finish(ds, yhat, obj, None, sol.status, sol.best_bound, start, sol.nodes)
    s = Conjunction(tuple(int(j) for j in np.flatnonzero(sol.x[u] > 0.5)))
    status = Status.FEASIBLE if obj.feasibility and sol.status is Status.OPTIMAL else sol.status
    return _finish(ds, yhat, obj, s, status, sol.best_bound, start, sol.nodes)


# --- linear subgroups -----------------------------------------------------

def _unique_protected(ds, obj: AuditObjective) -> tuple:
    uniq, inverse = np.unique(ds.protected, axis=0, return_inverse=True)
    merged = np.zeros((uniq.shape[0], 2))
    np.add.at(merged, inverse.reshape(-1), np.column_stack([obj.weights, ds.weights]))
    return uniq.astype(float), merged


def logistic_warm_start(ds, part1, part2, weights: Optional[np.ndarray] = None,
                        epochs: int = 500, step: float = 0.1, l2: float = 1e-3) -> LinearThresholdGroup:
    """Linear subgroup from a logistic separator of ``part1`` against ``part2``.

    The learned direction is scaled so its largest coefficient is 1 and the
    threshold is the best cut along it for the objective ``weights``
    (default: SD between the two parts).
    """
    from .metrics import _mask, sd_weights

    m1, m2 = _mask(ds, part1), _mask(ds, part2)
    if not m1.any() or not m2.any():
        raise EmptyConditional("both parts must be nonempty")
    if weights is None:
        weights = sd_weights(ds, m1, m2)
    X = ds.protected.astype(float)
    Xs = np.vstack([X[m1], X[m2]])
    ys = np.concatenate([np.ones(m1.sum()), np.zeros(m2.sum())])
    ws = np.concatenate([ds.weights[m1], ds.weights[m2]]).astype(float)
    ws /= ws.sum()
    coef = np.zeros(ds.m)
    intercept = 0.0
    for _ in range(epochs):
        z = np.clip(Xs @ coef + intercept, -30, 30)
        resid = (1.0 / (1.0 + np.exp(-z)) - ys) * ws
        coef -= step * (Xs.T @ resid + l2 * coef)
        intercept -= step * resid.sum()
    scale = np.abs(coef).max()
    if scale > 0:
        coef = coef / scale
    proj = X @ coef
    levels = np.unique(proj)[::-1]
    best_val, best_t = 0.0, float(levels[0]) + 0.5
    for k, level in enumerate(levels):
        val = abs(float(weights[proj >= level].sum()))
        if val > best_val + 1e-15:
            lower = levels[k + 1] if k + 1 < len(levels) else level - 1.0
            best_val, best_t = val, 0.5 * (level + lower)
    best_t = float(np.clip(best_t, -ds.m, ds.m))
    return LinearThresholdGroup(tuple(coef), best_t)


def audit_linear_milp(ds, yhat, obj: AuditObjective, warm: Optional[LinearThresholdGroup] = None,
                      time_limit: float = DETECT_TIME_LIMIT, eps: float = DEFAULT_EPS) -> AuditResult:
    """Best linear-threshold subgroup over the protected one-hot columns."""
    start = time.monotonic()
    _check_preconditions(ds, yhat, obj)
    X, merged = _unique_protected(ds, obj)
    a, counts = merged[:, 0], merged[:, 1]
    n, m = X.shape
    big = 2.0 * m
    model = MilpModel("audit_linear")
    c = model.add_vars("c", m, "continuous", -1.0, 1.0)
    t = model.add_var("t", "continuous", -float(m), float(m))
    y = model.add_vars("y", n, "binary")
    for i in range(n):
        nz = np.flatnonzero(X[i])
        idx = np.concatenate([c[nz], [t, y[i]]])
        coef = np.concatenate([X[i, nz], [-1.0, -big]])
        model.add_constraint((idx, coef), ">=", -big, f"lin_in_{i}")
        model.add_constraint((idx, coef), "<=", -eps, f"lin_out_{i}")
    _min_size(model, y, counts, obj.n_min)
    _, b = _objective_block(model, y, a, obj)
    warm_start = None
    if warm is not None:
        members = membership_matrix(warm, X.astype(np.uint8))
        warm_start = {model.variables[int(y[i])].name: float(members[i]) for i in range(n)}
        warm_start["b"] = 0.0 if float(a @ members) >= 0 else 1.0
    sol = solve(model, warm_start=warm_start, time_limit=time_limit)
    warm_value = None if sol.warm_start_objective is None else float(sol.warm_start_objective)
    if not sol.has_incumbent:
        return _finish(ds, yhat, obj, None, sol.status, sol.best_bound, start, sol.nodes, warm_value)
    # shift the threshold into the margin so exact evaluation reproduces the solver's memberships
    coef = np.clip(sol.x[c], -1.0, 1.0)
    s = LinearThresholdGroup(tuple(coef), float(np.clip(sol.x[t] - eps / 2, -m, m)), eps)
    status = Status.FEASIBLE if obj.feasibility and sol.status is Status.OPTIMAL else sol.status
    return _finish(ds, yhat, obj, s, status, sol.best_bound, start, sol.nodes, warm_value)


# --- threshold checks -----------------------------------------------------

@dataclass
class GammaCheck:
    satisfied: Optional[bool]
    witness: Optional[object]
    status: str
    threshold: float
    value: Optional[float] = None

    def to_json(self, ds) -> dict:
        return {"satisfied": self.satisfied, "status": self.status, "threshold": self.threshold,
                "value": self.value,
                "witness": None if self.witness is None else to_json(self.witness, ds)}


def check_gamma(ds, yhat, kind, gamma: float, subgroup_class: str = "conjunction",
                time_limit: float = ORACLE_TIME_LIMIT, via_sd: bool = False,
                method: str = "milp") -> GammaCheck:
    """Decide whether every subgroup's measure is at most ``gamma``.

    Runs as a feasibility search for a subgroup with value above the
    threshold. ``via_sd`` audits SPSF/FPSF through SD with the converted
    threshold. ``satisfied`` is None when the time limit hits first.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    kind = Measure.parse(kind)
    yhat = as_prediction(ds, yhat)
    if via_sd and kind is not Measure.SD:
        negatives = kind is Measure.FPSF
        rows = ds.labels == 0 if negatives else np.ones(ds.n, dtype=bool)
        if negatives and not rows.any():
            raise NoNegativeClass("no rows with y = 0")
        pos = ds.weights[rows & (yhat.values == 1)].sum()
        total = ds.weights[rows].sum()
        try:
            threshold = gamma_bound_for_msd(gamma, pos / total, p_y0(ds) if negatives else None)
        except DegenerateClassifier:
            return GammaCheck(True, None, "Degenerate", gamma, 0.0)
        obj = make_objective(ds, yhat, Measure.SD, threshold, True, negatives_only=negatives)
    else:
        threshold = gamma
        obj = make_objective(ds, yhat, kind, threshold, True)
    if threshold >= obj.big_m / 2 or not np.any(obj.weights):
        return GammaCheck(True, None, "BoundExceeded", threshold, None)
    if subgroup_class == "linear":
        res = audit_linear_milp(ds, yhat, obj, time_limit=time_limit)
    elif method == "bnb":
        res = audit_conjunction_bnb(ds, yhat, obj, time_limit)
    else:
        res = audit_conjunction_milp(ds, yhat, obj, time_limit)
    if res.found and res.objective_value <= threshold:
        # the floor o >= threshold is only enforced to the feasibility tolerance,
        # so a spurious witness is settled by maximizing instead
        obj.gamma_floor, obj.feasibility = None, False
        if subgroup_class == "linear":
            res = audit_linear_milp(ds, yhat, obj, time_limit=time_limit)
        else:
            res = audit_conjunction_milp(ds, yhat, obj, time_limit)
        if res.status is Status.OPTIMAL and res.objective_value <= threshold:
            return GammaCheck(True, None, "Satisfied", threshold, res.objective_value)
    if res.found and res.objective_value > threshold:
        return GammaCheck(False, res.subgroup, "Violated", threshold, res.objective_value)
    if res.status is Status.INFEASIBLE or (res.status is Status.OPTIMAL and not res.found):
        return GammaCheck(True, None, "Satisfied", threshold, None)
    return GammaCheck(None, None, "Unknown", threshold, None)
