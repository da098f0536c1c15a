"""Mixed-binary linear programs: model container, branch-and-bound, LP files.

The solver is a plain best-bound branch-and-bound over the binary variables.
Each node's linear relaxation is handed to HiGHS through
:func:`scipy.optimize.linprog`; branching only ever tightens variable bounds.
"""

from __future__ import annotations

import heapq
import logging
import math
import os
import re
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import InfeasiblePoint, IoFailure, MalformedModel, Unbounded, UnknownVariable

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
INT_TOL = 1e-6
SENSES = ("<=", ">=", "=")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimit"


@dataclass
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass
class Constraint:
    index: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float
    tag: str


class MilpModel:
    """Variables, linear constraints and a linear objective.

    Variables are referred to by the integer returned from :meth:`add_var`;
    linear terms are ``{index: coefficient}`` mappings or ``(indices, coefs)``
    pairs.
    """

    def __init__(self, name: str = "model", time_limit: Optional[float] = None,
                 gap_tolerance: float = 1e-9):
        self.name = name
        self.time_limit = time_limit
        self.gap_tolerance = gap_tolerance
        self.variables: list = []
        self.constraints: list = []
        self._names: dict = {}
        self._tags: set = set()
        self.sense = "min"
        self.obj_index = np.zeros(0, dtype=np.int64)
        self.obj_coef = np.zeros(0)
        self.obj_constant = 0.0

    # -- building ----------------------------------------------------------
    def add_var(self, name: str, kind: str = "continuous", lower: float = 0.0,
                upper: Optional[float] = None) -> int:
        if not _NAME_RE.match(name):
            raise MalformedModel(f"variable name {name!r} is not LP-safe")
        if name in self._names:
            raise MalformedModel(f"duplicate variable name {name!r}")
        if kind == "binary":
            lower, upper = max(0.0, lower), 1.0 if upper is None else min(1.0, upper)
        elif kind != "continuous":
            raise MalformedModel(f"unknown variable kind {kind!r}")
        upper = math.inf if upper is None else float(upper)
        lower = float(lower)
        if lower > upper or math.isnan(lower) or math.isnan(upper):
            raise MalformedModel(f"bounds of {name!r} are inconsistent: [{lower}, {upper}]")
        self._names[name] = len(self.variables)
        self.variables.append(Variable(name, kind, lower, upper))
        return len(self.variables) - 1

    def add_vars(self, prefix: str, count: int, kind: str = "continuous", lower: float = 0.0,
                 upper: Optional[float] = None) -> np.ndarray:
        return np.array([self.add_var(f"{prefix}_{i}", kind, lower, upper) for i in range(count)],
                        dtype=np.int64)

    @staticmethod
    def _terms(terms) -> tuple:
        if isinstance(terms, Mapping):
            index = np.fromiter(terms.keys(), dtype=np.int64, count=len(terms))
            coef = np.fromiter(terms.values(), dtype=float, count=len(terms))
        else:
            index, coef = terms
            index = np.asarray(index, dtype=np.int64).reshape(-1)
            coef = np.broadcast_to(np.asarray(coef, dtype=float), index.shape).copy()
        if index.size:
            # merge repeated indices
            uniq, inv = np.unique(index, return_inverse=True)
            if uniq.size != index.size:
                merged = np.zeros(uniq.size)
                np.add.at(merged, inv, coef)
                index, coef = uniq, merged
        return index, coef

    def add_constraint(self, terms, sense: str, rhs: float, tag: Optional[str] = None) -> int:
        if sense not in SENSES:
            raise MalformedModel(f"unknown constraint sense {sense!r}")
        index, coef = self._terms(terms)
        if not np.all(np.isfinite(coef)) or not math.isfinite(rhs):
            raise MalformedModel(f"non-finite data in constraint {tag!r}")
        if index.size and (index.min() < 0 or index.max() >= len(self.variables)):
            raise MalformedModel(f"constraint {tag!r} references an unknown variable")
        tag = tag or f"c{len(self.constraints)}"
        if not _NAME_RE.match(tag):
            raise MalformedModel(f"constraint tag {tag!r} is not LP-safe")
        if tag in self._tags:
            raise MalformedModel(f"duplicate constraint tag {tag!r}")
        self._tags.add(tag)
        self.constraints.append(Constraint(index, coef, sense, float(rhs), tag))
        return len(self.constraints) - 1

    def set_objective(self, terms, sense: str = "min", constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise MalformedModel(f"objective sense must be min or max, got {sense!r}")
        self.obj_index, self.obj_coef = self._terms(terms)
        self.sense = sense
        self.obj_constant = float(constant)

    # -- queries -----------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def var_index(self, name: str) -> int:
        try:
            return self._names[name]
        except KeyError:
            raise UnknownVariable(name) from None

    @property
    def binaries(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind == "binary"], dtype=np.int64)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        np.add.at(c, self.obj_index, self.obj_coef)
        return c

    def objective(self, x: np.ndarray) -> float:
        return float(self.obj_coef @ np.asarray(x)[self.obj_index]) + self.obj_constant

    def bounds(self) -> tuple:
        lb = np.array([v.lower for v in self.variables], dtype=float)
        ub = np.array([v.upper for v in self.variables], dtype=float)
        return lb, ub

    def max_violation(self, x: np.ndarray) -> tuple:
        """Largest bound or constraint violation of ``x`` and where it occurs."""
        x = np.asarray(x, dtype=float)
        worst, where = 0.0, None
        lb, ub = self.bounds()
        for i in range(self.num_vars):
            v = max(lb[i] - x[i], x[i] - ub[i], 0.0)
            if v > worst:
                worst, where = v, f"bound:{self.variables[i].name}"
        for con in self.constraints:
            lhs = float(con.coef @ x[con.index])
            if con.sense == "<=":
                v = lhs - con.rhs
            elif con.sense == ">=":
                v = con.rhs - lhs
            else:
                v = abs(lhs - con.rhs)
            v /= max(1.0, abs(con.rhs))
            if v > worst:
                worst, where = v, con.tag
        return worst, where

    def matrices(self) -> tuple:
        """``(c, A_ub, b_ub, A_eq, b_eq)`` in minimization form (c negated for max)."""
        n = self.num_vars
        ub_rows, ub_cols, ub_vals, b_ub = [], [], [], []
        eq_rows, eq_cols, eq_vals, b_eq = [], [], [], []
        for con in self.constraints:
            if con.sense == "=":
                r = len(b_eq)
                eq_rows.append(np.full(con.index.size, r))
                eq_cols.append(con.index)
                eq_vals.append(con.coef)
                b_eq.append(con.rhs)
            else:
                sign = 1.0 if con.sense == "<=" else -1.0
                r = len(b_ub)
                ub_rows.append(np.full(con.index.size, r))
                ub_cols.append(con.index)
                ub_vals.append(sign * con.coef)
                b_ub.append(sign * con.rhs)

        def build(rows, cols, vals, m):
            if not m:
                return None
            return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                     shape=(m, n))

        c = self.objective_vector()
        if self.sense == "max":
            c = -c
        return (c, build(ub_rows, ub_cols, ub_vals, len(b_ub)), np.array(b_ub),
                build(eq_rows, eq_cols, eq_vals, len(b_eq)), np.array(b_eq))

    def copy(self) -> "MilpModel":
        other = MilpModel(self.name, self.time_limit, self.gap_tolerance)
        other.variables = [Variable(v.name, v.kind, v.lower, v.upper) for v in self.variables]
        other.constraints = list(self.constraints)
        other._names = dict(self._names)
        other._tags = set(self._tags)
        other.sense, other.obj_index, other.obj_coef = self.sense, self.obj_index, self.obj_coef
        other.obj_constant = self.obj_constant
        return other


@dataclass
class MilpSolution:
    status: Status
    values: dict
    objective_value: float
    best_bound: float
    x: Optional[np.ndarray] = None
    nodes: int = 0
    elapsed: float = 0.0
    warm_start_objective: Optional[float] = None
    stats: dict = field(default_factory=dict)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    def __getitem__(self, name: str) -> float:
        return self.values[name]


# --- branch-and-bound -----------------------------------------------------

_LP_ATTEMPTS = (("highs", None), ("highs-ds", {"presolve": False}), ("highs-ipm", None))


class _Relaxation:
    """Cached matrices; solves the LP relaxation under given bounds."""

    def __init__(self, model: MilpModel):
        self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq = model.matrices()
        self.lb, self.ub = model.bounds()
        self.n = model.num_vars
        self.calls = 0
        self.failures = 0

    def solve(self, lb: np.ndarray, ub: np.ndarray) -> tuple:
        """Returns ``(status, x, objective)`` with status in {ok, infeasible, unbounded}."""
        self.calls += 1
        if np.any(lb > ub + 1e-12):
            return "infeasible", None, math.inf
        if self.n == 0:
            return "ok", np.zeros(0), 0.0
        bounds = np.column_stack([lb, ub])
        # HiGHS occasionally ends without a verdict; retry with other algorithms
        for method, options in _LP_ATTEMPTS:
            res = linprog(self.c, A_ub=self.A_ub, b_ub=self.b_ub if self.A_ub is not None else None,
                          A_eq=self.A_eq, b_eq=self.b_eq if self.A_eq is not None else None,
                          bounds=bounds, method=method, options=options)
            if res.status == 0:
                return "ok", res.x, float(res.fun)
            if res.status == 2:
                return "infeasible", None, math.inf
            if res.status == 3:
                return "unbounded", None, -math.inf
        self.failures += 1
        log.warning("LP relaxation ended with status %s (%s); node discarded", res.status, res.message)
        return "infeasible", None, math.inf


def _fractional(x: np.ndarray, binaries: np.ndarray) -> Optional[int]:
    """Most fractional binary (ties: lowest index), or None if integral."""
    if binaries.size == 0:
        return None
    vals = x[binaries]
    frac = np.abs(vals - np.round(vals))
    if frac.max() <= INT_TOL:
        return None
    return int(binaries[np.argmin(np.abs(vals - 0.5))])


def _pure_binary_feasible(model: MilpModel, rel: _Relaxation, x: np.ndarray) -> bool:
    if rel.A_ub is not None and np.any(rel.A_ub @ x - rel.b_ub > FEAS_TOL * np.maximum(1, np.abs(rel.b_ub))):
        return False
    if rel.A_eq is not None and np.any(np.abs(rel.A_eq @ x - rel.b_eq) > FEAS_TOL * np.maximum(1, np.abs(rel.b_eq))):
        return False
    return bool(np.all(x >= rel.lb - FEAS_TOL) and np.all(x <= rel.ub + FEAS_TOL))


def _complete(model: MilpModel, rel: _Relaxation, binaries: np.ndarray, assignment: np.ndarray,
              pure: bool) -> Optional[tuple]:
    """Fix binaries to ``assignment`` and solve for the continuous part.

    Returns ``(x, min-form objective)`` or None when infeasible.
    """
    lb, ub = rel.lb.copy(), rel.ub.copy()
    lb[binaries] = assignment
    ub[binaries] = assignment
    if pure:
        x = lb.copy()
        if not _pure_binary_feasible(model, rel, x):
            return None
        return x, float(rel.c @ x)
    status, x, obj = rel.solve(lb, ub)
    if status == "unbounded":
        raise Unbounded(f"model {model.name!r} is unbounded")
    if status != "ok":
        return None
    x = x.copy()
    x[binaries] = assignment
    return x, obj


def solve(model: MilpModel, warm_start=None, time_limit: Optional[float] = None,
          node_limit: Optional[int] = None) -> MilpSolution:
    """Exact best-bound branch-and-bound.

    ``warm_start`` maps variable names (or indices) to values; only its binary
    entries are used, the continuous part is re-optimized. A feasible warm
    start seeds the incumbent.
    """
    start = time.monotonic()
    limit = time_limit if time_limit is not None else model.time_limit
    deadline = start + limit if limit is not None else math.inf
    sign = -1.0 if model.sense == "max" else 1.0
    rel = _Relaxation(model)
    binaries = model.binaries
    pure = binaries.size == model.num_vars
    gap = model.gap_tolerance

    inc_x, inc_obj = None, math.inf
    warm_obj = None

    def offer(x, obj):
        nonlocal inc_x, inc_obj
        if obj < inc_obj - 1e-12:
            inc_x, inc_obj = x, obj
            return True
        return False

    def slack(obj):
        return gap * max(1.0, abs(obj))

    if warm_start is not None:
        assignment = np.zeros(binaries.size)
        for k, b in enumerate(binaries):
            name = model.variables[b].name
            if isinstance(warm_start, Mapping):
                val = warm_start.get(name, warm_start.get(int(b), 0.0))
            else:
                val = np.asarray(warm_start)[b]
            assignment[k] = round(float(val))
        done = _complete(model, rel, binaries, assignment, pure)
        if done is not None:
            offer(*done)
            warm_obj = sign * done[1] + model.obj_constant
        else:
            log.info("warm start for %s is infeasible; ignored", model.name)

    status, x, bound = rel.solve(rel.lb, rel.ub)
    if status == "unbounded":
        raise Unbounded(f"model {model.name!r} has an unbounded relaxation")
    heap, seq, nodes = [], 0, 1
    timed_out = False
    if status == "ok":
        heap.append((bound, seq, rel.lb.copy(), rel.ub.copy(), x))

    while heap:
        if time.monotonic() > deadline or (node_limit is not None and nodes >= node_limit):
            timed_out = True
            break
        bound, _, lb, ub, x = heapq.heappop(heap)
        if inc_x is not None and bound >= inc_obj - slack(inc_obj):
            heap.clear()
            break
        j = _fractional(x, binaries)
        if j is None:
            done = _complete(model, rel, binaries, np.round(x[binaries]), pure)
            if done is not None:
                offer(*done)
                continue
            # integral within tolerance yet infeasible once fixed exactly: a big-M
            # term absorbed the residual, so keep branching on the largest residual
            resid = np.abs(x[binaries] - np.round(x[binaries]))
            free = lb[binaries] < ub[binaries]
            if not np.any(free & (resid > 0)):
                continue
            j = int(binaries[np.argmax(np.where(free, resid, -1.0))])
        # rounding heuristic: every node for pure binaries, sparser otherwise
        if pure or nodes % 8 == 1:
            done = _complete(model, rel, binaries, np.round(x[binaries]), pure)
            if done is not None:
                offer(*done)
        for val in (0.0, 1.0) if x[j] < 0.5 else (1.0, 0.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            st, cx, cobj = rel.solve(clb, cub)
            nodes += 1
            if st != "ok":
                continue
            if inc_x is not None and cobj >= inc_obj - slack(inc_obj):
                continue
            seq += 1
            heapq.heappush(heap, (cobj, seq, clb, cub, cx))

    elapsed = time.monotonic() - start
    open_bound = heap[0][0] if heap else math.inf
    stats = {"lp_solves": rel.calls, "lp_failures": rel.failures}
    # a discarded node without an LP verdict voids any optimality proof
    unproven = rel.failures > 0
    if inc_x is None:
        st = Status.TIME_LIMIT if timed_out or unproven else Status.INFEASIBLE
        bb = sign * open_bound + model.obj_constant if timed_out and heap else math.nan
        return MilpSolution(st, {}, math.nan, bb, None, nodes, elapsed, warm_obj, stats)
    best_bound = min(open_bound, inc_obj) if timed_out else inc_obj
    if timed_out and inc_obj - best_bound > slack(inc_obj):
        st = Status.TIME_LIMIT
    elif unproven:
        st = Status.FEASIBLE
    else:
        st = Status.OPTIMAL
        best_bound = inc_obj
    values = {v.name: float(inc_x[i]) for i, v in enumerate(model.variables)}
    return MilpSolution(st, values, sign * inc_obj + model.obj_constant,
                        sign * best_bound + model.obj_constant, inc_x, nodes, elapsed, warm_obj, stats)


# --- LP text format -------------------------------------------------------

def _fmt_num(v: float) -> str:
    return repr(float(v))


def _expr(index, coef, names) -> str:
    parts = []
    for k, (i, a) in enumerate(zip(index, coef)):
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        body = f"{_fmt_num(abs(a))} {names[i]}"
        parts.append(f"{sign} {body}" if parts or sign == "-" else body)
    if not parts:
        return "0 " + names[0] if names else "0"
    lines, line = [], []
    for p in parts:
        line.append(p)
        if len(line) == 6:
            lines.append(" ".join(line))
            line = []
    if line:
        lines.append(" ".join(line))
    return "\n   ".join(lines)


def to_lp_string(model: MilpModel) -> str:
    names = [v.name for v in model.variables]
    out = [f"\\ Problem name: {model.name}"]
    if model.obj_constant:
        out.append(f"\\ objective constant (not encoded): {_fmt_num(model.obj_constant)}")
    out.append("Maximize" if model.sense == "max" else "Minimize")
    out.append(" obj: " + _expr(model.obj_index, model.obj_coef, names))
    out.append("Subject To")
    for con in model.constraints:
        out.append(f" {con.tag}: {_expr(con.index, con.coef, names)} {con.sense} {_fmt_num(con.rhs)}")
    out.append("Bounds")
    for v in model.variables:
        if v.kind == "binary":
            continue
        if math.isinf(v.lower) and math.isinf(v.upper):
            out.append(f" {v.name} free")
        elif math.isinf(v.upper):
            out.append(f" {v.name} >= {_fmt_num(v.lower)}")
        elif math.isinf(v.lower):
            out.append(f" -inf <= {v.name} <= {_fmt_num(v.upper)}")
        else:
            out.append(f" {_fmt_num(v.lower)} <= {v.name} <= {_fmt_num(v.upper)}")
    bins = [v.name for v in model.variables if v.kind == "binary"]
    if bins:
        out.append("Binaries")
        for k in range(0, len(bins), 8):
            out.append(" " + " ".join(bins[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: MilpModel, path) -> None:
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(to_lp_string(model))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _parse_expr(text: str) -> dict:
    terms = {}
    text = text.strip()
    pos = 0
    token = re.compile(r"\s*([+-])?\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][A-Za-z0-9_.]*)")
    while pos < len(text):
        m = token.match(text, pos)
        if not m or m.end() == pos:
            raise MalformedModel(f"cannot parse LP expression near {text[pos:pos + 30]!r}")
        sgn = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        terms[m.group(3)] = terms.get(m.group(3), 0.0) + sgn * coef
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return terms


def read_lp(path) -> MilpModel:
    """Parse the LP subset written by :func:`export_lp`."""
    try:
        text = open(path, encoding="ascii").read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    section, obj_sense, name = None, "min", "model"
    statements: dict = {"obj": [], "st": [], "bounds": [], "bin": []}
    current = None
    for raw in text.splitlines():
        if raw.startswith("\\"):
            m = re.match(r"\\ Problem name: (.*)", raw)
            if m:
                name = m.group(1).strip()
            continue
        line = raw.strip()
        low = line.lower()
        if not line:
            continue
        if low in ("maximize", "maximise", "max", "minimize", "minimise", "min"):
            obj_sense = "max" if low.startswith("max") else "min"
            section, current = "obj", None
            continue
        if low in ("subject to", "st", "s.t.", "such that"):
            section, current = "st", None
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binaries", "binary", "bin"):
            section = "bin"
            continue
        if low == "end":
            break
        if section in ("obj", "st"):
            if raw[:1].isspace() and statements[section] and not re.match(r"^\s*[A-Za-z_][\w.]*\s*:", raw):
                statements[section][-1] += " " + line
            else:
                statements[section].append(line)
        elif section in ("bounds", "bin"):
            statements[section].append(line)
    # collect variable names in order of first appearance
    order: list = []

    def note(names_):
        for nm in names_:
            if nm not in order:
                order.append(nm)

    parsed_obj = {}
    if statements["obj"]:
        body = statements["obj"][0].split(":", 1)[-1]
        parsed_obj = _parse_expr(body)
        note(parsed_obj)
    parsed_cons = []
    for stmt in statements["st"]:
        tag, body = stmt.split(":", 1)
        m = re.match(r"(.*?)(<=|>=|=<|=>|=)\s*([-+]?[\d.eE+-]+)\s*$", body.strip())
        if not m:
            raise MalformedModel(f"cannot parse constraint {stmt!r}")
        sense = {"=<": "<=", "=>": ">="}.get(m.group(2), m.group(2))
        terms = _parse_expr(m.group(1))
        note(terms)
        parsed_cons.append((tag.strip(), terms, sense, float(m.group(3))))
    bounds = {}
    for stmt in statements["bounds"]:
        parts = stmt.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            bounds[parts[0]] = (-math.inf, math.inf)
        elif len(parts) == 5:
            bounds[parts[2]] = (float(parts[0]), float(parts[4]))
        elif len(parts) == 3 and parts[1] == ">=":
            bounds[parts[0]] = (float(parts[2]), math.inf)
        elif len(parts) == 3 and parts[1] == "<=":
            bounds[parts[0]] = (0.0, float(parts[2]))
        else:
            raise MalformedModel(f"cannot parse bound {stmt!r}")
        note([parts[2] if len(parts) == 5 else parts[0]])
    binaries = set()
    for stmt in statements["bin"]:
        binaries.update(stmt.split())
    note(sorted(binaries - set(order)))
    model = MilpModel(name)
    for nm in order:
        if nm in binaries:
            model.add_var(nm, "binary")
        else:
            lo, hi = bounds.get(nm, (0.0, math.inf))
            model.add_var(nm, "continuous", lo, hi)
    for tag, terms, sense, rhs in parsed_cons:
        model.add_constraint({model.var_index(k): v for k, v in terms.items()}, sense, rhs, tag)
    model.set_objective({model.var_index(k): v for k, v in parsed_obj.items()}, obj_sense)
    return model


def import_solution(model: MilpModel, path) -> MilpSolution:
    """Load ``name value`` pairs and validate them against ``model``.

    Unlisted variables are taken as 0. The result is never better than
    ``Feasible``: outside optimality claims are not trusted.
    """
    x = np.zeros(model.num_vars)
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise IoFailure(f"malformed solution line {line!r}")
        x[model.var_index(parts[0])] = float(parts[1])
    worst, tag = model.max_violation(x)
    if worst > FEAS_TOL:
        raise InfeasiblePoint(tag, worst)
    binaries = model.binaries
    off = np.abs(x[binaries] - np.round(x[binaries]))
    if off.size and off.max() > INT_TOL:
        k = int(np.argmax(off))
        raise InfeasiblePoint(f"integrality:{model.variables[binaries[k]].name}", float(off[k]))
    x[binaries] = np.round(x[binaries])
    obj = model.objective(x)
    bound = math.inf if model.sense == "max" else -math.inf
    return MilpSolution(Status.FEASIBLE, {v.name: float(x[i]) for i, v in enumerate(model.variables)},
                        obj, bound, x)


def solve_external(model: MilpModel, command: str, time_limit: Optional[float] = None) -> MilpSolution:
    """Run ``command <model.lp> <solution.txt>`` and import what it writes."""
    with tempfile.TemporaryDirectory(prefix="fairmio-") as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "solution.txt")
        export_lp(model, lp_path)
        try:
            subprocess.run(shlex.split(command) + [lp_path, sol_path], check=True, timeout=time_limit,
                           capture_output=True)
        except (OSError, subprocess.SubprocessError) as exc:
            raise IoFailure(f"external solver {command!r} failed: {exc}") from exc
        return import_solution(model, sol_path)


def solve_with(model: MilpModel, solver: str = "builtin", warm_start=None,
               time_limit: Optional[float] = None) -> MilpSolution:
    """Dispatch on a solver spec: ``builtin`` or ``external:<command>``."""
    if solver == "builtin":
        return solve(model, warm_start=warm_start, time_limit=time_limit)
    if solver.startswith("external:"):
        return solve_external(model, solver[len("external:"):], time_limit)
    raise ValueError(f"unknown solver {solver!r}")
