"""Acceptance criteria 1-12.

Every test records one ``criterion N PASS|FAIL`` line (printed in the
terminal summary) before asserting, so a red criterion still reports its
measured numbers. Reference values come from ``oracles`` unless noted.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_instance, random_milp
from oracles import (
    all_conjunctions,
    balanced_error_def,
    best_by_enumeration,
    best_conjunction_classifier,
    brute_force_milp,
    expand,
    fpsf_def,
    sd_def,
    spsf_def,
)
from fairmio import (
    AuditDataset,
    Conjunction,
    Status,
    TrainConfig,
    TrainStatus,
    audit_conjunction_bnb,
    audit_conjunction_milp,
    audit_linear_milp,
    build_master_dnf,
    build_master_linear,
    enumerate_measure,
    export_lp,
    import_solution,
    logistic_warm_start,
    make_objective,
    membership,
    msd_enumerate,
    read_lp,
    solve,
    train,
)
from fairmio.metrics import enumerate_sums, fpsf_weights, sd_weights, spsf_weights
from fairmio.subgroups import conjunction_as_linear
from fairmio.synth import generate
from fairmio.trainer import balanced_error, extract_model, run_oracle


def record(k, ok, text):
    line = f"criterion {k} {'PASS' if ok else 'FAIL'}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def membership_set(ds, conjs):
    return {tuple(membership(c, ds)) for c in conjs}


def literal_tuples(cards):
    offsets = np.cumsum([0] + list(cards[:-1]))
    return [(lits, Conjunction(tuple(offsets[a] + v for a, v in lits))) for lits in all_conjunctions(cards)]


# --- 1 and 3: identities ----------------------------------------------------

def identity_family(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_instance(rng, n_max=50, attrs=(1, 4), card_max=2)


def test_criterion_1_parity_identity():
    start = time.monotonic()
    worst, worst_def, checked = 0.0, 0.0, 0
    for ds, yhat, codes, labels, weights, cards in identity_family(1000, 101):
        pos = yhat == 1
        p_h = ds.weights[pos].sum() / ds.total_weight
        _, sp = enumerate_sums(ds, spsf_weights(ds, yhat))
        _, sd = enumerate_sums(ds, sd_weights(ds, pos, ~pos))
        worst = max(worst, float(np.max(np.abs(np.abs(sp) - np.abs(sd) * p_h * (1 - p_h)))))
        # the same identity from definitions on explicitly expanded rows
        c, _, h = expand(codes, labels, yhat, weights)
        ph = h.mean()
        for lits in all_conjunctions(cards):
            diff = spsf_def(c, h, lits) - sd_def(c, h == 1, h == 0, lits) * ph * (1 - ph)
            worst_def = max(worst_def, abs(diff))
        checked += len(sp)
    elapsed = time.monotonic() - start
    ok = worst <= 1e-10 and worst_def <= 1e-10 and elapsed <= 30
    record(1, ok, f"{checked} subgroups on 1000 datasets; max |SPSF - SD*p(1-p)| = {worst:.2e} "
                  f"(definitions: {worst_def:.2e}); {elapsed:.1f}s (limit 30s)")
    assert ok


def test_criterion_3_false_positive_identity():
    worst, worst_def = 0.0, 0.0
    for ds, yhat, codes, labels, weights, cards in identity_family(1000, 101):
        neg = ds.labels == 0
        p_y0 = ds.weights[neg].sum() / ds.total_weight
        stratum = ds.subset(np.flatnonzero(neg))
        _, fp = enumerate_sums(ds, fpsf_weights(ds, yhat))
        _, sp0 = enumerate_sums(stratum, spsf_weights(stratum, yhat[neg]))
        worst = max(worst, float(np.max(np.abs(np.abs(fp) - p_y0 * np.abs(sp0)))))
        c, l, h = expand(codes, labels, yhat, weights)
        z = l == 0
        for lits in all_conjunctions(cards):
            diff = fpsf_def(c, l, h, lits) - z.mean() * spsf_def(c[z], h[z], lits)
            worst_def = max(worst_def, abs(diff))
    ok = worst <= 1e-10 and worst_def <= 1e-10
    record(3, ok, f"max |FPSF - P(y=0)*SPSF|y=0| = {worst:.2e} (definitions: {worst_def:.2e}) on 1000 datasets")
    assert ok


# --- 2: argmax sets ----------------------------------------------------------

def test_criterion_2_argmax_sets():
    rng = np.random.default_rng(202)
    start = time.monotonic()
    mismatches = 0
    for _ in range(200):
        while True:
            ds, yhat, *_ = random_instance(rng, n_max=60, attrs=(2, 4), card_max=3)
            if ds.m <= 10:
                break
        _, sd_arg = msd_enumerate(ds, yhat == 1, yhat == 0)
        _, sp_arg = enumerate_measure(ds, yhat, "SPSF")
        mismatches += membership_set(ds, sd_arg) != membership_set(ds, sp_arg)
    elapsed = time.monotonic() - start
    ok = mismatches == 0 and elapsed <= 60
    record(2, ok, f"SPSF and SD argmax sets differ on {mismatches}/200 instances; {elapsed:.1f}s (limit 60s)")
    assert ok


# --- 4: auditor exactness ----------------------------------------------------

def test_criterion_4_auditor_exactness():
    rng = np.random.default_rng(404)
    start = time.monotonic()
    bad_bnb = bad_milp = not_optimal = 0
    worst = 0.0
    for _ in range(200):
        while True:
            k = int(rng.integers(2, 5))
            cards = [int(rng.integers(2, 5)) for _ in range(k)]
            if sum(cards) <= 12:
                break
        n = int(rng.integers(20, 501))
        codes = np.column_stack([rng.integers(0, c, n) for c in cards])
        yhat = rng.integers(0, 2, n)
        yhat[:2] = [0, 1]
        ds = AuditDataset.from_arrays(codes, rng.integers(0, 2, n), cardinalities=cards, aggregate=False)
        best, arg = msd_enumerate(ds, yhat == 1, yhat == 0)
        args = membership_set(ds, arg)
        obj = make_objective(ds, yhat, "SD")
        a = audit_conjunction_bnb(ds, yhat, obj)
        b = audit_conjunction_milp(ds, yhat, obj)
        not_optimal += (a.status is not Status.OPTIMAL) + (b.status is not Status.OPTIMAL)
        worst = max(worst, abs(a.objective_value - best), abs(b.objective_value - best))
        bad_bnb += abs(a.objective_value - best) > 1e-7 or tuple(membership(a.subgroup, ds)) not in args
        bad_milp += abs(b.objective_value - best) > 1e-7 or tuple(membership(b.subgroup, ds)) not in args
    elapsed = time.monotonic() - start
    ok = bad_bnb == 0 and bad_milp == 0 and not_optimal == 0 and elapsed <= 300
    record(4, ok, f"200 instances (n<=500, <=12 columns): bnb misses {bad_bnb}, milp misses {bad_milp}, "
                  f"non-optimal {not_optimal}, max gap {worst:.2e}; {elapsed:.1f}s (limit 300s)")
    assert ok


# --- 5: containment ----------------------------------------------------------

def test_criterion_5_containment():
    rng = np.random.default_rng(505)
    compared, worst_margin = 0, math.inf
    for trial in range(30):
        ds, yhat, *_ = random_instance(rng, n_max=60, attrs=(2, 3), card_max=3)
        kind = ("SD", "SPSF", "FPSF")[trial % 3]
        obj = make_objective(ds, yhat, kind)
        conj = audit_conjunction_bnb(ds, yhat, obj)
        try:
            warm = logistic_warm_start(ds, yhat == 1, yhat == 0, obj.weights)
        except Exception:
            warm = None
        lin = audit_linear_milp(ds, yhat, obj, warm, time_limit=60)
        if conj.status is Status.OPTIMAL and lin.status is Status.OPTIMAL:
            compared += 1
            worst_margin = min(worst_margin, lin.objective_value - conj.objective_value)
    ok = compared > 0 and worst_margin >= -1e-7
    record(5, ok, f"{compared}/30 instances with both audits optimal; min(linear - conjunction) = "
                  f"{worst_margin:.2e} (needs >= -1e-7)")
    assert ok


# --- 6 and 7: fair training --------------------------------------------------

TRAIN_FIXTURES = [(seed, 0.2 if seed % 2 else 0.3) for seed in range(20)]
_trained = {}


def trained():
    if not _trained:
        start = time.monotonic()
        for seed, sd in TRAIN_FIXTURES:
            gen = generate(400, sd, seed, noise_features=1, measurement_bias=0.4, proxy_flip=0.5)
            ds = gen.to_dataset()
            fair = train(ds, TrainConfig(model="linear", cut_kind="FPSF", subgroup_class="conjunction",
                                         gamma=0.01))
            free = train(ds, TrainConfig(model="linear", gamma=math.inf))
            _trained[seed] = (gen, ds, fair, free)
        _trained["elapsed"] = time.monotonic() - start
    return _trained


def raw_max_fpsf(gen, spec):
    h = spec.predict(gen.features.astype(float))
    return best_by_enumeration(gen.codes, [3, 3], lambda s: fpsf_def(gen.codes, gen.labels, h, s))[0]


def test_criterion_6_training_exactness():
    runs = trained()
    statuses, worst, max_cuts, dims = [], 0.0, 0, set()
    for seed, _ in TRAIN_FIXTURES:
        gen, ds, fair, _ = runs[seed]
        statuses.append(fair.status)
        worst = max(worst, raw_max_fpsf(gen, fair.model))
        max_cuts = max(max_cuts, len(fair.cuts))
        dims.add((ds.m, ds.d))
    elapsed = runs["elapsed"]
    not_optimal = sum(s is not TrainStatus.FAIR_OPTIMAL for s in statuses)
    ok = not_optimal == 0 and worst <= 0.01 + 1e-7 and max_cuts <= 50 and elapsed <= 600
    record(6, ok, f"20 planted datasets (n=400, (m, d) in {sorted(dims)}): {20 - not_optimal}/20 FairOptimal, "
                  f"post-hoc max FPSF {worst:.5f} (gamma 0.01), max cuts {max_cuts}; "
                  f"{elapsed:.1f}s for fair and unconstrained runs (limit 600s)")
    assert ok


def test_criterion_7_tradeoff_direction():
    runs = trained()
    err_bad = fpsf_bad = 0
    gaps = []
    for seed, _ in TRAIN_FIXTURES:
        gen, ds, fair, free = runs[seed]
        err_bad += fair.balanced_error < free.balanced_error - 1e-12
        f_fair, f_free = raw_max_fpsf(gen, fair.model), raw_max_fpsf(gen, free.model)
        fpsf_bad += not f_free > f_fair
        gaps.append(f_free - f_fair)
    ok = err_bad == 0 and fpsf_bad == 0
    record(7, ok, f"constrained error below unconstrained on {err_bad}/20; unconstrained max FPSF not strictly "
                  f"above constrained on {fpsf_bad}/20 (smallest gap {min(gaps):.4f})")
    assert ok


# --- 8: SD-proxy oracle ------------------------------------------------------

def test_criterion_8_sd_proxy_equivalence():
    rng = np.random.default_rng(808)
    agree = violating = 0
    uncertified = 0
    cases = 0
    while cases < 50:
        if cases % 2:
            ds, yhat, *_ = random_instance(rng, n_max=80, attrs=(2, 4), card_max=3)
        else:
            ds = generate(400, 0.3, int(rng.integers(0, 10 ** 6)), noise_features=2).to_dataset()
            yhat = rng.integers(0, 2, ds.n)
        neg = ds.labels == 0
        if not (0 < yhat[neg].sum() < neg.sum()):
            continue
        cases += 1
        best, _ = enumerate_measure(ds, yhat, "FPSF")
        gamma = float(best * rng.uniform(0.5, 1.5))
        outs = [run_oracle(ds, yhat, TrainConfig(gamma=gamma, oracle_kind=kind), 60)
                for kind in ("same", "sd-proxy")]
        uncertified += sum(not o.certified for o in outs)
        found = [o.subgroup is not None for o in outs]
        agree += found[0] == found[1]
        violating += found[0]
    ok = agree == 50 and uncertified == 0
    record(8, ok, f"SD-proxy and FPSF oracles agree on {agree}/50 incumbents ({violating} violating, "
                  f"{50 - violating} fair); uncertified oracle runs {uncertified}")
    assert ok


# --- 9: DNF single clause ----------------------------------------------------

def test_criterion_9_dnf_single_clause():
    rng = np.random.default_rng(909)
    worst, bad = 0.0, 0
    start = time.monotonic()
    for _ in range(30):
        d = int(rng.integers(3, 11))
        n = int(rng.integers(20, 201))
        X = rng.integers(0, 2, (n, d))
        # labels from a noisy conjunction so the optimum is not trivial
        J = rng.choice(d, size=int(rng.integers(1, 3)), replace=False)
        y = (X[:, J].all(axis=1) ^ (rng.random(n) < 0.15)).astype(int)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        ds = AuditDataset.from_arrays(np.zeros((n, 1), int), y, features=X)
        master = build_master_dnf(ds, TrainConfig(model="dnf", clauses=1))
        sol = solve(master.model)
        pred = extract_model(master, sol.x).predict(X)
        ref = best_conjunction_classifier(X, y)
        got = balanced_error_def(y, pred)
        gap = max(abs(got - ref), abs(sol.objective_value / 2 - ref))
        worst = max(worst, gap)
        bad += gap > 1e-9 or sol.status is not Status.OPTIMAL
    ok = bad == 0
    record(9, ok, f"30 fixtures (d<=10, n<=200): DNF C=1 optimum vs exhaustive best conjunction, "
                  f"{bad} mismatches, max gap {worst:.2e}; {time.monotonic() - start:.1f}s")
    assert ok


# --- 10: sparsity ------------------------------------------------------------

def test_criterion_10_sparsity_direction():
    more, worst_increase, counts = 0, -math.inf, []
    for seed in range(10):
        ds = generate(400, 0.3, 100 + seed, noise_features=3, signal_flip=0.25).to_dataset()
        specs = []
        for sigma in (0.0, 0.1):
            master = build_master_linear(ds, TrainConfig(sigma=sigma))
            specs.append(extract_model(master, solve(master.model).x))
        dense, sparse = specs
        errs = [balanced_error(ds, s.predict(ds.features)) for s in specs]
        counts.append((dense.nonzero, sparse.nonzero))
        more += sparse.nonzero > dense.nonzero
        worst_increase = max(worst_increase, errs[1] - errs[0])
    zeroed = 1 - sum(s for _, s in counts) / sum(d for d, _ in counts)
    ok = more == 0 and worst_increase <= 0.05
    record(10, ok, f"nonzero coefficients (sigma=0, sigma=0.1) {counts}; sparse model denser on {more}/10; "
                   f"max balanced-error increase {worst_increase:.4f} (limit 0.05); {100 * zeroed:.0f}% fewer "
                   f"nonzeros overall")
    assert ok


# --- 11: planted detection ---------------------------------------------------

def test_criterion_11_planted_detection():
    start = time.monotonic()
    gen = generate(400, 0.3, 11, cards=(3, 3))
    ds = gen.to_dataset()
    y = ds.labels
    parity = max(spsf_def(gen.codes, gen.labels, ((a, v),)) for a in range(2) for v in range(3))
    planted = Conjunction(tuple(ds.column_index(a, v) for a, v in gen.planted))
    obj = make_objective(ds, y, "SD")
    found = [audit_conjunction_bnb(ds, y, obj).subgroup, audit_conjunction_milp(ds, y, obj).subgroup]
    value = sd_def(gen.codes, gen.labels == 1, gen.labels == 0, ((0, 0), (1, 0)))
    elapsed = time.monotonic() - start
    ok = parity <= 0.01 and all(s == planted for s in found) and value >= 0.3 and elapsed <= 10
    record(11, ok, f"max single-attribute SPSF {parity:.2e} (limit 0.01); planted SD {value:.3f}; "
                   f"bnb and milp return {[str(s.literals) for s in found]} vs planted {planted.literals}; "
                   f"{elapsed:.2f}s (limit 10s)")
    assert ok


# --- 12: MILP core -----------------------------------------------------------

def test_criterion_12_milp_soundness(tmp_path):
    rng = np.random.default_rng(1212)
    start = time.monotonic()
    mismatches, infeasible, worst = 0, 0, 0.0
    round_trips = attempted = 0
    for k in range(500):
        model, data = random_milp(rng)
        ref, _ = brute_force_milp(**data)
        sol = solve(model)
        if ref is None:
            infeasible += 1
            mismatches += sol.status is not Status.INFEASIBLE
            continue
        gap = abs(sol.objective_value - ref) if sol.has_incumbent else math.inf
        worst = max(worst, gap)
        mismatches += sol.status is not Status.OPTIMAL or gap > 1e-7
        if k % 10 == 0:
            attempted += 1
            lp = tmp_path / f"m{k}.lp"
            export_lp(model, lp)
            again = solve(read_lp(lp))
            point = tmp_path / f"m{k}.sol"
            point.write_text("".join(f"{name} {value!r}\n" for name, value in again.values.items()))
            back = import_solution(model, point)
            round_trips += back.status is Status.FEASIBLE and abs(back.objective_value - ref) <= 1e-7
    elapsed = time.monotonic() - start
    ok = mismatches == 0 and round_trips == attempted > 0
    record(12, ok, f"500 random models (<=20 binaries, {infeasible} infeasible): {mismatches} mismatches vs "
                   f"enumeration, max gap {worst:.2e}; LP export/read/import round trips valid on "
                   f"{round_trips}/{attempted} sampled feasible models; {elapsed:.1f}s")
    assert ok
