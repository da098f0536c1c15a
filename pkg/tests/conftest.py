import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fairmio import AuditDataset  # noqa: E402


@pytest.fixture
def ten():
    """Ten unit-weight rows; S = {g = a} has 5 members.

    Overall 4 predicted positives, 3 of them in S. Six rows have y = 0, two
    of those predicted positive, and S covers three of the six (both
    positives among them).
    """
    g = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
    y = [0, 0, 0, 1, 1, 0, 0, 0, 1, 1]
    yhat = np.array([1, 1, 0, 1, 0, 0, 0, 0, 1, 0])
    ds = AuditDataset.from_arrays(np.array(g)[:, None], y, features=np.eye(10),
                                  attribute_names=["g"], value_names=[["a", "b"]])
    return ds, yhat


def random_instance(rng, n_max=50, attrs=(2, 4), card_max=2, weight_max=3):
    """Random weighted dataset with a non-degenerate prediction vector."""
    k = int(rng.integers(attrs[0], attrs[1] + 1))
    cards = [int(rng.integers(2, card_max + 1)) for _ in range(k)]
    while True:
        n = int(rng.integers(6, n_max + 1))
        codes = np.column_stack([rng.integers(0, c, n) for c in cards])
        labels = rng.integers(0, 2, n)
        yhat = rng.integers(0, 2, n)
        weights = rng.integers(1, weight_max + 1, n)
        neg = labels == 0
        if 0 < yhat.sum() < n and 0 < yhat[neg].sum() < neg.sum():
            break
    ds = AuditDataset.from_arrays(codes, labels, weights=weights, cardinalities=cards, aggregate=False)
    return ds, yhat, codes, labels, weights, cards


def random_milp(rng, max_binaries=20, max_continuous=2, max_constraints=5):
    """Random bounded mixed-binary model plus its data in array form."""
    from fairmio import MilpModel

    nb = int(rng.integers(1, max_binaries + 1))
    nc = int(rng.integers(0, max_continuous + 1))
    n = nb + nc
    model = MilpModel("rand")
    is_binary = np.r_[np.ones(nb, bool), np.zeros(nc, bool)]
    lb = np.zeros(n)
    ub = np.ones(n)
    for j in range(nb):
        model.add_var(f"b{j}", "binary")
    for j in range(nc):
        lb[nb + j] = float(rng.integers(-3, 1))
        ub[nb + j] = lb[nb + j] + float(rng.integers(1, 5))
        model.add_var(f"x{j}", "continuous", lb[nb + j], ub[nb + j])
    k = int(rng.integers(1, max_constraints + 1))
    A = rng.integers(-5, 6, (k, n)).astype(float)
    senses = list(rng.choice(["<=", ">=", "="], k, p=[0.6, 0.3, 0.1]))
    # centre the right-hand side on a random point so most models are feasible
    point = np.where(is_binary, rng.integers(0, 2, n), lb + rng.random(n) * (ub - lb))
    b = np.round(A @ point + rng.normal(0, 2, k), 2)
    for i in range(k):
        if senses[i] == "=":
            if nc == 0:
                b[i] = float(np.round(A[i] @ point))
            else:
                b[i] = float(np.round(A[i] @ point, 6))
        model.add_constraint((np.arange(n), A[i]), senses[i], float(b[i]), f"r{i}")
    c = rng.integers(-9, 10, n).astype(float)
    sense = str(rng.choice(["min", "max"]))
    model.set_objective((np.arange(n), c), sense)
    return model, dict(c=c, A=A, b=b, senses=senses, is_binary=is_binary, lb=lb, ub=ub, sense=sense)


# acceptance criteria append one line each; printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
