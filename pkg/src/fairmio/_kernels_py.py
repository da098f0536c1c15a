"""Pure-Python/numpy versions of the conjunction search kernels.

Both kernels walk conjunctions depth-first over attributes, carrying the
member rows of the current prefix; adding a literal can only remove rows.
"""

import time

import numpy as np

BACKEND = "python"


def conjunction_sums(codes, signed, cards):
    """Signed-weight sum of every nonempty conjunction, in lexicographic order.

    ``codes``: (n, k) int value codes; ``signed``: (n, q) float weights;
    ``cards``: attribute cardinalities. Returns a (count, q) array.
    """
    codes = np.ascontiguousarray(codes, dtype=np.int32)
    signed = np.ascontiguousarray(signed, dtype=np.float64)
    k = codes.shape[1]
    out = []

    def walk(rows, first):
        for a in range(first, k):
            col = codes[rows, a]
            for v in range(int(cards[a])):
                sub = rows[col == v]
                out.append(signed[sub].sum(axis=0))
                walk(sub, a + 1)

    walk(np.arange(codes.shape[0]), 0)
    if not out:
        return np.zeros((0, signed.shape[1]))
    return np.vstack(out)


def best_conjunction(codes, signed, attr_order, value_order, value_counts,
                     deadline=float("inf"), threshold=None, counts=None, min_count=0.0):
    """Maximize the signed sum over conjunctions by branch-and-bound.

    The bound at a node is the sum of positive weights among its members.
    With ``threshold`` set the search stops at the first value above it and
    prunes every node whose bound does not exceed it. Nodes whose summed
    ``counts`` fall below ``min_count`` are pruned as well.

    Returns ``(value, literals, nodes, completed)``; ``literals`` is a list of
    ``(attribute, value_code)`` pairs and ``value`` is ``-inf`` if nothing was
    visited.
    """
    codes = np.ascontiguousarray(codes, dtype=np.int32)
    signed = np.ascontiguousarray(signed, dtype=np.float64)
    positive = np.maximum(signed, 0.0)
    counts = np.ones(codes.shape[0]) if counts is None else np.asarray(counts, dtype=np.float64)
    k = len(attr_order)
    state = {"best": -np.inf, "lits": [], "nodes": 0, "done": True, "stop": False}
    floor = -np.inf if threshold is None else float(threshold)

    def walk(rows, first, prefix):
        for p in range(first, k):
            a = attr_order[p]
            col = codes[rows, a]
            for r in range(value_counts[p]):
                if state["stop"]:
                    return
                v = value_order[p][r]
                sub = rows[col == v]
                state["nodes"] += 1
                if state["nodes"] % 1024 == 0 and time.monotonic() > deadline:
                    state["done"] = False
                    state["stop"] = True
                    return
                if sub.size == 0 or (min_count > 0 and counts[sub].sum() < min_count):
                    continue
                bound = positive[sub].sum()
                if bound <= state["best"] or bound <= floor:
                    continue
                value = signed[sub].sum()
                lits = prefix + [(a, v)]
                if value > state["best"]:
                    state["best"] = value
                    state["lits"] = lits
                    if threshold is not None and value > floor:
                        state["stop"] = True
                        return
                walk(sub, p + 1, lits)

    walk(np.arange(codes.shape[0]), 0, [])
    return state["best"], state["lits"], state["nodes"], state["done"]
