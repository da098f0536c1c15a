"""Compare the compiled and pure-Python conjunction kernels.

    python3 benchmarks/bench_kernels.py [--repeats 5] [--n 5000]

Times ``conjunction_sums`` (every conjunction at once) and
``best_conjunction`` (branch-and-bound search) on random SPSF weights, and
checks that both backends return the same values.
"""

import argparse
import time

import numpy as np

from fairmio import AuditDataset, _kernels_py
from fairmio.metrics import compress, measure_weights

try:
    from fairmio import _kernels as compiled
except ImportError:
    compiled = None


def instance(n, cards, seed):
    rng = np.random.default_rng(seed)
    codes = np.column_stack([rng.integers(0, c, n) for c in cards])
    labels = rng.integers(0, 2, n)
    yhat = (rng.random(n) < 0.3 + 0.1 * (codes[:, 0] == 0)).astype(int)
    ds = AuditDataset.from_arrays(codes, labels, cardinalities=cards, aggregate=False)
    a = measure_weights(ds, yhat, "SPSF")
    merged_codes, merged = compress(ds.codes, np.column_stack([a, ds.weights]))
    return merged_codes, merged, np.asarray(cards, dtype=np.int64)


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled kernels not built; only the Python backend is available")
    backends = [("python", _kernels_py)] + ([("cython", compiled)] if compiled else [])

    print(f"{'cards':<16}{'kernel':<18}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for cards in ((3, 3), (2, 3, 4), (3, 4, 5, 2), (4, 4, 4, 4, 3)):
        codes, merged, cc = instance(args.n, cards, args.seed)
        a = merged[:, 0]
        order = list(range(len(cards)))
        values = [list(range(c)) for c in cards]
        counts = [len(v) for v in values]
        jobs = {
            "conjunction_sums": lambda k: k.conjunction_sums(codes, merged, cc),
            "best_conjunction": lambda k: k.best_conjunction(codes, a, order, values, counts),
        }
        for label, job in jobs.items():
            results = [best_time(lambda: job(k), args.repeats) for _, k in backends]
            if len(results) == 2:
                x, y = results[0][1], results[1][1]
                same = np.allclose(x, y) if label == "conjunction_sums" else abs(x[0] - y[0]) < 1e-12
                assert same, f"backends disagree on {label} for cards {cards}"
                speed = f"{results[0][0] / results[1][0]:9.1f}x"
            else:
                speed = f"{'-':>10}"
            row = "".join(f"{1e3 * t:10.2f}ms" for t, _ in results)
            print(f"{str(cards):<16}{label:<18}{row}{speed}")


if __name__ == "__main__":
    main()
