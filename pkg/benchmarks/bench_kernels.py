"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--n 20000] [--p 0.001] [--repeats 5]

Prints one line per kernel with the best-of-``repeats`` time for each backend
and the speedup. Both backends get identical inputs and their outputs are
checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from gappart import kernels
from gappart.graph import generate_clique_chain, generate_erdos_renyi


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, p, width, seed):
    rng = np.random.default_rng(seed)
    g = generate_erdos_renyi(n, p, seed)
    src, dst, w = (np.ascontiguousarray(a) for a in g.directed)
    P = rng.random((n, width))
    Q = rng.random((n, width))
    indptr, indices = g.neighbor_csr
    M = rng.normal(size=(n, width))
    small = generate_clique_chain([4, 4, 4, 3])
    return {
        "edge_pair_sum": lambda k: k.edge_pair_sum(src, dst, w, P, Q),
        "edge_pair_grad": lambda k: k.edge_pair_grad(src, dst, w, P, Q, 1.0),
        "maxpool_sets": lambda k: k.maxpool_sets(indptr, indices, M),
        "maxpool_sets_grad": lambda k: k.maxpool_sets_grad(
            k.maxpool_sets(indptr, indices, M)[1], M, n),
        "min_ncut_enumerate(n=15,g=2)": lambda k: k.min_ncut_enumerate(
            small.n, 2, np.ascontiguousarray(small.u), np.ascontiguousarray(small.v),
            np.ascontiguousarray(small.w), np.ascontiguousarray(small.degrees), False),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-10, atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--p", type=float, default=0.001)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled extension not built; only the NumPy fallback is available")
    print(f"ER n={args.n} p={args.p} width={args.width}, best of {args.repeats}")
    print(f"{'kernel':<30}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(args.n, args.p, args.width, args.seed).items():
        ref = fn(impls["python"])
        t_py = best_of(lambda: fn(impls["python"]), args.repeats)
        if "cython" in impls:
            if not same(ref, fn(impls["cython"])):
                raise SystemExit(f"{name}: backends disagree")
            t_c = best_of(lambda: fn(impls["cython"]), args.repeats)
            print(f"{name:<30}{t_py * 1e3:>12.2f}{t_c * 1e3:>12.2f}{t_py / t_c:>9.1f}x")
        else:
            print(f"{name:<30}{t_py * 1e3:>12.2f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
