"""Compare the compiled and NumPy forward-backward kernels.

Usage: python benchmarks/bench_forward_backward.py [--repeats 5]
"""
import argparse
import time

import numpy as np

from dpnlearn._kernels import fb_py

try:
    from dpnlearn._kernels import _fb
except ImportError:
    _fb = None


def random_problem(S, L, rng, sparsity=0.5):
    init = rng.dirichlet(np.ones(S))
    trans = rng.dirichlet(np.ones(S), size=S)
    trans[rng.random((S, S)) < sparsity] = 0.0
    trans[:, 0] += 1e-12
    trans /= trans.sum(axis=1, keepdims=True)
    ev = (rng.random((L, S)) < 0.6).astype(float)
    ev[:, 0] = 1.0
    return init, trans, ev


def best_time(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--length", type=int, default=21)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'states':>7} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8} {'max |dll|':>10}")
    for S in (8, 32, 64, 256, 1024):
        prob = random_problem(S, args.length, rng)
        tp = best_time(fb_py.forward_backward, prob, args.repeats)
        if _fb is None:
            print(f"{S:>7} {tp * 1e3:>10.3f} {'n/a':>10}")
            continue
        tc = best_time(_fb.forward_backward, prob, args.repeats)
        diff = abs(fb_py.forward_backward(*prob)[0] - _fb.forward_backward(*prob)[0])
        print(f"{S:>7} {tp * 1e3:>10.3f} {tc * 1e3:>10.3f} {tp / tc:>8.2f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
