"""Time the numpy kernels against the compiled ones on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 3] [--threads N]

Prints one row per kernel: best-of-repeat wall time for each backend, the
speedup, and whether the outputs agree.
"""
import argparse
import time

import numpy as np

from fractint import _pykernels as py

try:
    from fractint import _ckernels as ck
except ImportError:
    ck = None


def best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases(rng):
    c = rng.uniform(0, 1, (4000, 2))
    w = np.full(len(c), 1 / len(c))
    yield "pair_energy n=4000", (lambda m, th: m.pair_energy(c, w, 1.2, 1e-3, th))

    f = rng.uniform(-256, 256, (2000, 2))
    yield "fourier_points 4000x2000", (lambda m, th: m.fourier_points(c, w, f, th))

    q = 32
    ax = np.arange(q + 1)
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2).astype(np.int64)
    n1 = rng.integers(0, q + 1, (4096, 2))
    n2 = rng.integers(0, q + 1, (4096, 2))
    args = (q * 0.75 * np.sqrt(2), q * 0.75 * np.sqrt(2), q ** (1 - 2 / 1.6), py.EUCLID, 2, True)
    yield "lattice_count_brute q=32", (lambda m, th: m.lattice_count_brute(pts, n1, n2, *args, th))

    V = np.stack(np.meshgrid(np.arange(-q, q + 1), np.arange(-q, q + 1), indexing="ij"), -1)
    V = V.reshape(-1, 2).astype(np.int64)
    shell = V[py._hit(py._phi(V, py.EUCLID, 2), args[0], args[2])]
    yield "lattice_count_shell q=32", (lambda m, th: m.lattice_count_shell(
        shell, q, n1, n2, args[1], args[2], py.EUCLID, 2, True, th))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    a = p.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'numpy s':>9s} {'cython s':>9s} {'speedup':>8s}  agree")
    for name, run in cases(rng):
        tp, op = best(lambda: run(py, a.threads), a.repeat)
        if ck is None:
            print(f"{name:28s} {tp:9.4f} {'-':>9s} {'-':>8s}  -")
            continue
        tc, oc = best(lambda: run(ck, a.threads), a.repeat)
        agree = np.allclose(op, oc, rtol=1e-10, atol=1e-12)
        print(f"{name:28s} {tp:9.4f} {tc:9.4f} {tp / tc:8.1f}  {agree}")


if __name__ == "__main__":
    main()
