"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``FRACTINT_PURE=1`` forces
the numpy fallback. ``FRACTINT_THREADS`` caps the worker count handed to
the compiled kernels.
"""
import os

from . import _pykernels as py

if os.environ.get("FRACTINT_PURE") == "1":
    impl = py
else:
    try:
        from . import _ckernels as impl
    except ImportError:
        impl = py

BACKEND = impl.NAME


def threads():
    raw = os.environ.get("FRACTINT_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def pair_energy(centers, weights, s, diag):
    return impl.pair_energy(centers, weights, s, diag, threads())


def fourier_points(centers, weights, freqs):
    return impl.fourier_points(centers, weights, freqs, threads())


def lattice_count_brute(points, n1, n2, lam1, lam2, delta, family, m, use2):
    return impl.lattice_count_brute(points, n1, n2, lam1, lam2, delta, family, m, use2, threads())


def lattice_count_shell(shell, q, n1, n2, lam2, delta, family, m, use2):
    return impl.lattice_count_shell(shell, q, n1, n2, lam2, delta, family, m, use2, threads())
