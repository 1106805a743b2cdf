"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
Integer kernels must agree bit-for-bit between the two backends; float
kernels agree to rounding (the summation order differs).
"""
import numpy as np

NAME = "numpy"

# families understood by the lattice kernels
EUCLID = 0
LM_NORM = 1

_CHUNK = 1 << 22


def pair_energy(centers, weights, s, diag, threads=1):
    """Sum of w_i w_j |c_i - c_j|^-s over ordered pairs, same-cell pairs at distance ``diag``."""
    c = np.ascontiguousarray(centers, dtype=np.float64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    n = len(w)
    if n == 0:
        return 0.0
    rows = max(1, _CHUNK // max(n, 1))
    partial = np.empty(n)
    for lo in range(0, n, rows):
        hi = min(n, lo + rows)
        diff = c[lo:hi, None, :] - c[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        idx = np.arange(lo, hi)
        r2[idx - lo, idx] = 1.0
        k = np.exp(-0.5 * s * np.log(r2))
        k[idx - lo, idx] = 0.0
        partial[lo:hi] = (k * w[None, :]).sum(axis=1)
    total = float((w * partial).sum())
    return total + float((w * w).sum()) * diag ** (-s)


def fourier_points(centers, weights, freqs, threads=1):
    """Fourier transform sum_j w_j exp(-2 pi i c_j . xi) at each row of ``freqs``."""
    c = np.ascontiguousarray(centers, dtype=np.float64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    f = np.ascontiguousarray(freqs, dtype=np.float64)
    out = np.empty(len(f), dtype=np.complex128)
    if len(f) == 0:
        return out
    if len(w) == 0:
        out[:] = 0.0
        return out
    rows = max(1, _CHUNK // len(w))
    for lo in range(0, len(f), rows):
        hi = min(len(f), lo + rows)
        phase = np.zeros((hi - lo, len(w)))
        for a in range(c.shape[1]):
            phase += f[lo:hi, a, None] * c[None, :, a]
        phase *= 2.0 * np.pi
        re = (np.cos(phase) * w[None, :]).sum(axis=1)
        im = (np.sin(phase) * w[None, :]).sum(axis=1)
        out[lo:hi] = re - 1j * im
    return out


def _phi(v, family, m):
    if family == EUCLID:
        return np.sqrt((v * v).sum(axis=-1).astype(np.float64))
    p = v
    for _ in range(m - 1):
        p = p * v
    return np.power(p.sum(axis=-1).astype(np.float64), 1.0 / m)


def _hit(phi, lam, delta):
    return np.abs(phi - lam) <= delta


def lattice_count_brute(points, n1, n2, lam1, lam2, delta, family, m, use2, threads=1):
    """Count points n with |phi(n1,n)-lam1|<=delta and (optionally) |phi(n2,n)-lam2|<=delta."""
    pts = np.ascontiguousarray(points, dtype=np.int64)
    a = np.ascontiguousarray(n1, dtype=np.int64)
    b = np.ascontiguousarray(n2, dtype=np.int64)
    out = np.zeros(len(a), dtype=np.int64)
    if len(a) == 0 or len(pts) == 0:
        return out
    rows = max(1, _CHUNK // (len(pts) * pts.shape[1]))
    for lo in range(0, len(a), rows):
        hi = min(len(a), lo + rows)
        ok = _hit(_phi(a[lo:hi, None, :] - pts[None], family, m), lam1, delta)
        if use2:
            ok &= _hit(_phi(b[lo:hi, None, :] - pts[None], family, m), lam2, delta)
        out[lo:hi] = ok.sum(axis=1)
    return out


def lattice_count_shell(shell, q, n1, n2, lam2, delta, family, m, use2, threads=1):
    """Same counts as the brute kernel, scanning only the precomputed first-constraint shell."""
    sh = np.ascontiguousarray(shell, dtype=np.int64)
    a = np.ascontiguousarray(n1, dtype=np.int64)
    b = np.ascontiguousarray(n2, dtype=np.int64)
    out = np.zeros(len(a), dtype=np.int64)
    if len(a) == 0 or len(sh) == 0:
        return out
    rows = max(1, _CHUNK // (len(sh) * sh.shape[1]))
    for lo in range(0, len(a), rows):
        hi = min(len(a), lo + rows)
        n = a[lo:hi, None, :] + sh[None]
        ok = ((n >= 0) & (n <= q)).all(axis=-1)
        if use2:
            ok &= _hit(_phi(b[lo:hi, None, :] - n, family, m), lam2, delta)
        out[lo:hi] = ok.sum(axis=1)
    return out
