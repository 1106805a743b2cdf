"""Dimension, energy, Fourier-decay and slab-mass estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from . import _kernels
from .grid import CellSet, DiscreteMeasure, GridError, ScaleTooFine


@dataclass
class DecayFit:
    slope: float
    intercept: float
    residual: float  # max |log2 y - fit| over the fitted points
    scale_range: tuple
    n_points: int
    x: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)


def fit_loglog(x, y, min_points: int = 4) -> DecayFit:
    """Unweighted least squares of log2 y against log2 x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < min_points:
        raise GridError(f"need at least {min_points} scales, got {len(x)}")
    if (y <= 0).any() or (x <= 0).any():
        raise GridError("log-log fit needs positive values")
    lx, ly = np.log2(x), np.log2(y)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.abs(ly - (slope * lx + icpt)).max())
    return DecayFit(float(slope), float(icpt), res, (float(x.min()), float(x.max())), len(x), x, y)


# ---------------------------------------------------------------------------
# box counting

def box_count(A: CellSet, j: int) -> int:
    if j > A.grid.k or j < 0:
        raise GridError(f"coarse level {j} outside [0, {A.grid.k}]")
    return len(A.coarsen(j))


def default_levels(k: int) -> list:
    """Box-counting ladder: the finest eight levels, never below level 1."""
    return list(range(max(1, k - 7), k + 1))


def minkowski_dim(A: CellSet, j_range=None) -> DecayFit:
    """Slope of log2 N_j against j, N_j the number of 2^-j boxes meeting A."""
    js = default_levels(A.grid.k) if j_range is None else [int(j) for j in j_range]
    if len(set(js)) < 4:
        raise GridError("box counting needs at least 4 scales")
    counts = [box_count(A, j) for j in js]
    if min(counts) == 0:
        raise GridError("box counting of an empty set")
    fit = fit_loglog(2.0 ** np.asarray(js), counts)
    fit.scale_range = (2.0 ** -max(js), 2.0 ** -min(js))
    fit.extra["levels"] = js
    fit.extra["counts"] = counts
    return fit


# ---------------------------------------------------------------------------
# energies

@dataclass
class EnergyValue:
    s: float
    value: float
    method: str
    extra: dict = field(default_factory=dict)


def _check_s(mu, s):
    if not 0 < s < mu.grid.d:
        raise GridError(f"energy exponent must lie in (0, {mu.grid.d}), got {s}")


def _dense_weights(mu: DiscreteMeasure, pad: int) -> np.ndarray:
    g = mu.grid
    W = np.zeros((g.n,) * g.d)
    W.reshape(-1)[mu.support.keys] = mu.weights
    if pad:
        W = np.pad(W, [(0, g.n)] * g.d)
    return W


def _autocorrelation(mu):
    W = _dense_weights(mu, pad=True)
    F = np.fft.rfftn(W)
    R = np.fft.irfftn(F * np.conj(F), s=W.shape, axes=tuple(range(W.ndim)))
    return R


def energy_spatial(mu: DiscreteMeasure, s: float, method: str = "auto") -> EnergyValue:
    """Double sum of w_i w_j |c_i - c_j|^-s; same-cell pairs sit at distance eps/2.

    ``method`` is ``direct`` (pair kernel), ``fft`` (autocorrelation of the
    dense weight grid) or ``auto``.
    """
    _check_s(mu, s)
    g = mu.grid
    diag = g.eps / 2
    if method == "auto":
        dense_ok = (2 * g.n) ** g.d <= (1 << 24)
        method = "fft" if dense_ok and len(mu.support) > 4000 else "direct"
    if method == "direct":
        val = _kernels.pair_energy(mu.centers(), mu.weights, s, diag)
    elif method == "fft":
        R = _autocorrelation(mu)
        m = 2 * g.n
        idx = np.fft.fftfreq(m, 1.0 / m)
        r2 = np.zeros((m,) * g.d)
        for a in range(g.d):
            sh = [1] * g.d
            sh[a] = m
            r2 = r2 + (idx.reshape(sh) * g.eps) ** 2
        r2.reshape(-1)[0] = diag**2
        val = float((R * r2 ** (-s / 2)).sum())
    else:
        raise GridError(f"unknown energy method {method!r}")
    return EnergyValue(s, float(val), "spatial", {"path": method})


def riesz_constant(d: int, s: float) -> float:
    """c with (|x|^-s)^ = c |xi|^(s-d) for the exp(-2 pi i x.xi) transform."""
    return math.pi ** (s - d / 2) * gamma((d - s) / 2) / gamma(s / 2)


def _ball_volume(d):
    return math.pi ** (d / 2) / gamma(d / 2 + 1)


def fourier_transform(mu: DiscreteMeasure, freqs) -> np.ndarray:
    """mu^(xi) = sum_j w_j exp(-2 pi i c_j . xi) at each row of ``freqs``."""
    freqs = np.atleast_2d(np.asarray(freqs, dtype=np.float64))
    return _kernels.fourier_points(mu.centers(), mu.weights, freqs)


def _frequency_lattice(g, h, xi_max):
    M = int(math.floor(xi_max / h + 1e-9))
    ax = np.arange(-M, M + 1)
    m = np.stack(np.meshgrid(*[ax] * g.d, indexing="ij"), -1).reshape(-1, g.d)
    r = np.sqrt((m * m).sum(axis=1)) * h
    keep = (r > 0) & (r <= xi_max * (1 + 1e-12))
    return m[keep], r[keep]


def energy_fourier(mu: DiscreteMeasure, s: float, xi_max: float | None = None,
                   method: str = "auto") -> EnergyValue:
    """Frequency-side energy c_{d,s} * integral |mu^|^2 |xi|^(s-d) d xi.

    The integral is a Riemann sum on the lattice h Z^d with h = 1/(2L),
    which resolves the autocorrelation of a measure living in [0, L]^d, cut
    at |xi| <= xi_max. The cell holding the origin (where |mu^| = 1) is
    integrated exactly over a ball of the same volume.
    """
    _check_s(mu, s)
    g = mu.grid
    cap = 2.0 ** (g.k - 1)
    xi_max = cap if xi_max is None else float(xi_max)
    if xi_max > cap * (1 + 1e-12):
        raise GridError(f"xi_max {xi_max} beyond the cap 2^(k-1) = {cap}")
    d = g.d
    h = 1.0 / (2 * g.L)
    if method == "auto":
        method = "fft" if (2 * g.n) ** d <= (1 << 25) else "direct"
    if method == "fft":
        W = _dense_weights(mu, pad=True)
        F = np.fft.fftn(W)
        P = (F * np.conj(F)).real  # |mu^(h m)|^2; the half-cell phase has modulus 1
        m2n = 2 * g.n
        idx = np.fft.fftfreq(m2n, 1.0 / m2n)
        r2 = np.zeros((m2n,) * d)
        for a in range(d):
            sh = [1] * d
            sh[a] = m2n
            r2 = r2 + (idx.reshape(sh) * h) ** 2
        keep = (r2 > 0) & (r2 <= (xi_max * (1 + 1e-12)) ** 2)
        # the +n and -n rows alias; count the Nyquist index once per sign
        tail = float((P[keep] * r2[keep] ** ((s - d) / 2)).sum())
        if xi_max >= cap * (1 - 1e-12):
            tail += _nyquist_mirror(P, r2, h, g.n, s, d, xi_max)
    elif method == "direct":
        m, r = _frequency_lattice(g, h, xi_max)
        vals = fourier_transform(mu, m * h)
        tail = float((np.abs(vals) ** 2 * r ** (s - d)).sum())
    else:
        raise GridError(f"unknown energy method {method!r}")
    r0 = (h**d / _ball_volume(d)) ** (1.0 / d)
    origin = d * _ball_volume(d) * r0**s / s
    val = riesz_constant(d, s) * (h**d * tail + origin)
    return EnergyValue(s, val, "fourier", {"xi_max": xi_max, "path": method})


def _nyquist_mirror(P, r2, h, n, s, d, xi_max):
    """Contribution of lattice points with some coordinate equal to +n.

    The FFT index range is [-n, n); points with a +n coordinate alias onto
    the -n slice with identical modulus, so they are added back here.
    """
    lim = (xi_max * (1 + 1e-12)) ** 2
    total = 0.0
    m2n = 2 * n
    idx = np.fft.fftfreq(m2n, 1.0 / m2n)
    # enumerate subsets of axes pinned at +n via sign flips of the -n index
    for mask in range(1, 1 << d):
        sl = []
        for a in range(d):
            sl.append(n if (mask >> a) & 1 else slice(None))
        sub_P = P[tuple(sl)]
        r2m = np.zeros(sub_P.shape)
        free = [a for a in range(d) if not (mask >> a) & 1]
        for pos, a in enumerate(free):
            sh = [1] * len(free)
            sh[pos] = m2n
            r2m = r2m + (idx.reshape(sh) * h) ** 2
        r2m = r2m + bin(mask).count("1") * (n * h) ** 2
        ok = r2m <= lim
        total += float((sub_P[ok] * r2m[ok] ** ((s - d) / 2)).sum())
    return total


# ---------------------------------------------------------------------------
# Fourier decay

def sample_directions(d: int, n_random: int, seed: int) -> np.ndarray:
    """Coordinate axes followed by seeded uniform unit vectors."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n_random, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.concatenate([np.eye(d), v])


def fourier_decay(mu: DiscreteMeasure, xi_range=None, n_directions: int = 64,
                  radii_per_shell: int = 8, seed: int = 0) -> DecayFit:
    """Shell-sup decay of |mu^|: fit log sup_{shell} |mu^| against log |xi|.

    Shells are the dyadic annuli [2^j, 2^(j+1)); the fitted slope sigma
    gives beta = -2 sigma, stored in ``extra['beta']``.
    """
    g = mu.grid
    cap = 2.0 ** (g.k - 1)
    lo, hi = (2.0, cap / 8) if xi_range is None else map(float, xi_range)
    if hi > cap:
        raise GridError("frequency range beyond the sampling cap")
    j0, j1 = int(round(math.log2(lo))), int(round(math.log2(hi)))
    if j1 - j0 + 1 < 4:
        raise GridError("Fourier decay needs at least 4 octaves")
    if n_directions < 64:
        raise GridError("at least 64 random directions required")
    dirs = sample_directions(g.d, n_directions, seed)
    u = 2.0 ** (np.arange(radii_per_shell) / radii_per_shell)
    shells = 2.0 ** np.arange(j0, j1)
    radii = (shells[:, None] * u[None, :]).ravel()
    freqs = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, g.d)
    amp = np.abs(fourier_transform(mu, freqs)).reshape(len(shells), -1)
    sup = amp.max(axis=1)
    fit = fit_loglog(shells, sup)
    fit.extra["beta"] = -2.0 * fit.slope
    return fit


# ---------------------------------------------------------------------------
# slabs

def slab_masses(mu: DiscreteMeasure, directions, deltas, origin=None) -> np.ndarray:
    """mu{y : |(y - origin) . w| <= delta}, shape (n_deltas, n_directions)."""
    c = mu.centers()
    if origin is not None:
        c = c - np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(directions, dtype=np.float64)
    out = np.empty((len(deltas), len(dirs)))
    w = mu.weights
    for i, v in enumerate(dirs):
        proj = c @ (v / np.linalg.norm(v))
        order = np.argsort(proj, kind="stable")
        p = proj[order]
        cw = np.concatenate([[0.0], np.cumsum(w[order])])
        for j, t in enumerate(deltas):
            a = np.searchsorted(p, -t, side="left")
            b = np.searchsorted(p, t, side="right")
            out[j, i] = cw[b] - cw[a]
    return out


def hyperplane_exponent(mu_B: DiscreteMeasure, deltas, n_directions: int = 32,
                        seed: int = 0, origin=None) -> DecayFit:
    """Fit of sup_w mu_B(delta-slab around the hyperplane w.y = 0) against delta.

    The slope estimates s_B - h for the hyperplane size condition of order h.
    """
    deltas = sorted(float(t) for t in deltas)
    eps = mu_B.grid.eps
    if deltas[0] < 2 * eps:
        raise ScaleTooFine(f"slab width {deltas[0]} below 2*eps")
    if math.log2(deltas[-1] / deltas[0]) < 3 - 1e-9:
        raise GridError("slab widths must span at least 3 octaves")
    if n_directions < 32:
        raise GridError("at least 32 random directions required")
    dirs = sample_directions(mu_B.grid.d, n_directions, seed)
    m = slab_masses(mu_B, dirs, deltas, origin)
    sup = m.max(axis=1)
    fit = fit_loglog(deltas, sup, min_points=3)
    fit.extra["worst_direction"] = dirs[np.argmax(m[-1])].tolist()
    return fit
