"""Covering numbers of intersections A ∩ T(B) and level-set slices, averaged over samples.

Covering counts at scale 2^-j use a per-scale thickening: both sets are
taken at level f = min(j + kappa, k), thickened by one level-f cell, and
the intersection is box counted at level j. Thickening at the counting
scale keeps near-tangential contacts from being counted at the resolution
of the finest grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial.transform import Rotation as _ScipyRotation

from .estimators import DecayFit, fit_loglog, minkowski_dim
from .grid import (
    Affine, CellSet, DiscreteMeasure, GridError, GridSpec, Transform, ReflectTranslate,
    _unique_small, contains, decode, dilate, dilate_coords, encode, make_grid, transform_coords,
)
from .maps import MapSpec, gradients_independent, phong_stein_det, sample_level_set
from .parallel import ordered_map
from .thresholds import Thresholds, predict

KAPPA = 2
DENSE_MAX = 1 << 24
TOLERANCE = 0.15


@dataclass
class CoveringRecord:
    sample: int
    params: dict
    j: int
    epsilon: float
    N: int


@dataclass
class ExperimentResult:
    kind: str
    records: list
    levels: list
    averaged_counts: np.ndarray
    fitted_slope: DecayFit
    threshold: Thresholds
    verdict: str
    exceptional_fraction: float
    gammas: np.ndarray
    tolerance: float = TOLERANCE
    extra: dict = field(default_factory=dict)

    @property
    def prediction(self) -> float:
        return self.threshold.predicted_intersection_dim

    def counts_matrix(self) -> np.ndarray:
        return counts_matrix(self.records, self.levels)


def default_ladder(k: int, n: int = 5, kappa: int = KAPPA) -> list:
    """n counting levels ending at k - kappa, so every level is thickened at a finer one."""
    top = max(k - kappa, min(k, n))
    return list(range(max(1, top - n + 1), top + 1))


def counts_matrix(records, levels) -> np.ndarray:
    ids = sorted({r.sample for r in records})
    pos = {s: i for i, s in enumerate(ids)}
    col = {j: i for i, j in enumerate(levels)}
    M = np.zeros((len(ids), len(levels)), dtype=np.int64)
    for r in records:
        M[pos[r.sample], col[r.j]] = r.N
    return M


def per_sample_gamma(counts, levels) -> np.ndarray:
    """Slope of log2 N_j against j for each sample; NaN when any N_j vanishes."""
    counts = np.asarray(counts, dtype=np.float64)
    js = np.asarray(levels, dtype=np.float64)
    out = np.full(len(counts), np.nan)
    ok = (counts > 0).all(axis=1)
    if ok.any():
        y = np.log2(counts[ok])
        jc = js - js.mean()
        out[ok] = (y - y.mean(axis=1, keepdims=True)) @ jc / (jc @ jc)
    return out


def summarize(records, levels, prediction: float, tol: float = TOLERANCE, margin: float = TOLERANCE,
              reduce: str = "mean"):
    """Averaged counts, fitted slope, verdict and exceptional fraction from records alone."""
    M = counts_matrix(records, levels)
    avg = M.mean(axis=0)
    if (avg <= 0).any():
        raise GridError("average covering count vanishes at some scale; samples miss the sets")
    fit = fit_loglog(2.0 ** np.asarray(levels), avg)
    fit.scale_range = (2.0 ** -max(levels), 2.0 ** -min(levels))
    gam = per_sample_gamma(M, levels)
    exc = float(np.mean(np.nan_to_num(gam, nan=-np.inf) > prediction + margin))
    verdict = "bound-respected" if fit.slope <= prediction + tol else "bound-violated"
    return avg, fit, verdict, exc, gam


# ---------------------------------------------------------------------------
# thickened pyramids

class Pyramid:
    """Per-level thickened copies of A: dilate(coarsen(A, f), 1) for each needed f."""

    def __init__(self, A: CellSet, levels, kappa: int = KAPPA):
        self.A = A
        self.grid = A.grid
        self.kappa = kappa
        self.levels = list(levels)
        k = A.grid.k
        for j in self.levels:
            if not 0 <= j <= k:
                raise GridError(f"ladder level {j} outside [0, {k}]")
        self.f_of = {j: min(j + kappa, k) for j in self.levels}
        self.plus = {}
        for f in sorted(set(self.f_of.values())):
            self.plus[f] = dilate(A.coarsen(f), 1)
        self.dense = {}
        for f, P in self.plus.items():
            if P.grid.size <= DENSE_MAX:
                img = np.zeros(P.grid.size, dtype=bool)
                img[P.keys] = True
                self.dense[f] = img.reshape((P.grid.n,) * P.grid.d)
        self._tower = {}
        self._near = {}

    def near(self, f, drop: int = 3):
        """(l, keys) with l = f - drop: level-l cells within one step of coarsen(A_f^+, l)."""
        l = max(0, f - drop)
        if f not in self._near:
            self._near[f] = dilate(self.plus[f].coarsen(l), 1).keys
        return l, self._near[f]

    def tower(self, f):
        """Keys of coarsen(A_f^+, l) for l = 0..f."""
        if f not in self._tower:
            P = self.plus[f]
            self._tower[f] = [P.coarsen(l).keys for l in range(f + 1)]
        return self._tower[f]


def _raw_unique(coords):
    if len(coords) == 0:
        return coords
    lo = coords.min(axis=0)
    ext = int((coords.max(axis=0) - lo).max()) + 1
    return decode(np.unique(encode(coords, ext, lo)), ext, coords.shape[1], lo)


def covering_counts_from_coords(P: Pyramid, coords_k: np.ndarray) -> list:
    """Counts N_j for the set whose level-k raster has raw coordinates ``coords_k``."""
    g = P.grid
    if len(coords_k) == 0:
        return [0] * len(P.levels)
    hits = _hits_dense(P, coords_k)
    if hits is None:
        hits = _hits_sparse(P, coords_k)
    out = []
    for j in P.levels:
        f = P.f_of[j]
        hit = hits[f]
        if len(hit) == 0:
            out.append(0)
            continue
        nj = g.L << j
        out.append(len(_unique_small(encode(hit >> (f - j), nj), nj**g.d)))
    return out


def _hits_dense(P: Pyramid, c):
    # one level-k bitmap over the raw bounding box, block-reduced to every needed level
    g = P.grid
    fs = sorted(set(P.f_of.values()), reverse=True)
    if any(f not in P.dense for f in fs):
        return None
    step = 1 << (g.k - fs[-1] + 1)
    lo = (c.min(axis=0) // step - 1) * step
    hi = (c.max(axis=0) // step + 2) * step
    ext = hi - lo
    if int(np.prod(ext)) > min(4 * DENSE_MAX, 64 * len(c)):
        return None
    img = np.zeros(int(np.prod(ext)), dtype=bool)
    img[encode_box(c - lo, ext)] = True
    img = img.reshape(tuple(int(e) for e in ext))
    level, out = g.k, {}
    for f in fs:
        while level > f:
            img = _halve(img)
            level -= 1
        out[f] = _thicken_meet(P, img, lo >> (g.k - f), f)
    return out


def _halve(img):
    d = img.ndim
    shape = []
    for e in img.shape:
        shape += [e // 2, 2]
    return img.reshape(shape).any(axis=tuple(range(1, 2 * d, 2)))


def _thicken_meet(P: Pyramid, img, lo, f):
    nf = P.grid.L << f
    for a in range(img.ndim):
        img = ndimage.maximum_filter1d(img, 3, axis=a, mode="constant", cval=0)
    a0 = np.clip(lo, 0, nf)
    a1 = np.clip(lo + np.array(img.shape), 0, nf)
    if (a1 <= a0).any():
        return np.empty((0, img.ndim), np.int64)
    win = tuple(slice(int(u - v), int(w - v)) for u, w, v in zip(a0, a1, lo))
    sub = img[win] & P.dense[f][tuple(slice(int(u), int(w)) for u, w in zip(a0, a1))]
    return np.argwhere(sub).astype(np.int64) + a0


def _hits_sparse(P: Pyramid, c):
    g = P.grid
    c = _raw_unique(c)
    out = {}
    for f in sorted(set(P.f_of.values()), reverse=True):
        nf = g.L << f
        cf = _raw_unique(c >> (g.k - f))
        # cells more than one step outside the grid cannot reach it
        cf = cf[((cf >= -1) & (cf <= nf)).all(axis=1)]
        l, near = P.near(f)
        if l < f and len(cf):
            par = np.clip(cf, 0, nf - 1) >> (f - l)
            cf = cf[contains(near, encode(par, g.L << l))]
        if len(cf) == 0:
            out[f] = np.empty((0, g.d), np.int64)
            continue
        cf = dilate_coords(cf, 1)
        ok = ((cf >= 0) & (cf < nf)).all(axis=1)
        keys = encode(cf[ok], nf) if ok.any() else np.empty(0, np.int64)
        out[f] = decode(keys[contains(P.plus[f].keys, keys)], nf, g.d)
    return out


def encode_box(c, ext):
    """Row-major keys of coordinates inside a box with per-axis extents ``ext``."""
    key = np.zeros(len(c), dtype=np.int64)
    for a in range(c.shape[1]):
        key = key * int(ext[a]) + c[:, a]
    return key


def covering_number(A: CellSet, B: CellSet, T: Transform, j: int, kappa: int = KAPPA) -> int:
    """Box count at 2^-j of the one-cell thickenings of A and T(B), taken at level min(j+kappa, k)."""
    if A.grid != B.grid:
        raise GridError("A and B must share a grid")
    P = Pyramid(A, [j], kappa)
    return covering_counts_from_coords(P, transform_coords(B, T, A.grid))[0]


# ---------------------------------------------------------------------------
# sampling

def snap(x, k):
    """Round points to the level-k vertex lattice (keeps translations exact on the grid)."""
    return np.round(np.asarray(x, dtype=np.float64) * (1 << k)) / (1 << k)


@dataclass
class XSampler:
    """Sampling law for the translation parameter x.

    kind: ``tent`` (product of tent profiles on [lo, hi]), ``uniform`` on
    [lo, hi], ``measure`` (cells drawn by weight, uniform inside) or
    ``points`` (the given rows, cycled in order).
    """

    kind: str = "tent"
    lo: object = None
    hi: object = None
    measure: DiscreteMeasure = None
    points: np.ndarray = None

    def draw(self, rng, n, d):
        if self.kind == "tent":
            lo, hi = np.broadcast_to(self.lo, d), np.broadcast_to(self.hi, d)
            return rng.triangular(lo, (lo + hi) / 2, hi, size=(n, d))
        if self.kind == "uniform":
            lo, hi = np.broadcast_to(self.lo, d), np.broadcast_to(self.hi, d)
            return rng.uniform(lo, hi, size=(n, d))
        if self.kind == "measure":
            mu = self.measure
            idx = rng.choice(len(mu.weights), size=n, p=mu.weights)
            return (mu.support.cells[idx] + rng.uniform(0, 1, (n, d))) * mu.grid.eps
        if self.kind == "points":
            pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
            return pts[np.arange(n) % len(pts)]
        raise GridError(f"unknown sampler {self.kind!r}")


def sum_box(A: CellSet, B: CellSet):
    """Bounding box of A + B."""
    ca, cb = A.cells, B.cells
    e = A.grid.eps
    return (ca.min(axis=0) + cb.min(axis=0)) * e, (ca.max(axis=0) + cb.max(axis=0) + 2) * e


def _streams(seed):
    ss = np.random.SeedSequence(seed)
    g_ss, t_ss = ss.spawn(2)
    return np.random.default_rng(ss), np.random.default_rng(g_ss), np.random.default_rng(t_ss)


def haar_orthogonal(d: int, n: int, rng) -> np.ndarray:
    """n Haar-distributed elements of O(d), reflections included with probability 1/2."""
    if d == 2:
        th = rng.uniform(0, 2 * np.pi, n)
        c, s = np.cos(th), np.sin(th)
        G = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], 1)
    elif d == 3:
        G = _ScipyRotation.random(n, random_state=rng).as_matrix()
    else:
        raise GridError("Haar sampling implemented for d in {2, 3}")
    flip = rng.uniform(size=n) < 0.5
    if d == 2:
        G[flip, :, 1] *= -1
    else:
        G[flip] *= -1
    return G


def _centre(B: CellSet):
    c = B.cells
    return (c.min(axis=0) + c.max(axis=0) + 1) * B.grid.eps / 2


def _motion(x, c_B, g=None, t=1.0):
    """y -> x - c_B - t g (y - c_B) as an affine map; identity g and t = 1 give x - y."""
    d = len(x)
    if g is None and t == 1.0:
        return ReflectTranslate(x)
    M = -t * (np.eye(d) if g is None else np.asarray(g, dtype=np.float64))
    return Affine(M, x - c_B - M @ c_B)


# ---------------------------------------------------------------------------
# experiments over motions of B

def _run_motions(kind, A, B, params_list, levels, kappa, threshold, tol, c_B):
    if A.grid != B.grid:
        raise GridError("A and B must share a grid")
    P = Pyramid(A, levels, kappa)

    def work(p):
        T = _motion(p["x"], c_B, p.get("g"), p.get("t", 1.0))
        return covering_counts_from_coords(P, transform_coords(B, T, A.grid))

    counts = ordered_map(work, params_list)
    recs = _records(params_list, counts, levels)
    avg, fit, verdict, exc, gam = summarize(recs, levels, threshold.predicted_intersection_dim, tol)
    return ExperimentResult(kind, recs, list(levels), avg, fit, threshold, verdict, exc, gam, tol)


def _records(params_list, counts, levels):
    recs = []
    for i, (p, row) in enumerate(zip(params_list, counts)):
        for j, N in zip(levels, row):
            recs.append(CoveringRecord(i, p, j, 2.0**-j, int(N)))
    return recs


def _xs(sampler, A, B, n, rng, k):
    if sampler is None:
        lo, hi = sum_box(A, B)
        sampler = XSampler("tent", lo, hi)
    return snap(sampler.draw(rng, n, A.grid.d), k)


def translation_experiment(A: CellSet, B: CellSet, s_A: float, s_B: float, *, n_samples: int = 64,
                           levels=None, sampler: XSampler | None = None, seed: int = 0,
                           diffeo: Transform | None = None, theorem: str = "translation",
                           theorem_inputs: dict | None = None, kappa: int = KAPPA,
                           tol: float = TOLERANCE) -> ExperimentResult:
    """Average N(x, eps) for A ∩ (s(x) - B) with x drawn from ``sampler``."""
    if n_samples < 64:
        raise GridError("at least 64 samples required")
    levels = default_ladder(A.grid.k) if levels is None else list(levels)
    if not levels:
        raise GridError("empty scale ladder")
    rng, _, _ = _streams(seed)
    xs = _xs(sampler, A, B, n_samples, rng, A.grid.k)
    if diffeo is not None:
        xs = snap(diffeo.apply(xs), A.grid.k)
    th = predict(theorem, d=A.grid.d, s_A=s_A, s_B=s_B, **(theorem_inputs or {}))
    params = [{"x": x} for x in xs]
    return _run_motions("translate", A, B, params, levels, kappa, th, tol, _centre(B))


def rotation_experiment(A: CellSet, B: CellSet, s_A: float, s_B: float, alpha: float, *,
                        n_rotations: int = 16, n_translations: int = 8, levels=None,
                        sampler: XSampler | None = None, seed: int = 0, fixed_g=None,
                        kappa: int = KAPPA, tol: float = TOLERANCE) -> ExperimentResult:
    """Average over Haar g and x of N(x, g, eps) for A ∩ (x - c_B - g(B - c_B))."""
    d = A.grid.d
    if d < 2:
        raise GridError("rotation experiments need d >= 2")
    n = n_rotations * n_translations
    if n < 64:
        raise GridError("at least 64 samples required")
    levels = default_ladder(A.grid.k) if levels is None else list(levels)
    rng, g_rng, _ = _streams(seed)
    c_B = _centre(B)
    if sampler is None:
        lo, hi = sum_box(A, B)
        sampler = XSampler("uniform", lo, hi)
    xs = snap(sampler.draw(rng, n, d), A.grid.k)
    if fixed_g is not None:
        G = np.broadcast_to(np.asarray(fixed_g, dtype=np.float64), (n_rotations, d, d))
    else:
        G = haar_orthogonal(d, n_rotations, g_rng)
    params = []
    for i in range(n_rotations):
        g = G[i]
        is_id = np.array_equal(g, np.eye(d))
        for jx in range(n_translations):
            p = {"x": xs[i * n_translations + jx], "rot": i}
            if not is_id:
                p["g"] = g
            params.append(p)
    th = predict("rotation", d=d, s_A=s_A, s_B=s_B, alpha=alpha)
    res = _run_motions("rotate", A, B, params, levels, kappa, th, tol, c_B)
    res.extra["rotations"] = G
    return res


def dilation_experiment(A: CellSet, B: CellSet, s_A: float, s_B: float, alpha: float, h: float, *,
                        t_grid=None, n_samples: int = 64, levels=None, sampler=None, seed: int = 0,
                        kappa: int = KAPPA, tol: float = TOLERANCE) -> ExperimentResult:
    """Average over t in t_grid and x of N(x, t, eps) for A ∩ (x - c_B - t(B - c_B))."""
    t_grid = np.linspace(1, 2, 16) if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    if (t_grid < 1).any() or (t_grid > 2).any():
        raise GridError("dilation factors must lie in [1, 2]")
    if n_samples < 64:
        raise GridError("at least 64 samples required")
    levels = default_ladder(A.grid.k) if levels is None else list(levels)
    rng, _, _ = _streams(seed)
    xs = _xs(sampler, A, B, n_samples, rng, A.grid.k)
    params = [{"x": x, "t": float(t)} for x in xs for t in t_grid]
    th = predict("dilation", d=A.grid.d, s_A=s_A, s_B=s_B, alpha=alpha, h=h)
    return _run_motions("dilate", A, B, params, levels, kappa, th, tol, _centre(B))


# ---------------------------------------------------------------------------
# level sets

def levelset_counts(P: Pyramid, conds, count_slack: float = 1.0) -> list:
    """N_j for {y in A_f^+ : |phi_l(x_l, y) - t_l| <= eps_j for all l}, by hierarchical descent.

    ``conds`` is a list of (MapSpec, x, t). A level-l cell survives when it
    lies in the coarsened A_f^+ and every |phi - t| at its centre is within
    the Lipschitz reach of the cell plus eps_j; at level f the centre test
    alone decides.
    """
    g = P.grid
    d = g.d
    children = np.stack(np.meshgrid(*[np.arange(2)] * d, indexing="ij"), -1).reshape(-1, d)
    box_lo = np.zeros(d)
    box_hi = np.full(d, float(g.L))
    lips = [spec.lipschitz_y(x, box_lo, box_hi) for spec, x, _ in conds]
    out = []
    for j in P.levels:
        f = P.f_of[j]
        eps_j = 2.0**-j * count_slack
        tower = P.tower(f)
        cells = decode(tower[0], g.L, d)
        for l in range(f + 1):
            nl = g.L << l
            if l > 0:
                cells = ((cells * 2)[:, None, :] + children[None]).reshape(-1, d)
                cells = cells[contains(tower[l], encode(cells, nl))]
            h = 2.0**-l
            ctr = (cells + 0.5) * h
            reach = 0.0 if l == f else np.sqrt(d) / 2 * h
            keep = np.ones(len(cells), dtype=bool)
            for (spec, x, t), lip in zip(conds, lips):
                val = spec(np.broadcast_to(x, ctr.shape), ctr) - t
                keep &= np.abs(val) <= lip * reach + eps_j
            cells = cells[keep]
            if len(cells) == 0:
                break
        if len(cells) == 0:
            out.append(0)
        else:
            out.append(len(np.unique(encode(cells >> (f - j), g.L << j))))
    return out


def _check_curvature(spec, t, d, seed, x_box, y_box):
    x, y = sample_level_set(spec, t, 100, d, seed=seed, x_box=x_box, y_box=y_box)
    m = phong_stein_det(spec, (x, y))
    if m < 1e-6:
        raise GridError(f"rotational curvature degenerates: min |det| = {m:.3g}")
    return m, (x, y)


def level_set_experiment(A: CellSet, maps, t, s_A: float, *, alpha=None, samplers=None,
                         n_samples: int = 64, levels=None, seed: int = 0, kappa: int = KAPPA,
                         tol: float = TOLERANCE, check_curvature: bool = True) -> ExperimentResult:
    """Average slice counts for {y in A : phi_l(x_l, y) = t_l} with one or two equations.

    With two maps the points x_1, x_2 are drawn independently from their own
    samplers (product measure).
    """
    maps = [maps] if isinstance(maps, MapSpec) else list(maps)
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    m = len(maps)
    if m not in (1, 2) or len(ts) != m:
        raise GridError("one or two equations with one level each")
    if n_samples < 64:
        raise GridError("at least 64 samples required")
    d = A.grid.d
    levels = default_ladder(A.grid.k) if levels is None else list(levels)
    samplers = _default_samplers(A, samplers, m)
    rng, _, _ = _streams(seed)
    xs = [snap(s.draw(rng, n_samples, d), A.grid.k) for s in samplers]
    extra = {}
    if check_curvature:
        box = (0.0, float(A.grid.L))
        for i, (spec, tt) in enumerate(zip(maps, ts)):
            xb = (float(np.min(xs[i])), float(np.max(xs[i])))
            extra[f"min_det_{i}"], _ = _check_curvature(spec, tt, d, seed, xb, (box[0] - 1, box[1] + 1))
        if m == 2:
            y = _pick_common_points(maps, xs, ts, A)
            if y is not None and not gradients_independent(maps, [y[0], y[1]], y[2]):
                raise GridError("the two gradient families are dependent on the level set")
    if m == 1:
        th = predict("levelset", d=d, s_A=s_A, alpha=alpha if alpha is not None else d)
    else:
        a = alpha if alpha is not None else d
        a1, a2 = (a, a) if np.isscalar(a) else a
        th = predict("two-surface", d=d, s_A=s_A, alpha1=a1, alpha2=a2)
    P = Pyramid(A, levels, kappa)
    params = [{f"x{i + 1}": xs[i][n] for i in range(m)} | {"t": ts.tolist()} for n in range(n_samples)]

    def work(n):
        conds = [(maps[i], xs[i][n], ts[i]) for i in range(m)]
        return levelset_counts(P, conds)

    counts = ordered_map(work, range(n_samples))
    recs = _records(params, counts, levels)
    avg, fit, verdict, exc, gam = summarize(recs, levels, th.predicted_intersection_dim, tol)
    res = ExperimentResult("levelset" if m == 1 else "two-surface", recs, levels, avg, fit, th,
                           verdict, exc, gam, tol, extra)
    return res


def _default_samplers(A, samplers, m):
    if samplers is None:
        L = float(A.grid.L)
        return [XSampler("uniform", 0.0, L)] * m
    if isinstance(samplers, XSampler):
        return [samplers] * m
    return list(samplers)


def _pick_common_points(maps, xs, ts, A):
    # a few points on both level sets, found by Newton steps from A's centres
    y = A.centers()[:: max(1, len(A) // 200)]
    x1 = np.broadcast_to(xs[0][0], y.shape)
    x2 = np.broadcast_to(xs[1][0], y.shape)
    for _ in range(50):
        r = np.stack([maps[0](x1, y) - ts[0], maps[1](x2, y) - ts[1]], 1)
        J = np.stack([maps[0].grad_y(x1, y), maps[1].grad_y(x2, y)], 1)
        step = np.linalg.pinv(J) @ r[:, :, None]
        y = y - step[:, :, 0]
    r = np.abs(np.stack([maps[0](x1, y) - ts[0], maps[1](x2, y) - ts[1]], 1)).max(axis=1)
    ok = r < 1e-9
    if not ok.any():
        return None
    return x1[ok], x2[ok], y[ok]


def maximal_experiment(A: CellSet, spec: MapSpec, s_A: float, alpha: float, *, t_grid=None,
                       n_samples: int = 64, levels=None, sampler=None, seed: int = 0,
                       kappa: int = KAPPA, tol: float = TOLERANCE) -> ExperimentResult:
    """Per x the largest slice count over t_grid, then averaged over x."""
    t_grid = np.linspace(1, 2, 16) if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    if n_samples < 64:
        raise GridError("at least 64 samples required")
    d = A.grid.d
    levels = default_ladder(A.grid.k) if levels is None else list(levels)
    sampler = _default_samplers(A, sampler, 1)[0]
    rng, _, _ = _streams(seed)
    xs = snap(sampler.draw(rng, n_samples, d), A.grid.k)
    th = predict("maximal", d=d, s_A=s_A, alpha=alpha)
    P = Pyramid(A, levels, kappa)

    def work(n):
        rows = [levelset_counts(P, [(spec, xs[n], float(t))]) for t in t_grid]
        return np.max(np.asarray(rows), axis=0).tolist()

    counts = ordered_map(work, range(n_samples))
    params = [{"x": x, "t": "max"} for x in xs]
    recs = _records(params, counts, levels)
    avg, fit, verdict, exc, gam = summarize(recs, levels, th.predicted_intersection_dim, tol)
    return ExperimentResult("maximal", recs, levels, avg, fit, th, verdict, exc, gam, tol)


# ---------------------------------------------------------------------------
# exceptional sets and the inverse bound

@dataclass
class ExceptionalReport:
    cells: CellSet
    fit: DecayFit | None
    empty: bool
    predicted: float | None
    threshold: float

    @property
    def dimension(self) -> float:
        return 0.0 if self.empty or self.fit is None else self.fit.slope


def x_grid(kx: int, d: int, L: int = 1):
    """Centres of a regular level-kx grid of translation parameters over [0, L]^d."""
    g = make_grid(d, kx, L)
    return g, CellSet.full(g).centers()


def exceptional_set_dim(gammas, xgrid: GridSpec, threshold: float, margin: float = TOLERANCE,
                        predicted: float | None = None, levels=None) -> ExceptionalReport:
    """Minkowski fit of the x-cells whose gamma exceeds threshold + margin.

    ``gammas`` is indexed like the row-major full grid ``xgrid``.
    """
    gam = np.asarray(gammas, dtype=np.float64)
    if gam.shape != (xgrid.size,):
        raise GridError("one gamma per x-grid cell required")
    levels = default_ladder(xgrid.k, 4, kappa=0) if levels is None else list(levels)
    if len(levels) < 4:
        raise GridError("exceptional set needs at least 4 scales of the x-grid")
    hit = np.flatnonzero(np.nan_to_num(gam, nan=-np.inf) > threshold + margin)
    cells = CellSet(xgrid, hit, presorted=True)
    if not cells:
        return ExceptionalReport(cells, None, True, predicted, threshold)
    return ExceptionalReport(cells, minkowski_dim(cells, levels), False, predicted, threshold)


def motion_gammas(A: CellSet, B: CellSet, xs, levels=None, kappa: int = KAPPA, g=None, t=1.0):
    """Per-x slopes for A ∩ (x - c_B - t g (B - c_B)) at the given x points."""
    levels = default_ladder(A.grid.k) if levels is None else list(levels)
    P = Pyramid(A, levels, kappa)
    c_B = _centre(B)
    xs = snap(xs, A.grid.k)

    def work(x):
        return covering_counts_from_coords(P, transform_coords(B, _motion(x, c_B, g, t), A.grid))

    counts = np.asarray(ordered_map(work, list(xs)))
    return per_sample_gamma(counts, levels), counts


@dataclass
class InverseReport:
    gamma_uniform: float
    witness: np.ndarray
    best_t: np.ndarray
    gammas: np.ndarray
    lower_bound: float
    dim_E: float
    holds: bool
    threshold: Thresholds


def inverse_experiment(E: CellSet, spec: MapSpec, U_samples, t_grid, *, levels=None,
                       kappa: int = KAPPA, slack: float = 0.1) -> InverseReport:
    """For each x in U pick t(x) maximizing the slice slope; check d*gamma/(d-1) <= dim E + slack."""
    U = np.atleast_2d(np.asarray(U_samples, dtype=np.float64))
    if len(U) == 0:
        raise GridError("no sample points in U")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    d = E.grid.d
    levels = default_ladder(E.grid.k) if levels is None else list(levels)
    P = Pyramid(E, levels, kappa)

    def work(x):
        rows = np.asarray([levelset_counts(P, [(spec, x, float(t))]) for t in t_grid])
        gam = per_sample_gamma(rows, levels)
        gam = np.nan_to_num(gam, nan=-np.inf)
        i = int(np.argmax(gam))
        return gam[i], t_grid[i]

    res = ordered_map(work, list(U))
    gam = np.array([r[0] for r in res])
    best_t = np.array([r[1] for r in res])
    w = int(np.argmin(gam))
    g_u = float(max(gam[w], 0.0))
    th = predict("inverse", d=d, gamma=g_u if g_u > 0 else 1e-12)
    dim_E = minkowski_dim(E).slope
    bound = d * g_u / (d - 1)
    return InverseReport(g_u, U[w], best_t, gam, bound, dim_E, bound <= dim_E + slack, th)


def level_gammas(A: CellSet, spec: MapSpec, t: float, xs, levels=None, kappa: int = KAPPA):
    """Per-x slopes of the one-equation slice counts at the given x points."""
    levels = default_ladder(A.grid.k) if levels is None else list(levels)
    P = Pyramid(A, levels, kappa)
    xs = snap(xs, A.grid.k)
    counts = np.asarray(ordered_map(lambda x: levelset_counts(P, [(spec, x, t)]), list(xs)))
    return per_sample_gamma(counts, levels), counts
