"""Sparse dyadic grids, cell sets and discrete measures on them.

A :class:`CellSet` is stored as a sorted array of row-major linear keys,
which coincides with lexicographic order on the integer cell tuples. Cell
``i`` along an axis covers ``[i*eps, (i+1)*eps]`` with ``eps = 2**-k``, and
the box is ``[0, L]^d``.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

MAX_COORD = 2**31 - 1
MAX_KEYS = 2**62


class GridError(ValueError):
    pass


class ScaleTooFine(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    d: int
    k: int
    L: int = 1

    @property
    def n(self) -> int:
        """Addressable cells per axis."""
        return self.L << self.k

    @property
    def eps(self) -> float:
        return 2.0 ** (-self.k)

    @property
    def size(self) -> int:
        return self.n**self.d

    def coarser(self, j: int) -> "GridSpec":
        if not 0 <= j <= self.k:
            raise GridError(f"level {j} outside [0, {self.k}]")
        return GridSpec(self.d, j, self.L)

    def __str__(self):
        return f"{self.d} {self.k} {self.L}"


def make_grid(d: int, k: int, L: int = 1) -> GridSpec:
    if int(d) != d or not 1 <= d <= 3:
        raise GridError(f"dimension {d} not supported (1 <= d <= 3)")
    if int(k) != k or k < 0:
        raise GridError(f"resolution exponent must be a nonnegative integer, got {k}")
    if int(L) != L or L < 1 or (int(L) & (int(L) - 1)):
        raise GridError(f"box side must be a power of 2, got {L}")
    g = GridSpec(int(d), int(k), int(L))
    if g.n > MAX_COORD or g.size > MAX_KEYS:
        raise GridError(f"grid {g} overflows the index type")
    return g


# ---------------------------------------------------------------------------
# key <-> coordinate helpers; these accept coordinates outside the grid when
# given an explicit lower corner and extent.

def encode(coords, n, lo=0):
    c = np.asarray(coords, dtype=np.int64) - lo
    key = c[:, 0].copy()
    for a in range(1, c.shape[1]):
        key *= n
        key += c[:, a]
    return key


def decode(keys, n, d, lo=0):
    keys = np.asarray(keys, dtype=np.int64)
    out = np.empty((len(keys), d), dtype=np.int64)
    rest = keys.copy()
    for a in range(d - 1, -1, -1):
        out[:, a] = rest % n
        rest //= n
    return out + lo


class CellSet:
    """Immutable sorted set of occupied cells on a grid."""

    __slots__ = ("grid", "keys", "_cells")

    def __init__(self, grid: GridSpec, keys, *, presorted: bool = False):
        keys = np.asarray(keys, dtype=np.int64)
        if keys.ndim != 1:
            raise GridError("keys must be one-dimensional")
        if not presorted and len(keys) > 1 and not bool(np.all(keys[1:] > keys[:-1])):
            keys = np.unique(keys)
        if len(keys) and (keys[0] < 0 or keys[-1] >= grid.size):
            raise GridError("cell key outside the grid")
        keys = keys.copy() if keys.base is not None and keys.flags.writeable else keys
        keys.setflags(write=False)
        self.grid = grid
        self.keys = keys
        self._cells = None

    @classmethod
    def from_cells(cls, grid: GridSpec, cells) -> "CellSet":
        c = np.asarray(cells, dtype=np.int64).reshape(-1, grid.d)
        if len(c) and (c.min() < 0 or c.max() >= grid.n):
            raise GridError("cell coordinate outside [0, L*2^k)")
        return cls(grid, encode(c, grid.n))

    @classmethod
    def from_coords_clipped(cls, grid: GridSpec, coords) -> "CellSet":
        """Build from integer coordinates, silently dropping those off the grid."""
        c = np.asarray(coords, dtype=np.int64).reshape(-1, grid.d)
        ok = ((c >= 0) & (c < grid.n)).all(axis=1)
        return cls(grid, encode(c[ok], grid.n))

    @classmethod
    def empty(cls, grid: GridSpec) -> "CellSet":
        return cls(grid, np.empty(0, dtype=np.int64), presorted=True)

    @classmethod
    def full(cls, grid: GridSpec) -> "CellSet":
        return cls(grid, np.arange(grid.size, dtype=np.int64), presorted=True)

    @property
    def cells(self) -> np.ndarray:
        if self._cells is None:
            c = decode(self.keys, self.grid.n, self.grid.d)
            c.setflags(write=False)
            self._cells = c
        return self._cells

    def centers(self) -> np.ndarray:
        return (self.cells + 0.5) * self.grid.eps

    def __len__(self):
        return len(self.keys)

    def __bool__(self):
        return len(self.keys) > 0

    def __eq__(self, other):
        if not isinstance(other, CellSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.keys, other.keys)

    __hash__ = None

    def __repr__(self):
        return f"CellSet(grid={self.grid}, count={len(self)})"

    def _check(self, other):
        if other.grid != self.grid:
            raise GridError(f"grid mismatch: {self.grid} vs {other.grid}")

    def union(self, other: "CellSet") -> "CellSet":
        self._check(other)
        return CellSet(self.grid, np.union1d(self.keys, other.keys), presorted=True)

    def intersection(self, other: "CellSet") -> "CellSet":
        self._check(other)
        return CellSet(self.grid, np.intersect1d(self.keys, other.keys, assume_unique=True),
                       presorted=True)

    def issubset(self, other: "CellSet") -> bool:
        self._check(other)
        return bool(contains(other.keys, self.keys).all())

    def coarsen(self, j: int) -> "CellSet":
        """Cells of the level-``j`` grid that meet this set."""
        g = self.grid.coarser(j)
        if j == self.grid.k:
            return self
        shift = self.grid.k - j
        keys = encode(self.cells >> shift, g.n)
        return CellSet(g, _unique_small(keys, g.size), presorted=True)

    def refine(self, k: int) -> "CellSet":
        """Same point set on the finer level-``k`` grid."""
        if k < self.grid.k:
            raise GridError("refine needs a finer level")
        if k == self.grid.k:
            return self
        g = GridSpec(self.grid.d, k, self.grid.L)
        f = 1 << (k - self.grid.k)
        base = self.cells * f
        offs = np.stack(np.meshgrid(*[np.arange(f)] * g.d, indexing="ij"), -1).reshape(-1, g.d)
        cells = (base[:, None, :] + offs[None]).reshape(-1, g.d)
        return CellSet.from_cells(g, cells)

    # persistence -------------------------------------------------------
    def to_text(self) -> str:
        buf = io.StringIO()
        g = self.grid
        buf.write(f"{g.d} {g.k} {g.L} {len(self)}\n")
        if len(self):
            np.savetxt(buf, self.cells, fmt="%d", delimiter=" ")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "CellSet":
        lines = text.strip("\n").split("\n")
        try:
            d, k, L, count = (int(t) for t in lines[0].split())
        except ValueError as exc:
            raise GridError(f"bad header line: {lines[0]!r}") from exc
        g = make_grid(d, k, L)
        body = [ln for ln in lines[1:] if ln.strip()]
        if len(body) != count:
            raise GridError(f"header announces {count} cells, found {len(body)}")
        cells = np.array([[int(t) for t in ln.split()] for ln in body], dtype=np.int64)
        return cls.from_cells(g, cells.reshape(-1, d))

    _MAGIC = b"FICS"

    def to_bytes(self) -> bytes:
        g = self.grid
        head = struct.pack("<4sIIIQ", self._MAGIC, g.d, g.k, g.L, len(self))
        return head + self.cells.astype("<i4").tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CellSet":
        size = struct.calcsize("<4sIIIQ")
        magic, d, k, L, count = struct.unpack("<4sIIIQ", raw[:size])
        if magic != cls._MAGIC:
            raise GridError("not a binary cell-set file")
        g = make_grid(d, k, L)
        cells = np.frombuffer(raw[size:], dtype="<i4")
        if cells.size != count * d:
            raise GridError("truncated binary cell-set file")
        return cls.from_cells(g, cells.reshape(count, d).astype(np.int64))

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".bin":
            path.write_bytes(self.to_bytes())
        else:
            path.write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "CellSet":
        path = Path(path)
        if path.suffix == ".bin":
            return cls.from_bytes(path.read_bytes())
        return cls.from_text(path.read_text())


def contains(sorted_keys, queries) -> np.ndarray:
    """Membership of ``queries`` in a sorted key array."""
    queries = np.asarray(queries, dtype=np.int64)
    if len(sorted_keys) == 0:
        return np.zeros(len(queries), dtype=bool)
    pos = np.searchsorted(sorted_keys, queries)
    pos[pos == len(sorted_keys)] = 0
    return sorted_keys[pos] == queries


def _unique_small(keys, size):
    # bitmap dedupe is O(n) and avoids a sort when the key range is small
    if size <= (1 << 26) and size <= 64 * max(len(keys), 1):
        mark = np.zeros(size, dtype=bool)
        mark[keys] = True
        return np.flatnonzero(mark)
    return np.unique(keys)


# ---------------------------------------------------------------------------
# morphology

def dilate_coords(cells, r):
    """Chebyshev dilation of raw integer coordinates, no clipping; returns unique rows."""
    c = np.asarray(cells, dtype=np.int64)
    if r == 0 or len(c) == 0:
        return np.unique(c, axis=0) if len(c) else c
    d = c.shape[1]
    lo = c.min(axis=0) - r
    ext = int((c.max(axis=0) + r - lo).max()) + 1
    offs = np.arange(-r, r + 1, dtype=np.int64)
    for a in range(d):
        rep = np.repeat(c, len(offs), axis=0)
        rep[:, a] += np.tile(offs, len(c))
        keys = np.unique(encode(rep, ext, lo))
        c = decode(keys, ext, d, lo)
    return c


def dilate(A: CellSet, r: int) -> CellSet:
    """All grid cells within Chebyshev distance ``r`` (in cells) of ``A``.

    Cells that would fall outside the grid are dropped.
    """
    if r < 0 or int(r) != r:
        raise GridError("dilation radius must be a nonnegative integer")
    r = int(r)
    g = A.grid
    if r == 0 or not A:
        return A
    if g.size <= (1 << 24) and g.size <= 16 * len(A) * (2 * r + 1):
        img = np.zeros(g.size, dtype=np.uint8)
        img[A.keys] = 1
        img = img.reshape((g.n,) * g.d)
        for a in range(g.d):
            img = ndimage.maximum_filter1d(img, 2 * r + 1, axis=a, mode="constant", cval=0)
        return CellSet(g, np.flatnonzero(img.ravel()), presorted=True)
    c = A.cells
    offs = np.arange(-r, r + 1, dtype=np.int64)
    for a in range(g.d):
        rep = np.repeat(c, len(offs), axis=0)
        rep[:, a] += np.tile(offs, len(c))
        ok = (rep[:, a] >= 0) & (rep[:, a] < g.n)
        keys = np.unique(encode(rep[ok], g.n))
        c = decode(keys, g.n, g.d)
    return CellSet(g, encode(c, g.n), presorted=True)


# ---------------------------------------------------------------------------
# transforms

class Transform:
    """Point map used to move cell sets around. Subclasses set ``matrix``/``offset``
    when the map is affine."""

    matrix = None
    offset = None

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.matrix.T + self.offset

    def lipschitz(self, lo, hi) -> float:
        return float(np.linalg.norm(self.matrix, 2))


class Affine(Transform):
    def __init__(self, matrix, offset):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        self.offset = np.asarray(offset, dtype=np.float64).reshape(-1)
        if abs(np.linalg.det(self.matrix)) < 1e-12:
            raise GridError("affine map with singular linear part")


class Identity(Affine):
    def __init__(self, d):
        super().__init__(np.eye(d), np.zeros(d))


class Translation(Affine):
    def __init__(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        super().__init__(np.eye(len(z)), z)


class ReflectTranslate(Affine):
    """y -> z - y."""

    def __init__(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        super().__init__(-np.eye(len(z)), z)


class Rotation(Affine):
    """y -> g (y - center) + center for an orthogonal ``g`` (reflections allowed)."""

    def __init__(self, g, center=None):
        g = np.atleast_2d(np.asarray(g, dtype=np.float64))
        if g.shape[0] != g.shape[1]:
            raise GridError("rotation matrix must be square")
        if np.abs(g @ g.T - np.eye(len(g))).max() > 1e-9 or abs(abs(np.linalg.det(g)) - 1) > 1e-9:
            raise GridError("rotation matrix is not orthogonal")
        c = np.zeros(len(g)) if center is None else np.asarray(center, dtype=np.float64)
        super().__init__(g, c - g @ c)


class Dilation(Affine):
    """y -> t (y - center) + center."""

    def __init__(self, t, center, d=None):
        if t <= 0:
            raise GridError("dilation factor must be positive")
        c = np.asarray(center, dtype=np.float64).reshape(-1)
        super().__init__(t * np.eye(len(c)), c - t * c)


class ComponentPolynomial(Transform):
    """Diffeomorphism acting coordinatewise by polynomials (coefficients low to high).

    The Jacobian is diagonal; it must not vanish on the box where it is used.
    """

    def __init__(self, coeffs):
        self.polys = [np.polynomial.Polynomial(np.asarray(c, dtype=np.float64)) for c in coeffs]
        self.derivs = [p.deriv() for p in self.polys]

    def apply(self, pts):
        out = np.empty_like(pts, dtype=np.float64)
        for a, p in enumerate(self.polys):
            out[:, a] = p(pts[:, a])
        return out

    def check_jacobian(self, lo, hi, samples=2049):
        for a, dp in enumerate(self.derivs):
            t = np.linspace(lo[a], hi[a], samples)
            v = dp(t)
            if np.abs(v).min() < 1e-12 or (v.min() < 0 < v.max()):
                raise GridError(f"Jacobian vanishes on the box (axis {a})")

    def lipschitz(self, lo, hi):
        best = 0.0
        for a, dp in enumerate(self.derivs):
            t = np.linspace(lo[a], hi[a], 2049)
            best = max(best, float(np.abs(dp(t)).max()))
        return best * 1.01


def _signed_permutation(M):
    R = np.rint(M)
    if np.abs(M - R).max() > 1e-12:
        return None
    if not ((np.abs(R).sum(axis=0) == 1).all() and (np.abs(R).sum(axis=1) == 1).all()):
        return None
    return R.astype(np.int64)


def exact_index_map(T: Transform, src: GridSpec, out: GridSpec):
    """Return (P, o) with cell i -> P i + o when T maps cell centers to cell
    centers exactly, else None."""
    if T.matrix is None or src.k != out.k:
        return None
    P = _signed_permutation(T.matrix)
    if P is None:
        return None
    half = 0.5 * np.ones(src.d)
    o = P @ half + T.offset / src.eps - half
    oi = np.rint(o)
    if np.abs(o - oi).max() > 1e-9:
        return None
    return P, oi.astype(np.int64)


def transform_coords(A: CellSet, T: Transform, out: GridSpec) -> np.ndarray:
    """Integer coordinates (on ``out``, unclipped) of a conservative raster of T(A)."""
    src = A.grid
    if not A:
        return np.empty((0, out.d), dtype=np.int64)
    ex = exact_index_map(T, src, out)
    if ex is not None:
        P, o = ex
        return A.cells @ P.T + o
    lo_box = np.zeros(src.d)
    hi_box = np.full(src.d, float(src.L))
    if isinstance(T, ComponentPolynomial):
        T.check_jacobian(lo_box, hi_box)
        lo = T.apply(A.cells * src.eps)
        hi = T.apply((A.cells + 1) * src.eps)
        a, b = np.minimum(lo, hi), np.maximum(lo, hi)
        return _cover_boxes(a, b, out.eps)
    rho = T.lipschitz(lo_box, hi_box) * src.eps * np.sqrt(src.d) / 2 * (1 + 1e-9) + 1e-15
    pts = T.apply(A.centers())
    return _cover_balls(pts, rho, out.eps)


def _cover_boxes(a, b, eps):
    lo = np.floor(a / eps).astype(np.int64)
    hi = np.floor(b / eps).astype(np.int64)
    w = int((hi - lo).max()) + 1
    d = a.shape[1]
    offs = np.stack(np.meshgrid(*[np.arange(w)] * d, indexing="ij"), -1).reshape(-1, d)
    out = []
    step = max(1, (1 << 22) // len(offs))
    for s in range(0, len(lo), step):
        cand = lo[s:s + step, None, :] + offs[None]
        ok = (cand <= hi[s:s + step, None, :]).all(axis=-1)
        out.append(cand[ok])
    return np.concatenate(out)


def _cover_balls(pts, rho, eps):
    d = pts.shape[1]
    lo = np.floor((pts - rho) / eps).astype(np.int64)
    hi = np.floor((pts + rho) / eps).astype(np.int64)
    w = int((hi - lo).max()) + 1
    offs = np.arange(w, dtype=np.int64)
    out = []
    step = max(1, (1 << 22) // w**d)
    for s in range(0, len(pts), step):
        p, l, h = pts[s:s + step], lo[s:s + step], hi[s:s + step]
        # squared distance from p to each candidate slab, per axis, summed by broadcasting
        tot = np.zeros((len(p),) + (1,) * d)
        for a in range(d):
            cand = l[:, a, None] + offs[None]
            gap = np.maximum(np.maximum(cand * eps - p[:, a, None], p[:, a, None] - (cand + 1) * eps), 0.0)
            gap = np.where(cand <= h[:, a, None], gap * gap, np.inf)
            shape = [len(p)] + [1] * d
            shape[a + 1] = w
            tot = tot + gap.reshape(shape)
        idx = np.nonzero(tot <= rho * rho)
        out.append(l[idx[0]] + np.stack(idx[1:], axis=1))
    return np.concatenate(out)


def transform(A: CellSet, T: Transform, out: GridSpec | None = None) -> CellSet:
    """Conservative raster of T(A) on ``out`` (defaults to A's grid), clipped to the box.

    Maps that send cell centers to cell centers (identity, whole-cell
    shifts, signed axis permutations) are applied exactly.
    """
    out = A.grid if out is None else out
    if out.d != A.grid.d:
        raise GridError("dimension mismatch")
    return CellSet.from_coords_clipped(out, transform_coords(A, T, out))


# ---------------------------------------------------------------------------
# measures

@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    support: CellSet
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.support),):
            raise GridError("one weight per support cell required")
        if len(w) and w.min() <= 0:
            raise GridError("weights must be strictly positive")
        if abs(float(np.sum(w)) - 1.0) > 1e-9:
            raise GridError(f"weights sum to {float(np.sum(w))!r}, not 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def grid(self) -> GridSpec:
        return self.support.grid

    def centers(self):
        return self.support.centers()

    @classmethod
    def from_unnormalized(cls, support: CellSet, raw, label=""):
        raw = np.asarray(raw, dtype=np.float64)
        return cls(support, raw / raw.sum(), label)


def uniform_measure(A: CellSet, label: str = "") -> DiscreteMeasure:
    if not A:
        raise GridError("uniform measure on an empty set")
    return DiscreteMeasure(A, np.full(len(A), 1.0 / len(A)), label)


def ball_mass(mu: DiscreteMeasure, x, delta: float) -> float:
    """Weight of the cells whose centers lie within Euclidean distance delta of x."""
    eps = mu.grid.eps
    if delta < 2 * eps:
        raise ScaleTooFine(f"radius {delta} below 2*eps = {2 * eps}")
    if np.isinf(delta):
        return 1.0
    diff = mu.centers() - np.asarray(x, dtype=np.float64)
    inside = np.einsum("ij,ij->i", diff, diff) <= delta * delta
    if inside.all():
        return 1.0
    return float(mu.weights[inside].sum())


def ball_masses_at_cells(mu: DiscreteMeasure, cells, delta: float) -> np.ndarray:
    """ball_mass evaluated at the centers of the given integer cells."""
    g = mu.grid
    cells = np.asarray(cells, dtype=np.int64)
    r2 = (delta / g.eps) ** 2
    if g.size <= (1 << 26):
        return _prefix_ball_masses(mu, cells, r2)
    from scipy.spatial import cKDTree

    tree = cKDTree(mu.support.cells.astype(np.float64))
    hits = tree.query_ball_point(cells.astype(np.float64), np.sqrt(r2) * (1 + 1e-12))
    w = mu.weights
    out = np.empty(len(cells))
    for i, h in enumerate(hits):
        h = np.asarray(h, dtype=np.int64)
        diff = mu.support.cells[h] - cells[i]
        keep = (diff * diff).sum(axis=1) <= r2
        out[i] = w[h[keep]].sum()
    return out


def _prefix_ball_masses(mu, cells, r2):
    g = mu.grid
    n, d = g.n, g.d
    dense = np.zeros(g.size)
    dense[mu.support.keys] = mu.weights
    dense = dense.reshape((n,) * d)
    pref = np.concatenate([np.zeros((n,) * (d - 1) + (1,)), np.cumsum(dense, axis=-1)], axis=-1)
    R = int(np.floor(np.sqrt(r2)))
    out = np.zeros(len(cells))
    last = cells[:, -1]
    lead = cells[:, :-1]
    grids = np.meshgrid(*[np.arange(-R, R + 1)] * (d - 1), indexing="ij") if d > 1 else []
    offsets = np.stack([m.ravel() for m in grids], -1) if d > 1 else np.zeros((1, 0), dtype=np.int64)
    for off in offsets:
        rem = r2 - float((off * off).sum())
        if rem < 0:
            continue
        h = int(np.floor(np.sqrt(rem)))
        while (h + 1) * (h + 1) <= rem:
            h += 1
        while h * h > rem:
            h -= 1
        rows = lead + off
        ok = ((rows >= 0) & (rows < n)).all(axis=1) if d > 1 else np.ones(len(cells), bool)
        lo = np.clip(last - h, 0, n)
        hi = np.clip(last + h + 1, 0, n)
        idx = tuple(rows[ok].T)
        out[ok] += pref[idx + (hi[ok],)] - pref[idx + (lo[ok],)]
    return out


@dataclass
class AhlforsReport:
    s: float
    C_best: float
    deltas: list
    worst_ratios: list
    passed: bool
    C_max: float
    n_centers: int = 0
    extra: dict = field(default_factory=dict)


def ad_regularity_check(mu: DiscreteMeasure, s: float, deltas, C_max: float,
                        seed: int = 0, max_centers: int = 10_000) -> AhlforsReport:
    """Smallest C with C^-1 delta^s <= mu(B(x, delta)) <= C delta^s over support centers."""
    deltas = [float(t) for t in deltas]
    if not deltas:
        raise GridError("empty delta range")
    g = mu.grid
    for t in deltas:
        if t < 2 * g.eps:
            raise ScaleTooFine(f"radius {t} below 2*eps")
    cells = mu.support.cells
    if len(cells) > max_centers:
        rng = np.random.default_rng(seed)
        cells = cells[np.sort(rng.choice(len(cells), max_centers, replace=False))]
    worst = []
    for t in deltas:
        m = ball_masses_at_cells(mu, cells, t)
        ratio = m / t**s
        worst.append(float(max(ratio.max(), 1.0 / ratio.min())))
    C_best = max(worst)
    return AhlforsReport(s, C_best, deltas, worst, C_best <= C_max, C_max, len(cells))


def dyadic_deltas(lo: float, hi: float) -> list:
    """Powers of two in [lo, hi]."""
    a = int(np.ceil(np.log2(lo) - 1e-12))
    b = int(np.floor(np.log2(hi) + 1e-12))
    return [2.0**e for e in range(a, b + 1)]
