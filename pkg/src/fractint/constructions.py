"""Generators for the sets and measures used by the experiments.

Everything is built exactly on the dyadic grid where possible: Cantor sets
with ratio 2^-p, lattice thickenings through integer arithmetic, and
surfaces through an exact min/max test of a separable defining function
over each cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import CellSet, DiscreteMeasure, GridError, GridSpec, decode, encode, make_grid

SURFACES = ("sphere", "paraboloid-graph", "superellipsoid", "hyperplane-patch")


@dataclass(frozen=True)
class ConstructionDescriptor:
    kind: str
    params: dict = field(default_factory=dict)
    design_dimension: float = float("nan")

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"


def _ratio_exponent(r) -> int:
    p = -math.log2(float(r))
    if p < 1 or abs(p - round(p)) > 1e-12:
        raise GridError(f"dissection ratio must be 2^-p with p >= 1, got {r}")
    return int(round(p))


def cantor_positions(p: int, n: int) -> np.ndarray:
    """Left endpoints, in units of 2^(-n p), of the generation-n intervals."""
    pos = np.zeros(1, dtype=np.int64)
    last = (1 << p) - 1
    for _ in range(n):
        pos = np.concatenate([pos << p, (pos << p) + last])
    return np.sort(pos)


def cantor_set(r, n: int, grid: GridSpec) -> CellSet:
    """Generation ``n`` of the Cantor set keeping the first and last ratio-r pieces."""
    if grid.d != 1:
        raise GridError("cantor_set lives on a 1-D grid")
    p = _ratio_exponent(r)
    if grid.k < n * p:
        raise GridError(f"grid too coarse: need k >= {n * p}, have {grid.k}")
    width = 1 << (grid.k - n * p)
    starts = cantor_positions(p, n) * width
    keys = (starts[:, None] + np.arange(width)[None, :]).ravel()
    return CellSet(grid, keys)


def f_alpha(r, n: int, grid: GridSpec) -> CellSet:
    """Cantor set together with its translate by 1."""
    if grid.L < 2:
        raise GridError("f_alpha needs a box of side at least 2")
    C = cantor_set(r, n, grid)
    return CellSet(grid, np.concatenate([C.keys, C.keys + (1 << grid.k)]))


def unit_box(grid: GridSpec, lo=0.0, hi=1.0) -> CellSet:
    """Cells covering the cube [lo, hi]^d (dyadic endpoints are exact)."""
    a = int(math.floor(lo * (1 << grid.k)))
    b = int(math.ceil(hi * (1 << grid.k)))
    a, b = max(a, 0), min(b, grid.n)
    axis = np.arange(a, b, dtype=np.int64)
    return product_set([CellSet(make_grid(1, grid.k, grid.L), axis)] * grid.d)


def product_set(factors) -> CellSet:
    factors = list(factors)
    if not 1 <= len(factors) <= 3:
        raise GridError("product of 1 to 3 factors supported")
    g0 = factors[0].grid
    for f in factors:
        if f.grid.d != 1 or f.grid.k != g0.k or f.grid.L != g0.L:
            raise GridError("product factors must be 1-D sets on matching grids")
    g = make_grid(len(factors), g0.k, g0.L)
    if any(len(f) == 0 for f in factors):
        return CellSet.empty(g)
    key = factors[0].keys
    for f in factors[1:]:
        key = (key[:, None] * g.n + f.keys[None, :]).ravel()
    return CellSet(g, key, presorted=True)


def _balls(grid: GridSpec, seeds: np.ndarray, r: int) -> CellSet:
    """Union of Chebyshev blocks seeds +- r, clipped to the grid."""
    seeds = np.unique(np.asarray(seeds, dtype=np.int64).reshape(-1, grid.d), axis=0)
    keep = ((seeds >= -r) & (seeds < grid.n + r)).all(axis=1)
    seeds = seeds[keep]
    if len(seeds) == 0:
        return CellSet.empty(grid)
    offs = np.arange(-r, r + 1, dtype=np.int64)
    c = seeds
    for a in range(grid.d):
        rep = np.repeat(c, len(offs), axis=0)
        rep[:, a] += np.tile(offs, len(c))
        ok = (rep[:, a] >= 0) & (rep[:, a] < grid.n)
        rep = rep[ok]
        keys = np.unique(encode(rep, grid.n + 2 * r + 2, -r - 1))
        c = decode(keys, grid.n + 2 * r + 2, grid.d, -r - 1)
    return CellSet.from_coords_clipped(grid, c)


def _thicken_lattice(grid: GridSpec, q: int, s: float, extents) -> CellSet:
    if q < 2:
        raise GridError("q must be at least 2")
    rho = float(q) ** (-grid.d / s)
    if grid.eps > rho / 4:
        raise GridError(f"resolution too coarse: eps={grid.eps} > rho/4={rho / 4}")
    r = int(math.ceil(rho * (1 << grid.k) - 1e-9))
    axes = [np.arange(e + 1, dtype=np.int64) for e in extents]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, grid.d)
    # cell holding p/q, in exact integer arithmetic
    seeds = (pts << grid.k) // q
    return _balls(grid, seeds, r)


def lattice_thickening(q: int, s: float, grid: GridSpec) -> CellSet:
    """q^(-d/s) neighbourhood of the scaled lattice q^-1 (Z^d within [0,q]^d)."""
    return _thicken_lattice(grid, int(q), s, [int(q)] * grid.d)


def _iroot_floor(num: int, e: int) -> int:
    """Largest integer x with x**e <= num."""
    x = int(round(num ** (1.0 / e)))
    while x**e > num:
        x -= 1
    while (x + 1) ** e <= num:
        x += 1
    return x


def paraboloid_extents(q: int, d: int) -> list:
    short = _iroot_floor(q**d, d + 1)
    tall = _iroot_floor(q ** (2 * d), d + 1)
    return [short] * (d - 1) + [tall]


def paraboloid_lattice(q: int, s: float, grid: GridSpec) -> CellSet:
    """Thickened anisotropic lattice q^-1 Z^d restricted to a short-by-tall slab."""
    if grid.d < 2:
        raise GridError("paraboloid_lattice needs d >= 2")
    return _thicken_lattice(grid, int(q), s, paraboloid_extents(int(q), grid.d))


# ---------------------------------------------------------------------------
# surfaces


class _Surface:
    """Zero set of F(x) = sum_i f_i(x_i) - level with each f_i handled on intervals."""

    def __init__(self, d):
        self.d = d

    def bounds(self, a, b):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


class _PowerSurface(_Surface):
    # sum |x_i - c_i|^m = R^m
    def __init__(self, d, m, center, radius):
        super().__init__(d)
        self.m = m
        self.c = np.asarray(center, dtype=np.float64)
        self.R = float(radius)

    def bounds(self, a, b):
        u = np.abs(a - self.c)
        v = np.abs(b - self.c)
        inside = (a <= self.c) & (self.c <= b)
        lo = np.where(inside, 0.0, np.minimum(u, v)) ** self.m
        hi = np.maximum(u, v) ** self.m
        return lo.sum(axis=1) - self.R**self.m, hi.sum(axis=1) - self.R**self.m

    def grad(self, x):
        y = x - self.c
        return self.m * np.sign(y) * np.abs(y) ** (self.m - 1)


class _ParaboloidGraph(_Surface):
    # x_d = sum_{i<d} x_i^2
    def bounds(self, a, b):
        sa, sb = a[:, :-1] ** 2, b[:, :-1] ** 2
        inside = (a[:, :-1] <= 0) & (b[:, :-1] >= 0)
        lo = np.where(inside, 0.0, np.minimum(sa, sb)).sum(axis=1) - b[:, -1]
        hi = np.maximum(sa, sb).sum(axis=1) - a[:, -1]
        return lo, hi

    def grad(self, x):
        g = 2 * x.copy()
        g[:, -1] = -1.0
        return g


class _Hyperplane(_Surface):
    # omega . x = offset
    def __init__(self, d, normal, offset):
        super().__init__(d)
        w = np.asarray(normal, dtype=np.float64)
        self.w = w / np.linalg.norm(w)
        self.t = float(offset)

    def bounds(self, a, b):
        lo = np.where(self.w > 0, a, b) @ self.w
        hi = np.where(self.w > 0, b, a) @ self.w
        return lo - self.t, hi - self.t

    def grad(self, x):
        return np.broadcast_to(self.w, x.shape)


def _surface_cells(surf: _Surface, grid: GridSpec) -> np.ndarray:
    """Exact set of level-k cells whose closed box meets the surface, by refinement."""
    d = grid.d
    cells = np.stack(np.meshgrid(*[np.arange(grid.L)] * d, indexing="ij"), -1).reshape(-1, d)
    children = np.stack(np.meshgrid(*[np.arange(2)] * d, indexing="ij"), -1).reshape(-1, d)
    for level in range(grid.k + 1):
        h = 2.0**-level
        lo, hi = surf.bounds(cells * h, (cells + 1) * h)
        cells = cells[(lo <= 0) & (hi >= 0)]
        if level == grid.k:
            break
        cells = ((cells * 2)[:, None, :] + children[None]).reshape(-1, d)
    return cells


def _make_surface(kind, d, params):
    if d not in (2, 3):
        raise GridError("surfaces need d in {2, 3}")
    center = params.get("center", [0.5] * d)
    if kind == "sphere":
        return _PowerSurface(d, 2, center, params.get("radius", 0.5)), d - 1
    if kind == "superellipsoid":
        m = params.get("m")
        if m is None or int(m) != m or m < 2 or int(m) % 2:
            raise GridError(f"superellipsoid needs an even exponent m >= 2, got {m}")
        return _PowerSurface(d, int(m), center, params.get("radius", 0.5)), d - 1
    if kind == "paraboloid-graph":
        return _ParaboloidGraph(d), d - 1
    if kind == "hyperplane-patch":
        normal = params.get("normal", [0.0] * (d - 1) + [1.0])
        return _Hyperplane(d, normal, params.get("offset", 0.5)), d - 1
    raise GridError(f"unknown surface kind {kind!r}")


def surface_measure(kind: str, grid: GridSpec, **params) -> DiscreteMeasure:
    """Cells meeting a surface, weighted by a first-order area element.

    A plane with unit normal n crosses about |n|_1 / eps^(d-1) cells per
    unit area, so each cell is given area eps^(d-1) |n|_2 / |n|_1 with n
    the gradient at the cell centre.
    """
    surf, _ = _make_surface(kind, grid.d, params)
    cells = _surface_cells(surf, grid)
    A = CellSet.from_cells(grid, cells)
    if not A:
        raise GridError(f"{kind} does not meet the grid")
    g = surf.grad(A.centers())
    n2 = np.sqrt((g * g).sum(axis=1))
    n1 = np.abs(g).sum(axis=1)
    area = np.where(n1 > 0, n2 / np.where(n1 > 0, n1, 1.0), 1.0) * grid.eps ** (grid.d - 1)
    return DiscreteMeasure.from_unnormalized(A, area, label=kind)


# ---------------------------------------------------------------------------
# config-facing dispatcher

def design_dimension(kind: str, params: dict, d: int) -> float:
    if kind == "cantor":
        return 1.0 / _ratio_exponent(params["r"])
    if kind == "cantor-union":
        return 1.0 / _ratio_exponent(params["r"])
    if kind == "product":
        return float(sum(design_dimension(f["kind"], f, 1) for f in params["factors"]))
    if kind in ("lattice-thickening", "paraboloid-lattice"):
        return float(params["s"])
    if kind in SURFACES:
        return float(d - 1)
    if kind in ("box", "interval"):
        return float(d)
    raise GridError(f"unknown construction kind {kind!r}")


def build(kind: str, grid: GridSpec, **params):
    """Construct by name. Returns (CellSet or DiscreteMeasure, descriptor)."""
    desc = ConstructionDescriptor(kind, dict(params), design_dimension(kind, params, grid.d))
    if kind == "cantor":
        return cantor_set(params["r"], int(params["n"]), grid), desc
    if kind == "cantor-union":
        return f_alpha(params["r"], int(params["n"]), grid), desc
    if kind in ("box", "interval"):
        return unit_box(grid, params.get("lo", 0.0), params.get("hi", 1.0)), desc
    if kind == "product":
        g1 = make_grid(1, grid.k, grid.L)
        parts = []
        for f in params["factors"]:
            f = dict(f)
            parts.append(build(f.pop("kind"), g1, **f)[0])
        return product_set(parts), desc
    if kind == "lattice-thickening":
        return lattice_thickening(int(params["q"]), float(params["s"]), grid), desc
    if kind == "paraboloid-lattice":
        return paraboloid_lattice(int(params["q"]), float(params["s"]), grid), desc
    if kind in SURFACES:
        return surface_measure(kind, grid, **params), desc
    raise GridError(f"unknown construction kind {kind!r}")
