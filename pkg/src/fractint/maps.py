"""Defining functions phi(x, y) for level-set families, with closed-form derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FAMILIES = ("euclidean", "dot", "lm-norm", "paraboloid-offset", "custom")


@dataclass(frozen=True)
class MapSpec:
    """phi(x, y) with gradients and mixed Hessian, vectorized over rows.

    ``diffeo`` and ``level`` are optional attachments used by experiments:
    the map x -> s(x) and the level value t (scalar) respectively.
    """

    family: str
    m: int = 2
    phi_fn: Optional[Callable] = None
    grad_x_fn: Optional[Callable] = None
    grad_y_fn: Optional[Callable] = None
    mixed_fn: Optional[Callable] = None
    diffeo: object = None
    level: object = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown map family {self.family!r}")
        if self.family == "lm-norm" and (int(self.m) != self.m or self.m < 2 or self.m % 2):
            raise ValueError("lm-norm needs an even exponent m >= 2")
        if self.family == "custom" and None in (self.phi_fn, self.grad_x_fn, self.grad_y_fn, self.mixed_fn):
            raise ValueError("custom maps need phi, both gradients and the mixed Hessian")

    # phi and derivatives; x, y have shape (N, d)
    def __call__(self, x, y):
        x, y = _rows(x), _rows(y)
        f = self.family
        if f == "euclidean":
            v = x - y
            return np.sqrt((v * v).sum(axis=1))
        if f == "dot":
            return (x * y).sum(axis=1)
        if f == "lm-norm":
            v = x - y
            return ((np.abs(v) ** self.m).sum(axis=1)) ** (1.0 / self.m)
        if f == "paraboloid-offset":
            v = x - y
            return v[:, -1] - (v[:, :-1] ** 2).sum(axis=1)
        return np.asarray(self.phi_fn(x, y), dtype=np.float64)

    def _grad_v(self, v):
        # derivative with respect to v = x - y for the difference-type families
        f = self.family
        if f == "euclidean":
            return v / np.sqrt((v * v).sum(axis=1))[:, None]
        if f == "lm-norm":
            m = self.m
            r = ((np.abs(v) ** m).sum(axis=1)) ** (1.0 / m)
            return np.sign(v) * np.abs(v) ** (m - 1) * r[:, None] ** (1 - m)
        g = -2 * v
        g[:, -1] = 1.0
        return g

    def _hess_v(self, v):
        f = self.family
        n, d = v.shape
        if f == "euclidean":
            r = np.sqrt((v * v).sum(axis=1))
            u = v / r[:, None]
            return (np.eye(d)[None] - u[:, :, None] * u[:, None, :]) / r[:, None, None]
        if f == "lm-norm":
            m = self.m
            r = ((np.abs(v) ** m).sum(axis=1)) ** (1.0 / m)
            a = np.sign(v) * np.abs(v) ** (m - 1)
            H = -(m - 1) * a[:, :, None] * a[:, None, :] * r[:, None, None] ** (1 - 2 * m)
            diag = (m - 1) * np.abs(v) ** (m - 2) * r[:, None] ** (1 - m)
            H[:, np.arange(d), np.arange(d)] += diag
            return H
        H = np.zeros((n, d, d))
        H[:, np.arange(d - 1), np.arange(d - 1)] = -2.0
        return H

    def grad_x(self, x, y):
        x, y = _rows(x), _rows(y)
        if self.family == "dot":
            return y.copy()
        if self.family == "custom":
            return np.asarray(self.grad_x_fn(x, y), dtype=np.float64)
        return self._grad_v(x - y)

    def grad_y(self, x, y):
        x, y = _rows(x), _rows(y)
        if self.family == "dot":
            return x.copy()
        if self.family == "custom":
            return np.asarray(self.grad_y_fn(x, y), dtype=np.float64)
        return -self._grad_v(x - y)

    def mixed(self, x, y):
        """d^2 phi / dx_i dy_j, shape (N, d, d)."""
        x, y = _rows(x), _rows(y)
        if self.family == "dot":
            return np.broadcast_to(np.eye(x.shape[1]), (len(x), x.shape[1], x.shape[1])).copy()
        if self.family == "custom":
            return np.asarray(self.mixed_fn(x, y), dtype=np.float64)
        return -self._hess_v(x - y)

    def lipschitz_y(self, x, box_lo, box_hi) -> float:
        """Upper bound for |grad_y phi(x, .)| over the box, used for pruning."""
        f = self.family
        if f in ("euclidean", "lm-norm"):
            # the gradient has unit dual (l^m') norm, and |.|_2 <= |.|_m' for m >= 2
            return 1.0
        if f == "dot":
            return float(np.sqrt((np.asarray(x, dtype=np.float64) ** 2).sum()))
        if f == "paraboloid-offset":
            x = np.asarray(x, dtype=np.float64)
            far = np.maximum(np.abs(x[:-1] - box_lo[:-1]), np.abs(x[:-1] - box_hi[:-1]))
            return float(np.sqrt(1 + 4 * (far**2).sum()))
        return float(self.extra.get("lipschitz_y", np.inf))


def _rows(a):
    return np.atleast_2d(np.asarray(a, dtype=np.float64))


def euclidean():
    return MapSpec("euclidean")


def dot():
    return MapSpec("dot")


def lm_norm(m: int):
    return MapSpec("lm-norm", m=m)


def paraboloid_offset():
    return MapSpec("paraboloid-offset")


def make_map(family: str, **kw) -> MapSpec:
    return MapSpec(family, **kw)


# ---------------------------------------------------------------------------

def bordered_matrix(spec: MapSpec, x, y) -> np.ndarray:
    """(d+1)x(d+1) matrix [[0, grad_x phi], [-grad_y phi^T, d2phi/dxdy]] per row."""
    x, y = _rows(x), _rows(y)
    n, d = x.shape
    M = np.zeros((n, d + 1, d + 1))
    M[:, 0, 1:] = spec.grad_x(x, y)
    M[:, 1:, 0] = -spec.grad_y(x, y)
    M[:, 1:, 1:] = spec.mixed(x, y)
    return M


def bordered_det(spec: MapSpec, x, y) -> np.ndarray:
    return np.linalg.det(bordered_matrix(spec, x, y))


def phong_stein_det(spec: MapSpec, samples, t: float | None = None, eps: float = 1e-6) -> float:
    """Minimum |det| of the bordered Hessian over sample pairs (x, y).

    With ``t`` given, pairs farther than ``eps`` from the level set are
    discarded first.
    """
    x, y = samples
    x, y = _rows(x), _rows(y)
    if t is not None:
        keep = np.abs(spec(x, y) - t) <= eps
        x, y = x[keep], y[keep]
    if len(x) == 0:
        raise ValueError("no samples on the level set")
    return float(np.abs(bordered_det(spec, x, y)).min())


def sample_level_set(spec: MapSpec, t: float, n: int, d: int, seed: int = 0,
                     x_box=(0.0, 1.0), y_box=(0.0, 1.0), tol: float = 1e-12,
                     max_iter: int = 60):
    """Pairs (x, y) with phi(x, y) = t to ``tol``: x uniform in x_box, y Newton-projected.

    Starting points whose projection leaves y_box or fails to converge are
    redrawn, so exactly ``n`` pairs come back unless the level set is
    unreachable.
    """
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    got = 0
    for _ in range(200):
        m = 4 * (n - got) + 16
        x = rng.uniform(*x_box, size=(m, d))
        y = rng.uniform(*y_box, size=(m, d))
        for _ in range(max_iter):
            g = spec.grad_y(x, y)
            r = spec(x, y) - t
            nrm = (g * g).sum(axis=1)
            nrm[nrm == 0] = np.inf
            y = y - (r / nrm)[:, None] * g
        ok = np.abs(spec(x, y) - t) <= tol
        ok &= ((y >= y_box[0]) & (y <= y_box[1])).all(axis=1)
        ok &= np.isfinite(y).all(axis=1)
        xs.append(x[ok])
        ys.append(y[ok])
        got += int(ok.sum())
        if got >= n:
            break
    if got == 0:
        raise ValueError("level set not reached from the sampling boxes")
    return np.concatenate(xs)[:n], np.concatenate(ys)[:n]


def check_gradients(spec: MapSpec, d: int, n: int = 100, seed: int = 0, h: float = 1e-5,
                    min_sep: float = 0.25):
    """Largest relative error of the closed-form derivatives against central differences."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (4 * n, d))
    y = rng.uniform(0, 1, (4 * n, d))
    sep = np.abs(x - y).min(axis=1) > min_sep / d
    x, y = x[sep][:n], y[sep][:n]
    worst = 0.0
    gx, gy, H = spec.grad_x(x, y), spec.grad_y(x, y), spec.mixed(x, y)
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        fdx = (spec(x + e, y) - spec(x - e, y)) / (2 * h)
        fdy = (spec(x, y + e) - spec(x, y - e)) / (2 * h)
        fdm = (spec.grad_y(x + e, y) - spec.grad_y(x - e, y)) / (2 * h)
        worst = max(worst, _rel(fdx, gx[:, a]), _rel(fdy, gy[:, a]), _rel(fdm, H[:, a, :]))
    return worst


def _rel(a, b):
    return float((np.abs(a - b) / np.maximum(np.abs(b), 1e-3)).max())


def gradients_independent(specs, x_list, y, tol: float = 1e-6) -> bool:
    """Whether grad_x and grad_y families of two maps are linearly independent at each row."""
    gy = np.stack([s.grad_y(x, y) for s, x in zip(specs, x_list)], axis=1)
    gx = np.stack([s.grad_x(x, y) for s, x in zip(specs, x_list)], axis=1)
    sv_y = np.linalg.svd(gy, compute_uv=False)[:, -1]
    sv_x = np.linalg.svd(gx, compute_uv=False)[:, -1]
    return bool((sv_y > tol).all() and (sv_x > tol).all())
