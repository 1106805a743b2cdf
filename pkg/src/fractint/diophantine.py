"""Integer solutions of the two-sphere proximity system and their average count.

For a pair (n1, n2) of points of Z^d ∩ [0, q]^d, nu(n1, n2) counts the
n ∈ Z^d ∩ [0, q]^d with |phi(n1 - n) - lam1| <= delta and
|phi(n2 - n) - lam2| <= delta, where delta = q^(1 - d/s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .estimators import DecayFit, fit_loglog
from .thresholds import predict

BUDGET = 10**9
FAMILIES = {"euclidean": _kernels.py.EUCLID, "lm-norm": _kernels.py.LM_NORM}
SLACK = 0.25


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeConfig:
    d: int
    q: int
    s: float
    family: str = "euclidean"
    m: int = 2
    lam1: float | None = None
    lam2: float | None = None
    single: bool = False
    strict: bool = True

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("lattice counts support d in {1, 2, 3}")
        if int(self.q) != self.q or self.q < 2:
            raise ValueError("q must be an integer >= 2")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; use one of {sorted(FAMILIES)}")
        if self.family == "lm-norm" and (self.m < 2 or self.m % 2):
            raise ValueError("lm-norm needs an even exponent m >= 2")
        # largest coordinate power summed in the kernels must fit in int64
        if self.family == "lm-norm" and self.d * float(self.q) ** self.m >= 2.0**62:
            raise ValueError("q^m overflows 64-bit integer arithmetic")
        if self.strict:
            # the closed lower end is allowed: delta is well defined there
            if not (self.d + 1) / 2 <= self.s < self.d:
                raise ValueError("s must lie in [(d+1)/2, d)")
            for lam in (self.lambda1, self.lambda2):
                if not self.q / 2 <= lam <= 2 * self.q:
                    raise ValueError("lambda must lie in [q/2, 2q]")

    @property
    def delta(self) -> float:
        return float(self.q) ** (1.0 - self.d / self.s)

    @property
    def lambda1(self) -> float:
        return default_lambda(self.q, self.d) if self.lam1 is None else float(self.lam1)

    @property
    def lambda2(self) -> float:
        return default_lambda(self.q, self.d) if self.lam2 is None else float(self.lam2)

    @property
    def n_points(self) -> int:
        return (self.q + 1) ** self.d


def default_lambda(q, d) -> float:
    return q * 0.75 * math.sqrt(d)


def box_points(q: int, d: int) -> np.ndarray:
    """All of Z^d ∩ [0, q]^d in row-major order."""
    ax = np.arange(q + 1, dtype=np.int64)
    return np.stack(np.meshgrid(*[ax] * d, indexing="ij"), -1).reshape(-1, d)


@dataclass
class CountTable:
    n1: np.ndarray
    n2: np.ndarray
    counts: np.ndarray
    aggregate: float
    stderr: float
    mode: str
    cfg: LatticeConfig
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(self.counts.mean()) if len(self.counts) else 0.0

    def rows(self):
        for a, b, c in zip(self.n1, self.n2, self.counts):
            yield (*a.tolist(), *b.tolist(), int(c))

    def header(self):
        d = self.cfg.d
        return [f"n1_{i}" for i in range(d)] + [f"n2_{i}" for i in range(d)] + ["nu"]


def pairs_exhaustive(cfg: LatticeConfig):
    P = box_points(cfg.q, cfg.d)
    i, j = np.meshgrid(np.arange(len(P)), np.arange(len(P)), indexing="ij")
    return P[i.ravel()], P[j.ravel()]


def pairs_sampled(cfg: LatticeConfig, n_pairs: int, seed: int = 0):
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    a = rng.integers(0, cfg.q + 1, size=(n_pairs, cfg.d), dtype=np.int64)
    b = rng.integers(0, cfg.q + 1, size=(n_pairs, cfg.d), dtype=np.int64)
    return a, b


def _pairs(cfg, pairs, seed):
    """Resolve ``pairs``: "exhaustive", an int (sampled count) or an explicit (n1, n2)."""
    if isinstance(pairs, str):
        if pairs != "exhaustive":
            raise ValueError(f"unknown pairs mode {pairs!r}")
        return (*pairs_exhaustive(cfg), "exact")
    if isinstance(pairs, (int, np.integer)):
        return (*pairs_sampled(cfg, int(pairs), seed), f"sampled({int(pairs)},{seed})")
    a, b = pairs
    a = np.atleast_2d(np.asarray(a, dtype=np.int64))
    b = np.atleast_2d(np.asarray(b, dtype=np.int64))
    if a.shape != b.shape or a.shape[1] != cfg.d:
        raise ValueError("pair arrays must both have shape (N, d)")
    if (a < 0).any() or (a > cfg.q).any() or (b < 0).any() or (b > cfg.q).any():
        raise ValueError("pair points must lie in [0, q]^d")
    return a, b, "explicit"


def _table(cfg, a, b, counts, mode):
    N = len(counts)
    scale = (cfg.q + 1) ** (2 * cfg.d) / float(cfg.q) ** (2 * cfg.d)
    if mode == "exact":
        agg = float(counts.sum()) / float(cfg.q) ** (2 * cfg.d)
        se = 0.0
    else:
        agg = scale * float(counts.mean()) if N else 0.0
        se = scale * float(counts.std(ddof=1)) / math.sqrt(N) if N > 1 else float("nan")
    return CountTable(a, b, counts, agg, se, mode, cfg)


def count_bruteforce(cfg: LatticeConfig, pairs="exhaustive", seed: int = 0) -> CountTable:
    """Ground-truth counts by scanning every candidate n for every pair."""
    if isinstance(pairs, str) and pairs == "exhaustive":
        if (cfg.q + 1) ** (3 * cfg.d) > BUDGET:
            raise BudgetError(f"exhaustive enumeration needs (q+1)^(3d) <= {BUDGET:.0e}")
    a, b, mode = _pairs(cfg, pairs, seed)
    pts = box_points(cfg.q, cfg.d)
    counts = _kernels.lattice_count_brute(pts, a, b, cfg.lambda1, cfg.lambda2, cfg.delta,
                                          FAMILIES[cfg.family], cfg.m, not cfg.single)
    return _table(cfg, a, b, np.asarray(counts, dtype=np.int64), mode)


def first_shell(cfg: LatticeConfig) -> np.ndarray:
    """Offsets v in [-q, q]^d with |phi(v) - lam1| <= delta, ordered by phi(v)."""
    ax = np.arange(-cfg.q, cfg.q + 1, dtype=np.int64)
    V = np.stack(np.meshgrid(*[ax] * cfg.d, indexing="ij"), -1).reshape(-1, cfg.d)
    val = _kernels.py._phi(V, FAMILIES[cfg.family], cfg.m)
    keep = _kernels.py._hit(val, cfg.lambda1, cfg.delta)
    order = np.argsort(val[keep], kind="stable")
    return np.ascontiguousarray(V[keep][order])


def count_fast(cfg: LatticeConfig, pairs="exhaustive", seed: int = 0, shell=None) -> CountTable:
    """Same counts as count_bruteforce, scanning only the first-constraint shell around n1."""
    a, b, mode = _pairs(cfg, pairs, seed)
    sh = first_shell(cfg) if shell is None else shell
    counts = _kernels.lattice_count_shell(sh, cfg.q, a, b, cfg.lambda2, cfg.delta,
                                          FAMILIES[cfg.family], cfg.m, not cfg.single)
    t = _table(cfg, a, b, np.asarray(counts, dtype=np.int64), mode)
    t.extra["shell_size"] = len(sh)
    return t


@dataclass
class SlopeReport:
    fit: DecayFit
    verdict: str
    predicted: float
    tables: list


def average_slope(s: float, q_list, pairs_mode=4096, seed: int = 0, d: int = 2,
                  family: str = "euclidean", m: int = 2, slack: float = SLACK) -> SlopeReport:
    """Fit log of the average count against log q; bound-respected if slope <= d - 2d/s + slack."""
    q_list = sorted(int(q) for q in q_list)
    if len(q_list) < 2 or q_list[-1] < 8 * q_list[0]:
        raise ValueError("q_list must span at least 3 octaves")
    th = predict("numbertheory", d=d, s=s)
    if not th.hypotheses_ok:
        raise ValueError("s must lie in ((d+1)/2, d)")
    tables = []
    for q in q_list:
        cfg = LatticeConfig(d, q, s, family, m)
        mode = pairs_mode
        if mode == "auto":
            mode = "exhaustive" if q < 32 and (q + 1) ** (3 * d) <= BUDGET else 4096
        tables.append(count_fast(cfg, mode, seed=seed))
    means = np.array([t.mean for t in tables])
    fit = fit_loglog(np.asarray(q_list, dtype=np.float64), means, min_points=2)
    pred = th.predicted_count_exponent
    verdict = "bound-respected" if fit.slope <= pred + slack else "bound-violated"
    return SlopeReport(fit, verdict, pred, tables)


def delta_monotone(n_configs: int = 100, seed: int = 0, n_pairs: int = 64) -> list:
    """Random configs where enlarging delta (via larger s) must not lower any count.

    Returns the list of configs that broke monotonicity (empty when it holds).
    """
    rng = np.random.default_rng(seed)
    bad = []
    for i in range(n_configs):
        d = int(rng.integers(2, 4))
        q = int(rng.integers(4, 25 if d == 2 else 11))
        lo = (d + 1) / 2
        s1, s2 = np.sort(rng.uniform(lo + 1e-3, d - 1e-3, 2))
        lam = float(rng.uniform(q / 2, min(2 * q, q * math.sqrt(d))))
        fam = "euclidean" if rng.uniform() < 0.5 else "lm-norm"
        m = int(rng.choice([2, 4])) if fam == "lm-norm" else 2
        c1 = LatticeConfig(d, q, float(s1), fam, m, lam, lam)
        c2 = LatticeConfig(d, q, float(s2), fam, m, lam, lam)
        pairs = pairs_sampled(c1, n_pairs, seed + i)
        a = count_fast(c1, pairs).counts
        b = count_fast(c2, pairs).counts
        if (b < a).any():
            bad.append(c1)
    return bad
