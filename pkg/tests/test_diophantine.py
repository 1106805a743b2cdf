import csv
import hashlib
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractint import diophantine as dio
from fractint.cli import csv_text

GOLDEN = Path(__file__).parent / "golden"


def loop_count(cfg, n1, n2):
    """Plain-python scan of every candidate n."""
    m = cfg.m if cfg.family == "lm-norm" else 2

    def phi(v):
        if cfg.family == "euclidean":
            return math.sqrt(sum(t * t for t in v))
        return sum(t**m for t in v) ** (1.0 / m)

    total = 0
    for n in np.ndindex(*([cfg.q + 1] * cfg.d)):
        a = [x - y for x, y in zip(n1, n)]
        b = [x - y for x, y in zip(n2, n)]
        if abs(phi(a) - cfg.lambda1) <= cfg.delta and (cfg.single or abs(phi(b) - cfg.lambda2) <= cfg.delta):
            total += 1
    return total


def r2(m):
    """Representations of m as a sum of two squares, 4 (d_1(m) - d_3(m))."""
    if m == 0:
        return 1
    d1 = d3 = 0
    for t in range(1, m + 1, 2):
        if m % t == 0:
            if t % 4 == 1:
                d1 += 1
            else:
                d3 += 1
    return 4 * (d1 - d3)


def test_config_validation():
    with pytest.raises(ValueError):
        dio.LatticeConfig(2, 8, 2.5)
    with pytest.raises(ValueError):
        dio.LatticeConfig(2, 8, 1.4)
    with pytest.raises(ValueError):
        dio.LatticeConfig(2, 8, 1.6, lam1=100.0)
    with pytest.raises(ValueError):
        dio.LatticeConfig(2, 8, 1.6, family="lm-norm", m=3)
    assert dio.LatticeConfig(2, 8, 1.5).delta == pytest.approx(0.5)
    assert dio.LatticeConfig(2, 8, 1.6).lambda1 == pytest.approx(6 * math.sqrt(2))


def test_pinned_pair():
    cfg = dio.LatticeConfig(2, 8, 1.5, lam1=8, lam2=8)
    t = dio.count_bruteforce(cfg, ([[0, 0]], [[8, 8]]))
    assert t.counts.tolist() == [2] == [loop_count(cfg, (0, 0), (8, 8))]


@given(st.integers(0, 8), st.integers(0, 8), st.integers(0, 8), st.integers(0, 8),
       st.floats(1.5, 1.99), st.sampled_from(["euclidean", "lm-norm"]))
@settings(max_examples=40, deadline=None)
def test_brute_matches_python_loop(a, b, c, e, s, fam):
    cfg = dio.LatticeConfig(2, 8, s, fam, 4, lam1=7.0, lam2=9.0)
    t = dio.count_bruteforce(cfg, ([[a, b]], [[c, e]]))
    assert int(t.counts[0]) == loop_count(cfg, (a, b), (c, e))


def test_brute_matches_loop_3d():
    cfg = dio.LatticeConfig(3, 6, 2.2)
    rng = np.random.default_rng(5)
    n1 = rng.integers(0, 7, (6, 3))
    n2 = rng.integers(0, 7, (6, 3))
    t = dio.count_bruteforce(cfg, (n1, n2))
    assert t.counts.tolist() == [loop_count(cfg, tuple(x), tuple(y)) for x, y in zip(n1, n2)]


@pytest.mark.parametrize("q", [8, 16])
def test_golden_tables(q):
    path = GOLDEN / f"count_d2_q{q}.csv"
    cfg = dio.LatticeConfig(2, q, 1.5, lam1=q, lam2=q)
    fast = dio.count_fast(cfg, "exhaustive")
    text = csv_text(fast.header(), fast.rows())
    assert text == path.read_text()
    manifest = (GOLDEN / "MANIFEST").read_text()
    assert f"sha256={hashlib.sha256(text.encode()).hexdigest()}" in manifest


def test_zero_radius_forces_equal_points():
    cfg = dio.LatticeConfig(2, 6, 1.6, lam1=0.0, lam2=0.0, strict=False)
    a, b = dio.pairs_exhaustive(cfg)
    t = dio.count_fast(cfg, (a, b))
    same = (a == b).all(axis=1)
    assert (t.counts[same] == 1).all() and (t.counts[~same] == 0).all()


def test_huge_delta_counts_everything():
    # every phi value lies in [0, 4 sqrt 2], within delta of the midpoint
    mid = 2 * math.sqrt(2)
    cfg = dio.LatticeConfig(2, 4, 100.0, lam1=mid, lam2=mid, strict=False)
    assert cfg.delta >= mid
    t = dio.count_bruteforce(cfg, "exhaustive")
    assert (t.counts == 25).all()


def test_empty_shell():
    cfg = dio.LatticeConfig(2, 8, 1.6, lam1=50.0, lam2=8.0, strict=False)
    assert len(dio.first_shell(cfg)) == 0
    assert (dio.count_fast(cfg, 64).counts == 0).all()


@pytest.mark.parametrize("lam", [5.0, 7.5, 10.0])
def test_single_shell_matches_gauss_count(lam):
    # centre far from the box edges so the whole annulus is inside
    cfg = dio.LatticeConfig(2, 32, 1.6, lam1=lam, lam2=lam, single=True, strict=False)
    lo, hi = (lam - cfg.delta) ** 2, (lam + cfg.delta) ** 2
    want = sum(r2(m) for m in range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1))
    t = dio.count_fast(cfg, ([[16, 16]], [[0, 0]]))
    assert int(t.counts[0]) == want


def test_sampled_fast_equals_brute():
    cfg = dio.LatticeConfig(2, 32, 1.6)
    a = dio.count_fast(cfg, 512, seed=2)
    b = dio.count_bruteforce(cfg, 512, seed=2)
    assert np.array_equal(a.counts, b.counts)
    assert a.mode == b.mode == "sampled(512,2)"
    assert math.isfinite(a.stderr) and a.aggregate > 0


def test_budget_guard():
    cfg = dio.LatticeConfig(3, 64, 2.5)
    with pytest.raises(dio.BudgetError):
        dio.count_bruteforce(cfg, "exhaustive")


def test_delta_monotone_small():
    assert dio.delta_monotone(10, seed=3) == []


def test_average_slope_validation():
    with pytest.raises(ValueError):
        dio.average_slope(1.6, [8, 16])
    with pytest.raises(ValueError):
        dio.average_slope(1.5, [8, 16, 32, 64])


def test_golden_rows_parse():
    with open(GOLDEN / "count_d2_q8.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n1_0", "n1_1", "n2_0", "n2_1", "nu"]
    assert len(rows) == 81 * 81 + 1
