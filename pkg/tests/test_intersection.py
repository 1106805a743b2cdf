import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractint import intersection as ix
from fractint.constructions import build, cantor_set, product_set, surface_measure, unit_box
from fractint.grid import CellSet, GridError, Rotation, Translation, make_grid, transform_coords
from fractint.maps import dot, euclidean, lm_norm


def thick(cells, f, k, nf):
    """dilate(coarsen(cells, f), 1) as a python set, clipped to the level-f grid."""
    out = set()
    for c in {tuple(v >> (k - f) for v in row) for row in cells}:
        for off in itertools.product((-1, 0, 1), repeat=len(c)):
            p = tuple(a + b for a, b in zip(c, off))
            if all(0 <= v < nf for v in p):
                out.add(p)
    return out


def brute_counts(A, coords, levels, kappa):
    g = A.grid
    ac = A.cells.tolist()
    out = []
    for j in levels:
        f = min(j + kappa, g.k)
        nf = g.L << f
        meet = thick(ac, f, g.k, nf) & thick(coords.tolist(), f, g.k, nf)
        out.append(len({tuple(v >> (f - j) for v in c) for c in meet}))
    return out


def brute_level(A, conds, levels, kappa):
    g = A.grid
    out = []
    for j in levels:
        f = min(j + kappa, g.k)
        nf = g.L << f
        cells = np.array(sorted(thick(A.cells.tolist(), f, g.k, nf)), dtype=np.int64)
        ctr = (cells + 0.5) * 2.0**-f
        keep = np.ones(len(cells), bool)
        for spec, x, t in conds:
            keep &= np.abs(spec(np.broadcast_to(x, ctr.shape), ctr) - t) <= 2.0**-j
        out.append(len({tuple(c) for c in (cells[keep] >> (f - j)).tolist()}))
    return out


@pytest.fixture(scope="module")
def pair2d():
    g = make_grid(2, 7)
    A = product_set([unit_box(make_grid(1, 7)), cantor_set(0.25, 3, make_grid(1, 7))])
    B = surface_measure("sphere", g, radius=0.3).support
    return A, B


def test_default_ladder():
    assert ix.default_ladder(10) == [4, 5, 6, 7, 8]
    assert ix.default_ladder(8) == [2, 3, 4, 5, 6]
    assert ix.default_ladder(5, 4, kappa=0) == [2, 3, 4, 5]


def test_per_sample_gamma():
    js = [2, 3, 4, 5]
    counts = np.array([[4, 8, 16, 32], [1, 1, 1, 1], [3, 0, 5, 9]])
    gam = ix.per_sample_gamma(counts, js)
    assert gam[0] == pytest.approx(1.0) and gam[1] == pytest.approx(0.0) and np.isnan(gam[2])


@given(st.floats(0.0, 1.5), st.floats(0.0, 1.5), st.floats(0, 2 * np.pi), st.booleans())
@settings(max_examples=25, deadline=None)
def test_counts_match_bruteforce(pair2d, x0, x1, th, sparse):
    A, B = pair2d
    g = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    T = ix._motion(ix.snap([x0, x1], 7), ix._centre(B), g)
    coords = transform_coords(B, T, A.grid)
    levels = [2, 3, 4, 5]
    P = ix.Pyramid(A, levels, 2)
    if sparse:
        P.dense.clear()
    assert ix.covering_counts_from_coords(P, coords) == brute_counts(A, coords, levels, 2)


def test_dense_and_sparse_agree_on_big_set():
    g = make_grid(2, 9)
    A = product_set([unit_box(make_grid(1, 9)), cantor_set(0.25, 4, make_grid(1, 9))])
    B = build("product", g, factors=[{"kind": "cantor", "r": 0.25, "n": 4}, {"kind": "interval"}])[0]
    levels = ix.default_ladder(9)
    coords = transform_coords(B, Rotation([[0.6, -0.8], [0.8, 0.6]], [0.5, 0.5]), g)
    P = ix.Pyramid(A, levels)
    dense = ix.covering_counts_from_coords(P, coords)
    P.dense.clear()
    assert ix.covering_counts_from_coords(P, coords) == dense


def test_corner_touch_is_bounded():
    g = make_grid(2, 8)
    A = unit_box(g)
    counts = [ix.covering_number(A, A, ix._motion(np.zeros(2), ix._centre(A)), j) for j in (2, 4, 6)]
    assert max(counts) <= 4


def test_transversal_segments():
    g = make_grid(2, 9)
    h = CellSet.from_cells(g, [[i, 256] for i in range(512)])
    v = CellSet.from_cells(g, [[256, i] for i in range(512)])
    counts = [ix.covering_number(h, v, Translation([0.0, 0.0]), j) for j in range(2, 8)]
    assert max(counts) <= 9
    assert ix.per_sample_gamma([counts], range(2, 8))[0] == pytest.approx(0.0, abs=0.05)


def test_two_circles_meet_in_points():
    g = make_grid(2, 9)
    C1 = surface_measure("sphere", g, center=[0.4, 0.5], radius=0.25).support
    C2 = surface_measure("sphere", g, center=[0.65, 0.5], radius=0.25).support
    counts = [ix.covering_number(C1, C2, Translation([0.0, 0.0]), j) for j in range(3, 8)]
    assert ix.per_sample_gamma([counts], range(3, 8))[0] == pytest.approx(0.0, abs=0.2)


@pytest.mark.parametrize("spec, t", [(euclidean(), 0.4), (dot(), 0.5), (lm_norm(4), 0.3)])
def test_levelset_descent_matches_scan(pair2d, spec, t):
    A, _ = pair2d
    levels = [2, 3, 4, 5]
    P = ix.Pyramid(A, levels, 2)
    for x in ([0.5, 0.5], [0.1, 0.9], [1.0, 0.25]):
        conds = [(spec, np.array(x), t)]
        assert ix.levelset_counts(P, conds) == brute_level(A, conds, levels, 2)


def test_two_equation_descent_matches_scan():
    A = unit_box(make_grid(3, 5))
    levels = [1, 2, 3]
    P = ix.Pyramid(A, levels, 2)
    conds = [(euclidean(), np.array([0.2, 0.5, 0.5]), 0.5), (euclidean(), np.array([0.8, 0.5, 0.5]), 0.5)]
    assert ix.levelset_counts(P, conds) == brute_level(A, conds, levels, 2)


def test_translation_consistency_small(pair2d):
    A, B = pair2d
    base = ix.translation_experiment(A, B, 1.5, 1.0, seed=4, levels=[2, 3, 4, 5])
    rot = ix.rotation_experiment(A, B, 1.5, 1.0, 2.0, n_rotations=1, n_translations=64, seed=4,
                                 levels=[2, 3, 4, 5], fixed_g=np.eye(2),
                                 sampler=ix.XSampler("tent", *ix.sum_box(A, B)))
    dil = ix.dilation_experiment(A, B, 1.5, 1.0, 2.0, 0.5, t_grid=[1.0], seed=4, levels=[2, 3, 4, 5])
    assert np.array_equal(base.counts_matrix(), rot.counts_matrix())
    assert np.array_equal(base.counts_matrix(), dil.counts_matrix())


def test_experiment_guards(pair2d):
    A, B = pair2d
    with pytest.raises(GridError):
        ix.translation_experiment(A, B, 1.5, 1.0, n_samples=10)
    with pytest.raises(GridError):
        ix.dilation_experiment(A, B, 1.5, 1.0, 2.0, 0.5, t_grid=[0.5])
    with pytest.raises(GridError):
        ix.translation_experiment(A, B, 1.5, 1.0, levels=[])


def test_haar_orthogonal():
    rng = np.random.default_rng(0)
    for d in (2, 3):
        G = ix.haar_orthogonal(d, 400, rng)
        assert np.allclose(G @ np.transpose(G, (0, 2, 1)), np.eye(d), atol=1e-12)
        dets = np.linalg.det(G)
        assert np.allclose(np.abs(dets), 1.0)
        assert 0.4 < np.mean(dets < 0) < 0.6
        # Haar mean of a matrix entry vanishes
        assert np.abs(G.mean(axis=0)).max() < 0.15


def test_exceptional_empty_for_generic():
    xg, xs = ix.x_grid(4, 2)
    rep = ix.exceptional_set_dim(np.full(len(xs), 0.4), xg, threshold=0.5)
    assert rep.empty and rep.dimension == 0.0


def test_exceptional_full_square():
    xg, xs = ix.x_grid(5, 2)
    rep = ix.exceptional_set_dim(np.ones(len(xs)), xg, threshold=0.5)
    assert rep.dimension == pytest.approx(2.0, abs=1e-9)


def test_slice_of_square_by_line():
    A = unit_box(make_grid(2, 9))
    P = ix.Pyramid(A, ix.default_ladder(9))
    counts = ix.levelset_counts(P, [(dot(), np.array([0.6, 0.8]), 0.7)])
    assert ix.per_sample_gamma([counts], ix.default_ladder(9))[0] == pytest.approx(1.0, abs=0.1)


def test_maximal_single_t_is_level_set(pair2d):
    A, _ = pair2d
    lv = [2, 3, 4, 5]
    a = ix.maximal_experiment(A, euclidean(), 1.5, 2.0, t_grid=[0.5], seed=2, levels=lv)
    b = ix.level_set_experiment(A, euclidean(), 0.5, 1.5, alpha=2.0, seed=2, levels=lv, check_curvature=False)
    assert np.array_equal(a.counts_matrix(), b.counts_matrix())


def test_inverse_zero_for_circle():
    E = surface_measure("sphere", make_grid(2, 8), radius=0.25).support
    U = np.array([[2.0, 2.0], [-1.0, 0.5]])
    rep = ix.inverse_experiment(E, euclidean(), U, np.linspace(0.1, 3, 30))
    assert rep.holds
