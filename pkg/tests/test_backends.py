import os
import subprocess
import sys

import numpy as np
import pytest

from fractint import _pykernels as pyk

ck = pytest.importorskip("fractint._ckernels")


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.mark.parametrize("threads", [1, 4])
def test_pair_energy(rng, threads):
    c = rng.uniform(0, 1, (300, 2))
    w = rng.uniform(0.1, 1, 300)
    w /= w.sum()
    a = pyk.pair_energy(c, w, 1.3, 0.01)
    b = ck.pair_energy(c, w, 1.3, 0.01, threads)
    assert b == pytest.approx(a, rel=1e-12)


@pytest.mark.parametrize("threads", [1, 4])
def test_fourier_points(rng, threads):
    c = rng.uniform(0, 1, (200, 3))
    w = np.full(200, 1 / 200)
    f = rng.uniform(-40, 40, (50, 3))
    assert np.allclose(ck.fourier_points(c, w, f, threads), pyk.fourier_points(c, w, f), atol=1e-12)


@pytest.mark.parametrize("family, m", [(pyk.EUCLID, 2), (pyk.LM_NORM, 4)])
@pytest.mark.parametrize("threads", [1, 3])
def test_lattice_kernels_bit_exact(rng, family, m, threads):
    q = 12
    pts = np.stack(np.meshgrid(*[np.arange(q + 1)] * 2, indexing="ij"), -1).reshape(-1, 2).astype(np.int64)
    n1 = rng.integers(0, q + 1, (500, 2))
    n2 = rng.integers(0, q + 1, (500, 2))
    args = (9.0, 10.0, 0.6, family, m, True)
    a = pyk.lattice_count_brute(pts, n1, n2, *args)
    b = ck.lattice_count_brute(pts, n1, n2, *args, threads)
    assert np.array_equal(a, b)
    ax = np.arange(-q, q + 1)
    V = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2).astype(np.int64)
    shell = V[pyk._hit(pyk._phi(V, family, m), 9.0, 0.6)]
    s1 = pyk.lattice_count_shell(shell, q, n1, n2, 10.0, 0.6, family, m, True)
    s2 = ck.lattice_count_shell(shell, q, n1, n2, 10.0, 0.6, family, m, True, threads)
    assert np.array_equal(s1, s2) and np.array_equal(s1, a)


def test_pure_flag_selects_numpy():
    code = "import fractint; print(fractint.BACKEND)"
    env = dict(os.environ, FRACTINT_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
