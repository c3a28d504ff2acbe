import numpy as np
import pytest

from weakcoupling.landau import (DensityGrid, GridError, bimaxwellian, free_transport,
                                 landau_first_order_pairing, landau_increment, maxwellian, moments,
                                 q_landau, q_landau_weak)
from weakcoupling.profiles import InitialData, TestFunction, free_pairing

# direct O(n^6) double sum of the discrete weak form, 16^3 grid on [-5.2, 5.2]^3, A = 1:
# f = bi-Maxwellian (b = 1, drifts +-1.2 e2), psi = default test-function velocity factor
DIRECT_WEAK_16 = -0.019194308879510888


def _grad_psi(u):
    return lambda V: np.moveaxis(u.grad_psi(np.moveaxis(V, 0, -1)), -1, 0)


def test_weak_form_matches_direct_sum(u):
    f = bimaxwellian(1.0, 1.2, 16, 5.2)
    val = q_landau_weak(f, None, 1.0, grad_psi=_grad_psi(u))
    assert val == pytest.approx(DIRECT_WEAK_16, rel=1e-12)


def test_maxwellian_moments():
    m, p, e = moments(maxwellian(1.0, n=48))
    assert m == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(p, 0.0, atol=1e-12)
    assert e == pytest.approx(1.5, abs=1e-5)
    mean = (0.3, -0.2, 0.1)
    _, p, _ = moments(maxwellian(1.0, mean, n=48, extent=5.0))
    np.testing.assert_allclose(p, mean, atol=1e-6)


def test_moments_linear_and_zero():
    M = maxwellian(1.0, n=24)
    m, p, e = moments(M * 2.0)
    m1, p1, e1 = moments(M)
    assert (m, e) == pytest.approx((2 * m1, 2 * e1))
    z = DensityGrid(np.zeros((16, 16, 16)), 4.5)
    m, p, e = moments(z)
    assert m == 0 and e == 0 and not p.any()


def test_grid_checks():
    with pytest.raises(GridError):
        maxwellian(1.0, (2.0, 0, 0), n=24, extent=4.5)
    with pytest.raises(GridError):
        q_landau_weak(maxwellian(1.0, n=8, extent=4.5), np.ones((8, 8, 8)), 1.0)


def test_conservation_and_energy():
    f = bimaxwellian(1.0, 1.2, 32)
    # one-sided edge weights of the difference gradient cancel only to rounding
    assert abs(q_landau_weak(f, lambda V: np.ones(V.shape[1:]), 1.0)) < 1e-20
    for i in range(3):
        assert abs(q_landau_weak(f, lambda V: V[i], 1.0)) < 1e-14
    assert abs(q_landau_weak(f, lambda V: (V**2).sum(0), 1.0)) < 1e-13


def test_zero_density():
    z = DensityGrid(np.zeros((16, 16, 16)), 4.5)
    assert not np.any(q_landau(z, 1.0).values)


def test_equilibrium_defect_drops():
    d24 = np.abs(q_landau(maxwellian(1.0, n=24), 1.0).values).max()
    d48 = np.abs(q_landau(maxwellian(1.0, n=48), 1.0).values).max()
    assert d48 <= 0.5 * d24


def test_entropy_production_nonpositive():
    f = bimaxwellian(1.0, 1.2, 32)
    V = f.mesh()
    d = np.array([0.0, 1.2, 0.0])[:, None, None, None]
    ea, eb = np.exp(-((V - d) ** 2).sum(0)), np.exp(-((V + d) ** 2).sum(0))
    glog = -2.0 * (ea * (V - d) + eb * (V + d)) / (ea + eb)
    assert q_landau_weak(f, None, 1.0, grad_psi=glog) < 0.0


def test_free_transport():
    f0 = InitialData()
    x = np.array([[0.2, 0.0, 0.0]])
    v = np.array([[0.5, 1.0, 0.0]])
    assert free_transport(f0, 0.0)(x, v) == f0(x, v)
    back = free_transport(free_transport(f0, 0.7), -0.7)
    assert back(x, v) == pytest.approx(f0(x, v), rel=1e-14)
    h = lambda x, v: np.exp(-np.sum(np.asarray(v) ** 2, -1))
    np.testing.assert_array_equal(free_transport(h, 3.0)(x, v), h(x, v))


def test_first_order_pairing_limits(f0, u, pot):
    A = pot.landau_constant()
    assert landau_first_order_pairing(u, f0, 0.0, A) == free_pairing(u, f0, 0.0)
    # Maxwellian in v: Q_L vanishes up to the grid defect
    M = InitialData.maxwellian()
    inc = landau_increment(u, M, 0.5, A, n=32, nx=8, nt=4)
    assert abs(inc) < 5e-4 * free_pairing(u, M, 0.5)
    assert landau_increment(u, f0, 0.5, 0.0) == 0.0


def test_increment_resolution(f0, u, pot):
    A = pot.landau_constant()
    # default x/tau nodes against doubled ones
    base = landau_increment(u, f0, 0.5, A, n=32)
    fine = landau_increment(u, f0, 0.5, A, n=32, nx=48, nt=32)
    assert base == pytest.approx(fine, rel=1e-4)
    shifted = TestFunction(shift=0.4)
    assert landau_increment(shifted, f0, 0.5, A, n=32) != base
