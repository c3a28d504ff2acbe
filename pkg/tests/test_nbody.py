import numpy as np
import pytest
from scipy.special import erf

from weakcoupling.nbody import (Ensemble, EnsembleError, chaos_defect, compute_forces,
                                empirical_marginal, epsilon_for, evolve, init_ensemble,
                                total_energy)
from weakcoupling.twobody import PairState, evolve_pair


def test_scaling_and_determinism():
    assert epsilon_for(512) == 0.125
    a, b = init_ensemble(64, seed=4), init_ensemble(64, seed=4)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.velocities, b.velocities)
    with pytest.raises(EnsembleError):
        init_ensemble(1)


def test_velocity_mean_clt():
    e = init_ensemble(1_000_000, seed=2)
    se = np.sqrt(0.5 / e.n)
    assert np.all(np.abs(e.velocities.mean(0)) < 4 * se)


def test_cells_equal_direct(pot):
    e = init_ensemble(216, seed=1)
    a, ua = compute_forces(e, pot, "cells")
    b, ub = compute_forces(e, pot, "direct")
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert ua == pytest.approx(ub, rel=1e-13)


def test_two_particles_match_pair_flow(pot):
    eps = 0.05
    x = np.array([[50.0, 50.0, 50.0], [50.0 + 1.5 * eps, 50.0 + 0.4 * eps, 50.0]])
    v = np.array([[0.4, 0.1, 0.0], [-0.6, 0.0, 0.2]])
    e = Ensemble(x, v, eps, box=100.0)
    t = 0.3
    out = evolve(e, t, eps / 500)
    p = evolve_pair(PairState(x[0], x[1], v[0], v[1], eps), t, eps / 500, pot)
    diff = np.concatenate([out.positions[0] - p.x1, out.positions[1] - p.x2,
                           out.velocities[0] - p.v1, out.velocities[1] - p.v2])
    assert np.linalg.norm(diff) <= 1e-8


def test_free_flight_and_kinetic(zero):
    e = init_ensemble(27, seed=0)
    out = evolve(e, 0.5, potential=zero)
    d = out.positions - (e.positions + 0.5 * e.velocities)
    np.testing.assert_allclose(d - np.round(d), 0.0, atol=1e-12)
    assert total_energy(e, zero) == pytest.approx(0.5 * np.sum(e.velocities**2), rel=1e-15)


def test_separated_is_kinetic():
    x = np.array([[0.1, 0.1, 0.1], [0.6, 0.6, 0.6]])
    e = Ensemble(x, np.ones((2, 3)), 0.1)
    assert total_energy(e) == 3.0


def test_momentum_conserved():
    e = init_ensemble(125, seed=3)
    out = evolve(e, 1.0)
    np.testing.assert_allclose(out.momentum, e.momentum, atol=1e-11)


def test_marginal_matches_gaussian():
    e = init_ensemble(20000, seed=6)
    m = empirical_marginal(e, 1)
    assert m.mass.sum() == pytest.approx(1.0)
    cdf = 0.5 * (1 + erf(m.edges))  # v_x ~ N(0, 1/2)
    p = np.diff(cdf) / (cdf[-1] - cdf[0])
    assert np.all(np.abs(m.mass - p) <= 4 * np.sqrt(p * (1 - p) / m.samples) + 1e-12)


def test_pair_marginal_factorises_at_t0():
    e = init_ensemble(2000, seed=7)
    m1 = empirical_marginal(e, 1).mass
    m2 = empirical_marginal(e, 2)
    assert m2.mass.sum() == pytest.approx(1.0)
    assert np.abs(m2.mass - np.outer(m1, m1)).max() < 5 * m2.stderr.max() + 1e-3


def test_chaos_defect_at_noise_floor():
    e = init_ensemble(4096, seed=8)
    cd = chaos_defect(e)
    assert cd.defect <= cd.noise_floor + 4 * cd.noise_std
    with pytest.raises(EnsembleError):
        evolve(e, 0.1, dt=0.1)


def test_chaos_excess_ladder():
    prev = None
    for n in (512, 1728, 4096):
        e = evolve(init_ensemble(n, seed=0), 0.5)
        cd = chaos_defect(e, n_resample=16)
        if prev is not None:
            assert cd.excess <= prev.excess + 3 * np.hypot(cd.noise_std, prev.noise_std)
        prev = cd
