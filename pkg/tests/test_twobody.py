import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakcoupling.profiles import InitialData
from weakcoupling.twobody import (IntegratorConfigError, PairState, deflection_defect,
                                  deflection_ladder, evolve_pair, gamma_tilde, pair_energy,
                                  scatter_experiment, scattering_diagnostics)


def head_on(eps, speed=1.0, b=0.0):
    xi = np.array([-2.0 * eps, b * eps, 0.0])
    w = np.array([speed, 0.0, 0.0])
    return PairState(0.5 * xi, -0.5 * xi, 0.5 * w, -0.5 * w, eps)


def test_free_flight_zero_potential(zero):
    s = PairState([0, 0, 0], [0.01, 0, 0], [1, 0, 0], [-1, 0.5, 0], 0.05)
    e = evolve_pair(s, 0.3, potential=zero)
    np.testing.assert_allclose(e.x1, s.x1 + s.v1 * 0.3, atol=1e-14)
    np.testing.assert_allclose(e.x2, s.x2 + s.v2 * 0.3, atol=1e-14)


def test_separating_pair_never_interacts(pot):
    s = PairState([0, 0, 0], [0.5, 0, 0], [-1, 0, 0], [1, 0, 0], 0.01)
    e = evolve_pair(s, 1.0, potential=pot)
    np.testing.assert_allclose(e.x1, [-1, 0, 0], atol=1e-13)
    np.testing.assert_array_equal(e.v1, s.v1)


def test_head_on_symmetry(pot):
    e = evolve_pair(head_on(0.05, 0.6), 0.2, potential=pot)
    np.testing.assert_allclose(e.x1, -e.x2, atol=1e-12)
    np.testing.assert_allclose(e.v1, -e.v2, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.0, 0.95), st.sampled_from([0.1, 0.05, 0.01]))
def test_reversibility_energy_momentum(speed, b, eps):
    s = head_on(eps, speed, b)
    T = 6.0 * eps / speed
    e = evolve_pair(s, T)
    back = evolve_pair(e, -T)
    assert np.max(np.abs(back.as_array() - s.as_array())) <= 1e-8
    # relative drift <= 1e-8 per unit micro time
    assert abs(pair_energy(e) - pair_energy(s)) <= 1e-8 * (T / eps) * pair_energy(s)
    np.testing.assert_array_equal(e.v1 + e.v2, s.v1 + s.v2)


def test_center_of_mass_free(pot):
    s = PairState([0, 0, 0], [0.02, 0.01, 0], [0.3, 1, 0], [-0.5, 0.2, 0.1], 0.05)
    e = evolve_pair(s, 0.4, potential=pot)
    np.testing.assert_allclose(0.5 * (e.x1 + e.x2), 0.5 * (s.x1 + s.x2) + 0.2 * (s.v1 + s.v2),
                               atol=1e-14)


def test_pair_energy_values():
    s = PairState([0, 0, 0], [1, 0, 0], [1, 0, 0], [0, 2, 0], 0.1)
    assert pair_energy(s) == 5.0
    c = PairState([0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0], 0.04)
    assert pair_energy(c) == pytest.approx(2 * math.sqrt(0.04))


def test_dt_validation():
    with pytest.raises(IntegratorConfigError):
        evolve_pair(head_on(0.1), 0.1, dt_micro=0.1)


def test_gamma_tilde_trivial(zero):
    f0 = InitialData()
    s = head_on(0.05)
    assert gamma_tilde(f0, s, 0.0) == 0.0
    assert gamma_tilde(f0, s, 0.5, potential=zero) == 0.0
    # receding in backward time
    far = PairState([0, 0, 0], [0.5, 0, 0], [1, 0, 0], [-1, 0, 0], 0.01)
    assert gamma_tilde(f0, far, 0.3) == pytest.approx(0.0, abs=1e-14)
    overlapping = PairState([0.01, 0, 0], [-0.01, 0.005, 0], [0.5, 0, 0], [-0.5, 0, 0], 0.05)
    assert gamma_tilde(f0, overlapping, 0.5) != 0.0


def test_scattering_fast_pair(pot):
    eps = 0.01
    s = head_on(eps, 2.0, 0.5)
    d = scattering_diagnostics(s, 8 * eps / 2.0, potential=pot)
    fine = scattering_diagnostics(s, 8 * eps / 2.0, eps / 5000, pot)
    assert d.entered and d.bounds_apply
    assert d.interaction_time <= 4 * eps / 2.0
    # resolution of the node count is one step
    assert abs(d.interaction_time - fine.interaction_time) <= 2 * eps / 500
    assert d.violations == 0


def test_no_entry(pot):
    s = PairState([0, 0, 0], [0.05, 0, 0], [-1, 0, 0], [1, 0, 0], 0.01)
    d = scattering_diagnostics(s, 0.1, potential=pot)
    assert (d.interaction_time, d.max_velocity_deviation, d.entered) == (0.0, 0.0, False)


def test_deflection(pot, zero):
    s = PairState([0.015, 0.01, 0], [-0.015, -0.01, 0], [0.5, 0, 0], [-0.5, 0, 0], 0.1)
    assert deflection_defect(s, 3.0, potential=zero) == 0.0
    rep = deflection_ladder([0.2, 0.1, 0.05, 0.025])
    assert rep.slopes["defect"]["slope"] == pytest.approx(0.5, abs=0.15)
    slow = deflection_ladder([0.05], w=(1, 0, 0)).rows[0]["defect"]
    fast = deflection_ladder([0.05], w=(2, 0, 0)).rows[0]["defect"]
    assert 0.3 < fast / slow < 0.7


def test_scatter_sweep_small():
    rep = scatter_experiment(n_events=100, seed=5)
    assert rep.passed
    assert all(r["interaction_time"] <= r["bound_4eps_over_w"] for r in rep.rows)
