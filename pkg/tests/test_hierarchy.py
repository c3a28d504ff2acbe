import math

import numpy as np
import pytest

from weakcoupling.hierarchy import (chaos_experiment, collision_term_first, consistency_experiment,
                                    cross_term_bound, factorization_check, first_order_samples,
                                    g1_pairing, gamma1_pairing, gamma2_limit_check, gamma2_pairing,
                                    memory_term, memory_term_split, three_body_flow)
from weakcoupling.profiles import InitialData, TestFunction, free_pairing

# memory term at eps = 0.05, t = 0.5 (default f0, u) from an independent numpy RK4
# implementation on 8 scrambled Sobol sequences of 2^15 points: mean and its standard error
MEMORY_ORACLE = -0.011849870683738089
MEMORY_ORACLE_SE = 0.00021323324964777485


def test_trivial_cases(f0, u, zero):
    assert collision_term_first(u, f0, 0.5, 0.1, 100, potential=zero).value == 0.0
    assert memory_term(u, f0, 0.0, 0.1, 100).value == 0.0
    assert memory_term(u, f0, 0.5, 0.1, 100, potential=zero).value == 0.0
    assert g1_pairing(u, f0, 0.0, 0.1, 100).value == free_pairing(u, f0, 0.0)
    assert g1_pairing(u, f0, 0.5, 0.1, 100, potential=zero).value == free_pairing(u, f0, 0.5)
    assert gamma1_pairing(u, f0, 0.5, 0.1) == 0.0
    assert gamma2_pairing(u, u, f0, 0.5, 0.1, 100, potential=zero).value == 0.0
    assert gamma2_pairing(u, u, f0, 0.0, 0.1, 100).value == 0.0


def test_domain_errors(f0, u):
    with pytest.raises(ValueError):
        memory_term(u, f0, 0.5, 0.1, 0)
    with pytest.raises(ValueError):
        memory_term(u, f0, 0.5, 1.5, 10)
    with pytest.raises(ValueError):
        consistency_experiment(f0, u, 0.5, [0.1, 0.2], 10)


def test_seed_determinism(f0, u):
    a = first_order_samples(u, f0, 0.5, 0.1, 20000, seed=3)
    b = first_order_samples(u, f0, 0.5, 0.1, 20000, seed=3)
    np.testing.assert_array_equal(a.memory, b.memory)
    c = first_order_samples(u, f0, 0.5, 0.1, 20000, seed=4)
    assert not np.array_equal(a.memory, c.memory)


def test_memory_term_oracle(f0, u):
    est = memory_term(u, f0, 0.5, 0.05, 200_000, seed=11)
    assert abs(est.value - MEMORY_ORACLE) <= 3 * math.hypot(est.std_error, MEMORY_ORACLE_SE)


def test_split_sums_exactly(f0, u):
    low, high = memory_term_split(u, f0, 0.5, 0.1, 30000, seed=2)
    tot = memory_term(u, f0, 0.5, 0.1, 30000, seed=2)
    s = first_order_samples(u, f0, 0.5, 0.1, 30000, seed=2)
    assert low.value + high.value == tot.value
    assert tot.value == pytest.approx(math.fsum(s.memory) / len(s.memory), rel=1e-12)


def test_collision_term_shrinks(f0, u):
    big = collision_term_first(u, f0, 0.5, 0.2, 50000)
    small = collision_term_first(u, f0, 0.5, 0.025, 50000)
    assert abs(small.value) < abs(big.value)
    assert abs(small.value) / abs(big.value) == pytest.approx(8**-0.5, rel=0.3)


def test_gamma2_ladder_decreases(f0, u):
    rep = gamma2_limit_check(f0, u, 0.5, [0.2, 0.05], n_samples=20000)
    assert rep.passed


def test_three_body_free_and_pair(pot):
    args = pot.kernel_args()
    q = np.array([[0.0, 0, 0], [5.0, 5.0, 0], [0.5, 0, 0]])
    p = np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, 0, 0]])
    qf, pf = three_body_flow(q, p, 100, 0.01, 0.1, True, *args)
    # particle 1 (index 1) is far away and moves freely
    np.testing.assert_allclose(qf[1], q[1] + p[1], atol=1e-12)
    np.testing.assert_allclose(pf.sum(0), p.sum(0), atol=1e-13)
    z = three_body_flow(q, p, 100, 0.01, 0.0, True, *args)
    np.testing.assert_allclose(z[0], q + p, atol=1e-12)


def test_cross_term_bound_positive_and_small(u):
    big = cross_term_bound(u, u, 1.0, 0.5, 0.2, 20000)
    small = cross_term_bound(u, u, 1.0, 0.5, 0.05, 20000)
    assert big.value > 0 and 0 < small.value < big.value


def test_factorization_at_t0(f0, u):
    u2 = TestFunction(c=0.0, axis=(1.0, 0.0, 0.0), shift=0.3)
    est, prod = factorization_check(u, u2, f0, 50000)
    assert abs(est.value - prod) <= 3 * est.std_error


def test_experiments_degenerate(f0, u, zero):
    rep = consistency_experiment(f0, u, 0.0, [0.1], 100)
    assert rep.checks == {} and rep.rows[0]["reference"] == free_pairing(u, f0, 0.0)
    u2 = TestFunction(shift=0.3)
    ch = chaos_experiment(f0, u, u2, 0.5, [0.1], 200, potential=zero)
    assert ch.rows[0]["value"] == pytest.approx(free_pairing(u, f0, 0.5) * free_pairing(u2, f0, 0.5))
    ch0 = chaos_experiment(f0, u, u2, 0.0, [0.1], 200)
    assert ch0.rows[0]["value"] == pytest.approx(free_pairing(u, f0, 0.0) * free_pairing(u2, f0, 0.0))
