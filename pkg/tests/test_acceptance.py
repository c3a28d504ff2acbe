"""Acceptance criteria, each at its stated tolerance. One PASS/FAIL line per criterion."""

import json
import math

import numpy as np
import pytest

from weakcoupling import cli
from weakcoupling import config as cfgmod
from weakcoupling.hierarchy import (chaos_experiment, consistency_experiment, first_order_ladder,
                                    gamma2_limit_check)
from weakcoupling.kernel import a_matrix, kernel_convergence_study, spherical_delta_matrix
from weakcoupling.landau import (EQUILIBRIUM_DEFECT_BOUND_48, ROUNDING_FLOOR, bimaxwellian,
                                 maxwellian, q_landau, q_landau_weak)
from weakcoupling.nbody import Ensemble, compute_forces, evolve, init_ensemble, nbody_run
from weakcoupling.potential import PolynomialPotential
from weakcoupling.profiles import InitialData, TestFunction
from weakcoupling.twobody import (PairState, deflection_ladder, evolve_pair, random_entering_pair,
                                  scatter_experiment)
from weakcoupling.rng import block_generator

LADDER = [0.2, 0.1, 0.05, 0.025]
A_ORACLE = 0.76595020887523148  # see test_potential


def test_c01_kernel_limit(criterion, pot):
    rep = kernel_convergence_study([1.0, 0.0, 0.0], LADDER, tau=1.0, potential=pot)
    err = rep.column("frob_err_rel")
    quad = rep.column("quad_err_rel")
    dec = bool(np.all(np.diff(err) < 0))
    ok = dec and err[-1] <= 0.05 and quad.max() <= 0.005
    criterion(1, "kernel limit", ok,
              f"errors={np.array2string(err, precision=3)} strictly_decreasing={dec} "
              f"quad_err_max={quad.max():.2e}")


def test_c02_a_structure(criterion):
    rng = np.random.default_rng(20)
    worst = [0.0, 0.0, 0.0]
    A = 0.8
    for _ in range(100):
        w = rng.normal(size=3) * rng.uniform(0.1, 5.0)
        nw = np.linalg.norm(w)
        K = a_matrix(w, A)
        worst[0] = max(worst[0], np.linalg.norm(K.entries @ w) / (A / nw))
        worst[1] = max(worst[1], np.abs(np.sort(K.eigenvalues()) - [0, A / nw, A / nw]).max())
        worst[2] = max(worst[2], np.abs(spherical_delta_matrix(w, A).entries - K.entries).max())
    ok = worst[0] <= 1e-12 and worst[1] <= 1e-10 and worst[2] <= 1e-10
    criterion(2, "a(w) structure", ok, "max |a w|/(A/|w|)={:.1e} eig={:.1e} delta={:.1e}".format(*worst))


def test_c03_landau_constant(criterion, pot):
    A = pot.landau_constant()
    rel = abs(A - A_ORACLE) / A_ORACLE
    A2 = PolynomialPotential(3, 2.0).landau_constant()
    scale = abs(A2 - 4 * A) / (4 * A)
    criterion(3, "Landau constant", rel <= 1e-6 and scale <= 1e-12,
              f"A={A:.15f} rel_err={rel:.1e} scaling_err={scale:.1e}")


def test_c04_conservation(criterion):
    ones = lambda V: np.ones(V.shape[1:])
    en = {}
    worst = 0.0
    # 23 -> 46 intervals: the spacing halves exactly
    for n in (24, 47, 48):
        f = bimaxwellian(1.0, 1.2, n)
        vals = [q_landau_weak(f, ones, 1.0)] + [q_landau_weak(f, lambda V, i=i: V[i], 1.0) for i in range(3)]
        worst = max(worst, max(abs(v) for v in vals))
        en[n] = abs(q_landau_weak(f, lambda V: (V**2).sum(0), 1.0))
    halves = en[47] <= 0.5 * en[24] or max(en[24], en[47]) <= ROUNDING_FLOOR
    ok = worst <= ROUNDING_FLOOR and halves
    criterion(4, "Q_L conservation", ok,
              f"max|mass,momentum|={worst:.1e} energy: h={en[24]:.1e} h/2={en[47]:.1e} (48^3: {en[48]:.1e})")


def test_c05_equilibrium(criterion):
    d48 = float(np.abs(q_landau(maxwellian(1.0, n=48), 1.0).values).max())
    d96 = float(np.abs(q_landau(maxwellian(1.0, n=96), 1.0).values).max())
    ok = d48 <= EQUILIBRIUM_DEFECT_BOUND_48 and d96 <= 0.5 * d48
    criterion(5, "Maxwellian equilibrium", ok,
              f"sup|Q(M,M)| 48^3={d48:.2e} (bound {EQUILIBRIUM_DEFECT_BOUND_48:.0e}) 96^3={d96:.2e}")


def test_c06_two_body(criterion, pot):
    eps = 0.01
    rep = scatter_experiment(eps, 1000, seed=0, potential=pot)
    cut = pot.cutoff_constant() * eps**0.25
    rng = block_generator(0, 0, stream=12)
    rev = 0.0
    mom = 0.0
    for _ in range(1000):
        st, _ = random_entering_pair(rng, eps, (cut * (1 + 1e-9), cut + 3.0))
        T = 8.0 * eps / np.linalg.norm(st.relative_velocity)
        e = evolve_pair(st, T, potential=pot)
        rev = max(rev, np.abs(evolve_pair(e, -T, potential=pot).as_array() - st.as_array()).max())
        scale = np.abs(np.concatenate([st.v1, st.v2])).max()
        mom = max(mom, np.abs((e.v1 + e.v2) - (st.v1 + st.v2)).max() / scale)
    drift = max(r["energy_drift_rel"] for r in rep.rows)
    viol = sum(r["violations"] for r in rep.rows)
    ok = rev <= 1e-8 and drift <= 1e-8 and mom <= 64 * np.finfo(float).eps and viol == 0
    criterion(6, "two-body integrity", ok,
              f"reversibility={rev:.1e} energy_drift={drift:.1e} momentum_rel={mom:.1e} violations={viol}")


def test_c07_deflection_slope(criterion):
    rep = deflection_ladder(LADDER)
    s = rep.slopes["defect"]["slope"]
    criterion(7, "deflection defect slope", abs(s - 0.5) <= 0.15, f"slope={s:.3f}")


def test_c08_nbody(criterion, pot):
    e = init_ensemble(216, seed=1)
    a, _ = compute_forces(e, pot, "cells")
    b, _ = compute_forces(e, pot, "direct")
    fdiff = float(np.abs(a - b).max())
    eps = 0.05
    x = np.array([[50.0, 50.0, 50.0], [50.0 + 1.5 * eps, 50.0 + 0.4 * eps, 50.0]])
    v = np.array([[0.4, 0.1, 0.0], [-0.6, 0.0, 0.2]])
    out = evolve(Ensemble(x, v, eps, box=100.0), 0.3, eps / 500, pot)
    p = evolve_pair(PairState(x[0], x[1], v[0], v[1], eps), 0.3, eps / 500, pot)
    pdiff = float(np.linalg.norm(np.concatenate([out.positions[0] - p.x1, out.positions[1] - p.x2,
                                                 out.velocities[0] - p.v1, out.velocities[1] - p.v2])))
    rep, _ = nbody_run(512, 1.0, 1.0 / 200.0, seed=0, potential=pot)
    drift = rep.meta["energy_drift_rel"]
    ok = fdiff <= 1e-12 and pdiff <= 1e-8 and drift <= 1e-5
    criterion(8, "N-body", ok, f"cells-direct={fdiff:.1e} N=2 vs pair={pdiff:.1e} energy_drift={drift:.1e}")


@pytest.fixture(scope="module")
def first_order(f0, u):
    return first_order_ladder(u, f0, 0.5, LADDER, 100_000, seed=0)


def test_c09_collision_slope(criterion, first_order):
    s = first_order.slopes["collision"]
    lo, hi = s["slope"] - s["stderr"], s["slope"] + s["stderr"]
    ok = 0.35 < lo and hi < 0.65
    criterion(9, "collision-term slope", ok, f"slope={s['slope']:.3f}+-{s['stderr']:.3f}")


def test_c10_cutoff_split(criterion, first_order):
    s = first_order.slopes["memory_low"]["slope"]
    ratio = first_order.column("low_high_ratio")
    resid = np.abs(first_order.column("split_sum_residual")).max()
    dec = bool(np.all(np.diff(ratio) < 0))
    ok = s >= 0.2 and dec and resid == 0.0
    criterion(10, "cutoff split", ok,
              f"slope(T<=)={s:.3f} ratios={np.array2string(ratio, precision=2)} split_residual={resid:.0e}")


@pytest.mark.slow
def test_c11_consistency(criterion, f0, u, pot):
    rep = consistency_experiment(f0, u, 0.5, LADDER, 1_000_000, seed=0, potential=pot,
                                 reference=cfgmod.DEFAULTS["consistency"]["reference"])
    gaps = rep.column("gap")
    criterion(11, "consistency", rep.passed,
              f"gaps={np.array2string(gaps, precision=4)} ratio={gaps[-1] / gaps[0]:.3f} "
              f"checks={rep.checks}")


def test_c12_gamma_vanishing(criterion, f0, u):
    rep = gamma2_limit_check(f0, u, 0.5, LADDER, seed=0, n_samples=100_000)
    g = np.abs(rep.column("gamma2"))
    criterion(12, "gamma vanishing", rep.passed,
              f"gamma1=0 |<u,gamma2>|={np.array2string(g, precision=2)}")


def test_c13_chaos(criterion, f0, u, pot):
    u2 = TestFunction.from_config(cfgmod.DEFAULTS["common"]["u2"])
    rep = chaos_experiment(f0, u, u2, 0.5, LADDER, 100_000, seed=0, potential=pot,
                           reference=cfgmod.DEFAULTS["chaos"]["reference"])
    s = rep.slopes.get("cross", {"slope": math.nan, "stderr": math.nan})
    criterion(13, "chaos j=2", rep.passed,
              f"t0_factorization={rep.checks['t0_factorization_3sigma']} "
              f"gap_nonincreasing={rep.checks['gap_nonincreasing_3sigma']} "
              f"cross_slope={s['slope']:.3f}+-{s['stderr']:.3f}")


SMALL = {
    "kernel-limit": ["resolution=[12, 6, 12]", "check_quadrature=false", "eps_ladder=[0.1, 0.05]"],
    "landau-q": ["points=[16, 20]"],
    "scatter": ["n_events=20"],
    "nbody-run": ["N=64", "t_final=0.05"],
    "consistency": ["n_samples=2000", "eps_ladder=[0.2, 0.1]", "reference.n=24", "reference.nx=8",
                    "reference.nt=4"],
    "chaos": ["n_samples=2000", "eps_ladder=[0.2, 0.1]", "reference.n=24", "reference.nx=8",
              "reference.nt=4"],
}


def test_c14_reproducibility(criterion, tmp_path):
    bad = []
    for name, sets in SMALL.items():
        cfg = cfgmod.resolve(name, {}, sets)
        first = tmp_path / name
        cli.run(name, cfg, str(first))
        man = first / f"{name}.manifest.json"
        again = tmp_path / f"{name}-rerun"
        code = cli.main(["rerun", str(man), "--output-dir", str(again)])
        files = json.loads(man.read_text())["outputs"]
        same = code == 0 and all((first / f).read_bytes() == (again / f).read_bytes() for f in files)
        if not same:
            bad.append(name)
    criterion(14, "reproducibility", not bad, f"experiments={len(SMALL)} differing={bad}")
