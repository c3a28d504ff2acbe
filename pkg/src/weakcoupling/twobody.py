"""Two-particle flow in macro variables and scattering diagnostics.

Equations of motion for a pair with N = eps^-3 scaling::

    x_i' = v_i,   v_1' = eps^{-1/2} F((x_1 - x_2)/eps) = -v_2'.

The centre of mass moves freely. The relative coordinate in micro units
``rho = (x_1 - x_2)/eps``, ``s = t/eps`` obeys ``rho'' = 2 sqrt(eps) F(rho)``
and is integrated by velocity Verlet on a uniform grid. Whole steps spent
outside the unit ball are skipped analytically; this is exact, because a
Verlet step with zero force is a free-flight step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .potential import PolynomialPotential, RadialPotential, force_xyz
from .report import ExperimentReport
from .rng import block_generator

DEFAULT_DT_FACTOR = 1.0 / 500.0
MAX_DT_FACTOR = 1.0 / 100.0


class IntegratorConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PairState:
    x1: np.ndarray
    x2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    eps: float

    def __post_init__(self):
        for name in ("x1", "x2", "v1", "v2"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (0.0 < self.eps <= 1.0):
            raise ValueError("eps must lie in (0, 1]")

    def as_array(self):
        return np.concatenate([self.x1, self.x2, self.v1, self.v2])

    @property
    def relative_velocity(self):
        return self.v1 - self.v2


@dataclass(frozen=True)
class ScatteringDiagnostics:
    interaction_time: float
    max_velocity_deviation: float
    entered: bool
    relative_speed: float = 0.0
    time_bound: float = math.nan
    deviation_bound: float = math.nan
    bounds_apply: bool = False

    @property
    def violations(self) -> int:
        if not self.bounds_apply:
            return 0
        return int(self.interaction_time > self.time_bound) + int(
            self.max_velocity_deviation > self.deviation_bound)


@numba.njit(cache=True)
def relative_flow(rx, ry, rz, wx, wy, wz, n, h, g, kind, k, amp, knots, coefs):
    """Advance (rho, rho') by n Verlet steps of size h under rho'' = g F(rho).

    Returns (rho, rho', steps spent inside the ball, sup |rho'(s) - rho'(0)|,
    sup |rho(s) - (rho(0) + s rho'(0))|) with the sups over visited nodes.
    """
    w0x, w0y, w0z = wx, wy, wz
    r0x, r0y, r0z = rx, ry, rz
    inside = 0
    maxdev = 0.0
    maxdef = 0.0
    fx, fy, fz = force_xyz(rx, ry, rz, kind, k, amp, knots, coefs)
    ax, ay, az = g * fx, g * fy, g * fz
    j = 0
    while j < n:
        r2 = rx * rx + ry * ry + rz * rz
        if r2 >= 1.0:
            rv = rx * wx + ry * wy + rz * wz
            vv = wx * wx + wy * wy + wz * wz
            m = n - j
            if rv < 0.0 and vv > 0.0:
                disc = rv * rv - vv * (r2 - 1.0)
                if disc > 0.0:
                    s_in = (-rv - math.sqrt(disc)) / vv
                    m = min(m, int(s_in / h))
            if m > 0:
                rx += m * h * wx
                ry += m * h * wy
                rz += m * h * wz
                j += m
                fx, fy, fz = force_xyz(rx, ry, rz, kind, k, amp, knots, coefs)
                ax, ay, az = g * fx, g * fy, g * fz
                s = j * h
                dx = rx - (r0x + s * w0x)
                dy = ry - (r0y + s * w0y)
                dz = rz - (r0z + s * w0z)
                d = math.sqrt(dx * dx + dy * dy + dz * dz)
                if d > maxdef:
                    maxdef = d
                continue
        wx += 0.5 * h * ax
        wy += 0.5 * h * ay
        wz += 0.5 * h * az
        rx += h * wx
        ry += h * wy
        rz += h * wz
        fx, fy, fz = force_xyz(rx, ry, rz, kind, k, amp, knots, coefs)
        ax, ay, az = g * fx, g * fy, g * fz
        wx += 0.5 * h * ax
        wy += 0.5 * h * ay
        wz += 0.5 * h * az
        j += 1
        if rx * rx + ry * ry + rz * rz < 1.0:
            inside += 1
        dx, dy, dz = wx - w0x, wy - w0y, wz - w0z
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        if d > maxdev:
            maxdev = d
        s = j * h
        dx = rx - (r0x + s * w0x)
        dy = ry - (r0y + s * w0y)
        dz = rz - (r0z + s * w0z)
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        if d > maxdef:
            maxdef = d
    return rx, ry, rz, wx, wy, wz, inside, maxdev, maxdef


def _steps(duration, dt):
    """Uniform grid: n steps of size duration/n <= dt."""
    if duration == 0.0:
        return 0, 0.0
    n = int(math.ceil(abs(duration) / dt - 1e-12))
    n = max(n, 1)
    return n, abs(duration) / n


def _check_dt(dt_micro, eps):
    if dt_micro is None:
        return eps * DEFAULT_DT_FACTOR
    if dt_micro <= 0 or dt_micro > eps * MAX_DT_FACTOR * (1 + 1e-12):
        raise IntegratorConfigError(
            f"dt_micro={dt_micro} must lie in (0, eps/100] = (0, {eps * MAX_DT_FACTOR}]")
    return float(dt_micro)


def _run(state: PairState, t: float, dt: float, pot: RadialPotential):
    eps = state.eps
    n, h = _steps(t, dt)
    sign = 1.0 if t >= 0 else -1.0
    rho = (state.x1 - state.x2) / eps
    w = sign * (state.v1 - state.v2)
    out = relative_flow(rho[0], rho[1], rho[2], w[0], w[1], w[2], n, h / eps,
                        2.0 * math.sqrt(eps), *pot.kernel_args())
    return out, sign, n, h


def evolve_pair(state: PairState, t: float, dt_micro: float | None = None,
                potential: RadialPotential | None = None) -> PairState:
    """Exact-centre-of-mass Verlet flow of the pair over macro time ``t``.

    Negative ``t`` runs the flow backward (velocities reversed, flowed
    forward, reversed back).
    """
    pot = potential if potential is not None else PolynomialPotential(3)
    dt = _check_dt(dt_micro, state.eps)
    if t == 0:
        return state
    (rx, ry, rz, wx, wy, wz, *_), sign, _, _ = _run(state, t, dt, pot)
    eps = state.eps
    xc = 0.5 * (state.x1 + state.x2) + 0.5 * (state.v1 + state.v2) * t
    vc = 0.5 * (state.v1 + state.v2)
    xi = eps * np.array([rx, ry, rz])
    w = sign * np.array([wx, wy, wz])
    return PairState(xc + 0.5 * xi, xc - 0.5 * xi, vc + 0.5 * w, vc - 0.5 * w, eps)


def pair_energy(state: PairState, potential: RadialPotential | None = None) -> float:
    """|v1|^2 + |v2|^2 + 2 sqrt(eps) phi((x1 - x2)/eps)."""
    pot = potential if potential is not None else PolynomialPotential(3)
    e = float(state.v1 @ state.v1 + state.v2 @ state.v2)
    return e + 2.0 * math.sqrt(state.eps) * float(pot.eval_phi((state.x1 - state.x2) / state.eps))


def gamma_tilde(f0_pair, state: PairState, tau: float, dt_micro: float | None = None,
                potential: RadialPotential | None = None) -> float:
    """f2(U_2(-tau) Z) - f2(Z - V tau), Z = (x1, x2, v1, v2).

    ``f0_pair`` is a callable ``f(x1, v1, x2, v2)`` or a one-particle density
    ``f(x, v)`` (then the pair density is its tensor square).
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0:
        return 0.0
    f2 = _as_pair_density(f0_pair)
    back = evolve_pair(state, -tau, dt_micro, potential)
    free = f2(state.x1 - state.v1 * tau, state.v1, state.x2 - state.v2 * tau, state.v2)
    return float(f2(back.x1, back.v1, back.x2, back.v2) - free)


def _as_pair_density(f):
    try:
        f(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3))
        return f
    except TypeError:
        return lambda x1, v1, x2, v2: f(x1, v1) * f(x2, v2)


def scattering_diagnostics(state: PairState, horizon: float, dt_micro: float | None = None,
                           potential: RadialPotential | None = None) -> ScatteringDiagnostics:
    """Time spent inside the interaction ball and max velocity deviation.

    The interaction time counts grid nodes inside the ball (resolution one
    step). When |w| > a eps^{1/4}, the bounds 4 eps/|w| and
    C sqrt(eps)/|w| with C = 4 sup|F| are attached.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    pot = potential if potential is not None else PolynomialPotential(3)
    dt = _check_dt(dt_micro, state.eps)
    out, _, n, h = _run(state, horizon, dt, pot)
    inside, maxdev = out[6], out[7]
    eps = state.eps
    nw = float(np.linalg.norm(state.relative_velocity))
    a = pot.cutoff_constant()
    applies = nw > a * eps**0.25 and not pot.is_zero
    return ScatteringDiagnostics(
        interaction_time=inside * h,
        max_velocity_deviation=0.5 * maxdev,
        entered=inside > 0,
        relative_speed=nw,
        time_bound=4.0 * eps / nw if nw > 0 else math.inf,
        deviation_bound=4.0 * pot.sup_force() * math.sqrt(eps) / nw if nw > 0 else math.inf,
        bounds_apply=bool(applies),
    )


def deflection_defect(state: PairState, smax: float, dt_micro: float | None = None,
                      potential: RadialPotential | None = None) -> float:
    """sup_{s <= smax} |(x1(-eps s) - x2(-eps s))/eps - (r - w s)|, r = (x1 - x2)/eps."""
    pot = potential if potential is not None else PolynomialPotential(3)
    dt = _check_dt(dt_micro, state.eps)
    r = (state.x1 - state.x2) / state.eps
    if np.linalg.norm(r) > 1.0 + 1e-12:
        raise ValueError("initial separation must lie inside the interaction ball")
    if pot.is_zero or smax <= 0:
        return 0.0
    out, *_ = _run(state, -smax * state.eps, dt, pot)
    return float(out[8])


# --- experiments ----------------------------------------------------------

def random_entering_pair(rng, eps, speed_range):
    """Pair approaching head-on up to an impact parameter drawn uniformly in the eps-disk."""
    what = rng.standard_normal(3)
    what /= np.linalg.norm(what)
    speed = rng.uniform(*speed_range)
    e1 = np.cross(what, np.eye(3)[int(np.argmin(np.abs(what)))])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(what, e1)
    rad = eps * math.sqrt(rng.random())
    ang = 2 * math.pi * rng.random()
    b = rad * (math.cos(ang) * e1 + math.sin(ang) * e2)
    xi = b - 2.0 * eps * what
    vc = rng.standard_normal(3)
    w = speed * what
    return PairState(0.5 * xi, -0.5 * xi, vc + 0.5 * w, vc - 0.5 * w, eps), rad


def scatter_experiment(eps: float = 0.01, n_events: int = 1000, seed: int = 0,
                       speed_span: float = 3.0, dt_factor: float = DEFAULT_DT_FACTOR,
                       potential: RadialPotential | None = None) -> ExperimentReport:
    """Sample entering pairs with |w| > a eps^{1/4} and check the scattering bounds."""
    pot = potential if potential is not None else PolynomialPotential(3)
    cut = pot.cutoff_constant() * eps**0.25
    rng = block_generator(seed, 0, stream=11)
    rows = []
    for _ in range(n_events):
        st, b = random_entering_pair(rng, eps, (cut * (1 + 1e-9), cut + speed_span))
        nw = float(np.linalg.norm(st.relative_velocity))
        d = scattering_diagnostics(st, 8.0 * eps / nw, eps * dt_factor, pot)
        e0 = pair_energy(st, pot)
        e1 = pair_energy(evolve_pair(st, 8.0 * eps / nw, eps * dt_factor, pot), pot)
        rows.append({"eps": eps, "w": nw, "impact_parameter": b,
                     "interaction_time": d.interaction_time, "bound_4eps_over_w": d.time_bound,
                     "max_dev": d.max_velocity_deviation, "dev_bound": d.deviation_bound,
                     "energy_drift_rel": abs(e1 - e0) / abs(e0),
                     "violations": d.violations})
    rep = ExperimentReport("scatter", rows, meta={"eps": eps, "cutoff": cut, "seed": seed,
                                                  "C": 4.0 * pot.sup_force()})
    rep.checks["zero_violations"] = sum(r["violations"] for r in rows) == 0
    rep.checks["energy_drift_1e-8"] = max(r["energy_drift_rel"] for r in rows) <= 1e-8
    return rep


def deflection_ladder(eps_ladder, r=(0.3, 0.2, 0.0), w=(1.0, 0.0, 0.0), smax: float = 3.0,
                      dt_factor: float = DEFAULT_DT_FACTOR,
                      potential: RadialPotential | None = None) -> ExperimentReport:
    pot = potential if potential is not None else PolynomialPotential(3)
    rows = []
    for eps in eps_ladder:
        xi = eps * np.asarray(r, dtype=float)
        wv = np.asarray(w, dtype=float)
        st = PairState(0.5 * xi, -0.5 * xi, 0.5 * wv, -0.5 * wv, eps)
        rows.append({"eps": eps, "defect": deflection_defect(st, smax, eps * dt_factor, pot)})
    rep = ExperimentReport("deflection", rows, meta={"r": list(r), "w": list(w), "smax": smax})
    if len(rows) > 1:
        rep.fit_slope("eps", "defect")
    return rep
