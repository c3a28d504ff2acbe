"""Monte-Carlo evaluation of the first-order Duhamel pairings.

With N = eps^-3, ``x_2 = x_1 - eps r`` and ``R(x_1, v_1, tau) =
grad_{v_1}[u(x_1 + v_1 (t - tau), v_1)]``, the two first-order pieces of
``<u, g_1(t)>`` are

    CT  = (N-1) eps^{5/2} int dtau dx_1 dr dv_1 dv_2  R . F(r) f0(x_1 - v_1 tau, v_1) f0(x_2 - v_2 tau, v_2)
    MEM = (N-1) eps^{5/2} int dtau dx_1 dr dv_1 dv_2  R . F(r) gamma2(x_1, x_2, v_1, v_2, tau)

where ``gamma2 = f2(U_2(-tau) Z) - f2(Z - V tau)``. The first is the
collision term with free data (O(sqrt eps)), the second the memory term that
converges to the Landau pairing.

Sampling: tau uniform on [0, t], ``y = x_1 + v_1 (t - tau)`` uniform on the
support of the test function in x, r uniform on the unit ball, velocities
from f0's Maxwellian mixture. Each r is paired with -r (antithetic), which
removes the O(1) part of the integrand odd in r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .landau import landau_increment
from .potential import PolynomialPotential, RadialPotential, force_xyz
from .profiles import (InitialData, TestFunction, free_pairing, nb_f0, nb_g, nb_R, nb_u,
                       nb_eta)
from .report import ExperimentReport
from .rng import block_generator, block_sizes, uniform_ball
from .twobody import DEFAULT_DT_FACTOR, relative_flow


@dataclass(frozen=True)
class PairingEstimate:
    value: float
    std_error: float
    samples: int
    eps: float
    t: float

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")


def _estimate(x, eps, t, scale=1.0):
    x = np.asarray(x)
    n = len(x)
    if n == 0:
        return PairingEstimate(0.0, 0.0, 0, eps, t)
    m = math.fsum(x) / n
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return PairingEstimate(scale * m, abs(scale) * sd / math.sqrt(n), n, eps, t)


def _zero(eps, t, n=0):
    return PairingEstimate(0.0, 0.0, n, eps, t)


def _check(eps, t, n):
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if n <= 0:
        raise ValueError("need a positive number of samples")


# --- first-order kernel ----------------------------------------------------

@numba.njit(cache=True)
def _first_order_kernel(t, eps, taus, ys, rs, v1s, v2s, h_nom, need_flow,
                        fL, fp, fb, fdr, fw, uL, up, uR, uq, uc, uax, ush,
                        kind, k, amp, knots, coefs):
    n = taus.shape[0]
    out = np.zeros((n, 3))
    g2 = 2.0 * math.sqrt(eps)
    for i in range(n):
        tau = taus[i]
        T = t - tau
        v1x, v1y, v1z = v1s[i, 0], v1s[i, 1], v1s[i, 2]
        v2x, v2y, v2z = v2s[i, 0], v2s[i, 1], v2s[i, 2]
        wx, wy, wz = v1x - v2x, v1y - v2y, v1z - v2z
        out[i, 2] = math.sqrt(wx * wx + wy * wy + wz * wz)
        Rx, Ry, Rz = nb_R(ys[i], v1x, v1y, v1z, T, uL, up, uR, uq, uc, uax, ush)
        if Rx == 0.0 and Ry == 0.0 and Rz == 0.0:
            continue
        wgt = 1.0 / (nb_g(v1x, v1y, v1z, fb, fdr, fw) * nb_g(v2x, v2y, v2z, fb, fdr, fw))
        x1 = ys[i] - v1x * T
        S = tau / eps
        nsteps = 0
        hs = 0.0
        if S > 0.0:
            nsteps = max(1, int(math.ceil(S / h_nom - 1e-12)))
            hs = S / nsteps
        ct = 0.0
        mem = 0.0
        for sgn in (1.0, -1.0):
            r0, r1, r2 = sgn * rs[i, 0], sgn * rs[i, 1], sgn * rs[i, 2]
            Fx, Fy, Fz = force_xyz(r0, r1, r2, kind, k, amp, knots, coefs)
            RF = Rx * Fx + Ry * Fy + Rz * Fz
            if RF == 0.0:
                continue
            x2 = x1 - eps * r0
            free = (nb_f0(x1 - v1x * tau, v1x, v1y, v1z, fL, fp, fb, fdr, fw)
                    * nb_f0(x2 - v2x * tau, v2x, v2y, v2z, fL, fp, fb, fdr, fw))
            ct += RF * free
            if need_flow and nsteps > 0:
                res = relative_flow(r0, r1, r2, -wx, -wy, -wz, nsteps, hs, g2,
                                    kind, k, amp, knots, coefs)
                # backward state: xi(-tau) = eps rho, w(-tau) = -rho'
                xc = 0.5 * (x1 + x2) - 0.5 * (v1x + v2x) * tau
                cx, cy, cz = 0.5 * (v1x + v2x), 0.5 * (v1y + v2y), 0.5 * (v1z + v2z)
                bx, by, bz = -res[3], -res[4], -res[5]
                a = (nb_f0(xc + 0.5 * eps * res[0], cx + 0.5 * bx, cy + 0.5 * by, cz + 0.5 * bz,
                           fL, fp, fb, fdr, fw)
                     * nb_f0(xc - 0.5 * eps * res[0], cx - 0.5 * bx, cy - 0.5 * by, cz - 0.5 * bz,
                             fL, fp, fb, fdr, fw))
                mem += RF * (a - free)
        out[i, 0] = 0.5 * ct * wgt
        out[i, 1] = 0.5 * mem * wgt
    return out


@dataclass
class FirstOrderSamples:
    """Per-sample contributions (already scaled so that the mean is the estimate)."""

    collision: np.ndarray
    memory: np.ndarray
    rel_speed: np.ndarray
    eps: float
    t: float


def first_order_samples(u: TestFunction, f0: InitialData, t: float, eps: float, n_samples: int,
                        seed: int = 0, potential: RadialPotential | None = None,
                        dt_factor: float = DEFAULT_DT_FACTOR, need_flow: bool = True,
                        stream: int = 0) -> FirstOrderSamples:
    _check(eps, t, n_samples)
    pot = potential if potential is not None else PolynomialPotential(3)
    if pot.is_zero or t == 0:
        z = np.zeros(n_samples)
        return FirstOrderSamples(z, z.copy(), z.copy(), eps, t)
    parts = []
    for b, m in block_sizes(n_samples):
        rng = block_generator(seed, b, stream=100 + stream)
        taus = rng.uniform(0.0, t, m)
        ys = u.shift + rng.uniform(-u.length, u.length, m)
        rs = uniform_ball(rng, m)
        v1 = f0.sample_velocities(rng, m)
        v2 = f0.sample_velocities(rng, m)
        parts.append(_first_order_kernel(t, eps, taus, ys, rs, v1, v2, dt_factor, need_flow,
                                         *f0.params(), *u.params(), *pot.kernel_args()))
    out = np.concatenate(parts)
    N = eps**-3
    scale = (N - 1.0) * eps**2.5 * t * 2.0 * u.length * (4.0 * math.pi / 3.0)
    return FirstOrderSamples(out[:, 0] * scale, out[:, 1] * scale, out[:, 2], eps, t)


def collision_term_first(u, f0, t, eps, n_samples, seed=0, potential=None) -> PairingEstimate:
    """Collision term of the first Duhamel step evaluated on free data; O(sqrt eps)."""
    s = first_order_samples(u, f0, t, eps, n_samples, seed, potential, need_flow=False)
    return _estimate(s.collision, eps, t)


def _split(s: FirstOrderSamples, cut: float):
    low = s.rel_speed <= cut
    n = len(s.memory)
    a = np.where(low, s.memory, 0.0)
    b = np.where(low, 0.0, s.memory)
    sa, sb = math.fsum(a), math.fsum(b)
    sd = lambda x: float(np.std(x, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return (PairingEstimate(sa / n, sd(a), n, s.eps, s.t),
            PairingEstimate(sb / n, sd(b), n, s.eps, s.t),
            PairingEstimate(sa / n + sb / n, sd(s.memory), n, s.eps, s.t))


def memory_term_split(u, f0, t, eps, n_samples, seed=0, potential=None,
                      dt_factor=DEFAULT_DT_FACTOR):
    """Memory term split by |v_1 - v_2| <= a eps^{1/4} (first) and > (second).

    Both parts use the true two-body flow; every sample lands in exactly one
    part, and the total is assembled from the two partial sums.
    """
    pot = potential if potential is not None else PolynomialPotential(3)
    s = first_order_samples(u, f0, t, eps, n_samples, seed, pot, dt_factor)
    low, high, _ = _split(s, pot.cutoff_constant() * eps**0.25)
    return low, high


def memory_term(u, f0, t, eps, n_samples, seed=0, potential=None,
                dt_factor=DEFAULT_DT_FACTOR) -> PairingEstimate:
    pot = potential if potential is not None else PolynomialPotential(3)
    s = first_order_samples(u, f0, t, eps, n_samples, seed, pot, dt_factor)
    return _split(s, pot.cutoff_constant() * eps**0.25)[2]


def g1_pairing(u, f0, t, eps, n_samples, seed=0, potential=None,
               dt_factor=DEFAULT_DT_FACTOR) -> PairingEstimate:
    """<u, S(t) f0> + collision term + memory term, with a joint error bar."""
    base = free_pairing(u, f0, t)
    s = first_order_samples(u, f0, t, eps, n_samples, seed, potential, dt_factor)
    est = _estimate(s.collision + s.memory, eps, t)
    return PairingEstimate(base + est.value, est.std_error, est.samples, eps, t)


def gamma1_pairing(u, f0, t, eps) -> float:
    """The one-particle oscillating part vanishes identically (T_1 = 0)."""
    return 0.0


# --- <u1 (x) u2, gamma2(t)> ------------------------------------------------

@numba.njit(cache=True)
def _gamma2_kernel(t, eps, ys, bs, s0u, v1s, v2s, h_nom,
                   fL, fp, fb, fdr, fw,
                   aL, ap, aR, aq, ac, aax, ash,
                   bL, bp, bR, bq, bc, bax, bsh,
                   kind, k, amp, knots, coefs):
    n = ys.shape[0]
    out = np.zeros(n)
    g2 = 2.0 * math.sqrt(eps)
    S = t / eps
    nsteps = max(1, int(math.ceil(S / h_nom - 1e-12)))
    hs = S / nsteps
    for i in range(n):
        v1 = v1s[i]
        v2 = v2s[i]
        wx, wy, wz = v1[0] - v2[0], v1[1] - v2[1], v1[2] - v2[2]
        nw = math.sqrt(wx * wx + wy * wy + wz * wz)
        if nw == 0.0:
            continue
        hx, hy, hz = wx / nw, wy / nw, wz / nw
        # orthonormal frame of the plane orthogonal to w
        if abs(hx) <= abs(hy) and abs(hx) <= abs(hz):
            ex, ey, ez = 0.0, hz, -hy
        elif abs(hy) <= abs(hz):
            ex, ey, ez = -hz, 0.0, hx
        else:
            ex, ey, ez = hy, -hx, 0.0
        en = math.sqrt(ex * ex + ey * ey + ez * ez)
        ex, ey, ez = ex / en, ey / en, ez / en
        fx, fy, fz = hy * ez - hz * ey, hz * ex - hx * ez, hx * ey - hy * ex
        span = S + 2.0 / nw
        s0 = -1.0 / nw + s0u[i] * span
        rx = bs[i, 0] * ex + bs[i, 1] * fx + hx * nw * s0
        ry = bs[i, 0] * ey + bs[i, 1] * fy + hy * nw * s0
        rz = bs[i, 0] * ez + bs[i, 1] * fz + hz * nw * s0
        x1 = ys[i]
        x2 = x1 - eps * rx
        U = (nb_u(x1, v1[0], v1[1], v1[2], aL, ap, aR, aq, ac, aax, ash)
             * nb_u(x2, v2[0], v2[1], v2[2], bL, bp, bR, bq, bc, bax, bsh))
        if U == 0.0:
            continue
        res = relative_flow(rx, ry, rz, -wx, -wy, -wz, nsteps, hs, g2, kind, k, amp, knots, coefs)
        xc = 0.5 * (x1 + x2) - 0.5 * (v1[0] + v2[0]) * t
        cx, cy, cz = 0.5 * (v1[0] + v2[0]), 0.5 * (v1[1] + v2[1]), 0.5 * (v1[2] + v2[2])
        bx, by, bz = -res[3], -res[4], -res[5]
        fb_ = (nb_f0(xc + 0.5 * eps * res[0], cx + 0.5 * bx, cy + 0.5 * by, cz + 0.5 * bz,
                     fL, fp, fb, fdr, fw)
               * nb_f0(xc - 0.5 * eps * res[0], cx - 0.5 * bx, cy - 0.5 * by, cz - 0.5 * bz,
                       fL, fp, fb, fdr, fw))
        ff = (nb_f0(x1 - v1[0] * t, v1[0], v1[1], v1[2], fL, fp, fb, fdr, fw)
              * nb_f0(x2 - v2[0] * t, v2[0], v2[1], v2[2], fL, fp, fb, fdr, fw))
        wgt = 1.0 / (nb_g(v1[0], v1[1], v1[2], fb, fdr, fw) * nb_g(v2[0], v2[1], v2[2], fb, fdr, fw))
        out[i] = U * (fb_ - ff) * wgt * math.pi * nw * span
    return out


def gamma2_pairing(u1: TestFunction, u2: TestFunction, f0: InitialData, t: float, eps: float,
                   n_samples: int, seed: int = 0, potential: RadialPotential | None = None,
                   dt_factor: float = DEFAULT_DT_FACTOR) -> PairingEstimate:
    """<u1 (x) u2, f2(U_2(-t) .) - f2(S(-t) .)> per unit transverse area of x_1.

    Only pairs whose backward straight relative path enters the interaction
    ball contribute (outside it the flows coincide), so x_1 - x_2 = eps rho
    is drawn on that tube: rho = b + w_hat |w| s0 with b in the unit disk
    orthogonal to w and s0 in [-1/|w|, t/eps + 1/|w|]; d rho = |w| db ds0.
    """
    _check(eps, t, n_samples)
    pot = potential if potential is not None else PolynomialPotential(3)
    if pot.is_zero or t == 0:
        return _zero(eps, t, n_samples)
    parts = []
    for b, m in block_sizes(n_samples):
        rng = block_generator(seed, b, stream=200)
        ys = u1.shift + rng.uniform(-u1.length, u1.length, m)
        rad = np.sqrt(rng.random(m))
        ang = 2.0 * math.pi * rng.random(m)
        bs = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        s0u = rng.random(m)
        v1 = f0.sample_velocities(rng, m)
        v2 = f0.sample_velocities(rng, m)
        parts.append(_gamma2_kernel(t, eps, ys, bs, s0u, v1, v2, dt_factor, *f0.params(),
                                    *u1.params(), *u2.params(), *pot.kernel_args()))
    return _estimate(np.concatenate(parts), eps, t, scale=eps**3 * 2.0 * u1.length)


# --- three-body flow and the cross-term bound ------------------------------

@numba.njit(cache=True)
def three_body_flow(q, p, n, h, c, active2, kind, k, amp, knots, coefs):
    """n Verlet steps of q_i'' = c sum_j F(q_i - q_j) for three particles (micro units).

    ``active2 = False`` switches off every interaction of particle index 1
    (it then moves freely). Whole steps with all pairs outside the unit ball
    are skipped exactly. Returns the final positions and velocities.
    """
    q = q.copy()
    p = p.copy()
    acc = np.zeros((3, 3))

    def accel(q, acc):
        for a in range(3):
            acc[a, 0] = 0.0
            acc[a, 1] = 0.0
            acc[a, 2] = 0.0
        for a in range(3):
            for b in range(a + 1, 3):
                if not active2 and (a == 1 or b == 1):
                    continue
                fx, fy, fz = force_xyz(q[a, 0] - q[b, 0], q[a, 1] - q[b, 1], q[a, 2] - q[b, 2],
                                       kind, k, amp, knots, coefs)
                acc[a, 0] += c * fx
                acc[a, 1] += c * fy
                acc[a, 2] += c * fz
                acc[b, 0] -= c * fx
                acc[b, 1] -= c * fy
                acc[b, 2] -= c * fz

    accel(q, acc)
    j = 0
    while j < n:
        # earliest entry over pairs that are outside and approaching
        all_out = True
        m = n - j
        for a in range(3):
            for b in range(a + 1, 3):
                if not active2 and (a == 1 or b == 1):
                    continue
                dx = q[a, 0] - q[b, 0]
                dy = q[a, 1] - q[b, 1]
                dz = q[a, 2] - q[b, 2]
                r2 = dx * dx + dy * dy + dz * dz
                if r2 < 1.0:
                    all_out = False
                    continue
                ux = p[a, 0] - p[b, 0]
                uy = p[a, 1] - p[b, 1]
                uz = p[a, 2] - p[b, 2]
                rv = dx * ux + dy * uy + dz * uz
                vv = ux * ux + uy * uy + uz * uz
                if rv < 0.0 and vv > 0.0:
                    disc = rv * rv - vv * (r2 - 1.0)
                    if disc > 0.0:
                        s_in = (-rv - math.sqrt(disc)) / vv
                        mm = int(s_in / h)
                        if mm < m:
                            m = mm
        if all_out and m > 0:
            for a in range(3):
                for d in range(3):
                    q[a, d] += m * h * p[a, d]
            j += m
            accel(q, acc)
            continue
        for a in range(3):
            for d in range(3):
                p[a, d] += 0.5 * h * acc[a, d]
                q[a, d] += h * p[a, d]
        accel(q, acc)
        for a in range(3):
            for d in range(3):
                p[a, d] += 0.5 * h * acc[a, d]
        j += 1
    return q, p


@numba.njit(cache=True)
def _cross_kernel(t, eps, taus, sfrac, ys, rs, qs, V, h_nom, pad,
                  aL, ap, ash, bL, bp, bsh, kind, k, amp, knots, coefs):
    """|F((x1 - x3)/eps)| |F((x2(-s) - x3(-s))/eps)| eta1(x1) eta2(x2), weighted.

    Particles 0, 1, 2 in the code are particles 1, 2, 3 of the bound.
    """
    n = taus.shape[0]
    out = np.zeros(n)
    c = math.sqrt(eps)
    for i in range(n):
        tau = taus[i]
        s = sfrac[i] * tau
        sig = s / eps
        e1, _ = nb_eta(ys[i], aL, ap, ash)
        if e1 == 0.0:
            continue
        F0x, F0y, F0z = force_xyz(rs[i, 0], rs[i, 1], rs[i, 2], kind, k, amp, knots, coefs)
        f13 = math.sqrt(F0x * F0x + F0y * F0y + F0z * F0z)
        if f13 == 0.0:
            continue
        nsteps = 0
        hs = 0.0
        if sig > 0.0:
            nsteps = max(1, int(math.ceil(sig / h_nom - 1e-12)))
            hs = sig / nsteps
        q = np.zeros((3, 3))
        p = np.zeros((3, 3))
        # backward flow = forward flow with reversed velocities
        for d in range(3):
            q[2, d] = -rs[i, d]
            p[0, d] = -V[i, 0, d]
            p[1, d] = -V[i, 1, d]
            p[2, d] = -V[i, 2, d]
        # particle 3's position at micro time sig under the (1,3) pair flow
        qa, pa = three_body_flow(q, p, nsteps, hs, c, False, kind, k, amp, knots, coefs)
        for d in range(3):
            # centre: where a free particle 2 must start to sit on particle 3 at sig
            q[1, d] = qa[2, d] + V[i, 1, d] * sig + pad * qs[i, d]
        x2 = ys[i] + eps * q[1, 0]
        e2, _ = nb_eta(x2, bL, bp, bsh)
        if e2 == 0.0:
            continue
        qb, pb = three_body_flow(q, p, nsteps, hs, c, True, kind, k, amp, knots, coefs)
        Fx, Fy, Fz = force_xyz(qb[1, 0] - qb[2, 0], qb[1, 1] - qb[2, 1], qb[1, 2] - qb[2, 2],
                               kind, k, amp, knots, coefs)
        f23 = math.sqrt(Fx * Fx + Fy * Fy + Fz * Fz)
        out[i] = e1 * e2 * f13 * f23 * tau
    return out


def cross_term_bound(u1: TestFunction, u2: TestFunction, b: float, t: float, eps: float,
                     n_samples: int, seed: int = 0, potential: RadialPotential | None = None,
                     dt_factor: float = DEFAULT_DT_FACTOR, pad: float = 2.0) -> PairingEstimate:
    """Monte-Carlo value of a representative cross-term bound for j = 2.

        (N - 2)/eps int_0^t dtau int_0^tau ds int dX_3 dV_3 phi
            |F((x_1 - x_3)/eps)| |F((x_2(-s) - x_3(-s))/eps)|

    with the three-body backward flow and phi = eta_1(x_1) eta_2(x_2)
    prod_i M_b(v_i), M_b the normalised Maxwellian of parameter b. The pair
    (2, 3) is the representative pair different from (1, 3).

    x_3 = x_1 - eps r with r in the unit ball. x_2 is drawn uniformly from
    the ball of radius ``pad * eps`` around the point from which a free
    particle 2 lands on particle 3's (1,3)-pair-flow position at time -s;
    the integrand vanishes outside unless particle 2 is deflected by more
    than (pad - 1) eps before that time.
    """
    _check(eps, t, n_samples)
    pot = potential if potential is not None else PolynomialPotential(3)
    if pot.is_zero or t == 0:
        return _zero(eps, t, n_samples)
    parts = []
    for blk, m in block_sizes(n_samples):
        rng = block_generator(seed, blk, stream=300)
        taus = rng.uniform(0.0, t, m)
        sfrac = rng.random(m)
        ys = u1.shift + rng.uniform(-u1.length, u1.length, m)
        rs = uniform_ball(rng, m)
        qs = uniform_ball(rng, m)
        V = rng.standard_normal((m, 3, 3)) / math.sqrt(2.0 * b)
        parts.append(_cross_kernel(t, eps, taus, sfrac, ys, rs, qs, V, dt_factor, pad,
                                   u1.length, u1.power, u1.shift, u2.length, u2.power, u2.shift,
                                   *pot.kernel_args()))
    N = eps**-3
    vol_ball = 4.0 * math.pi / 3.0
    # (N-2)/eps * eps^3 (dx_3) * eps^3 pad^3 (dx_2) * t (dtau) * 2 L_1 (dx_1); tau (ds) is in the kernel
    scale = (N - 2.0) / eps * eps**6 * pad**3 * vol_ball**2 * t * 2.0 * u1.length
    return _estimate(np.concatenate(parts), eps, t, scale=scale)


def factorization_check(u1: TestFunction, u2: TestFunction, f0: InitialData, n_samples: int,
                        seed: int = 0):
    """MC estimate of <u1 (x) u2, f0 (x) f0> and the product of one-particle pairings."""
    parts = []
    for b, m in block_sizes(n_samples):
        rng = block_generator(seed, b, stream=400)
        x1 = u1.shift + rng.uniform(-u1.length, u1.length, m)
        x2 = u2.shift + rng.uniform(-u2.length, u2.length, m)
        v1 = f0.sample_velocities(rng, m)
        v2 = f0.sample_velocities(rng, m)
        parts.append(u1.eta(x1) * u1.psi(v1) * f0.rho(x1) * u2.eta(x2) * u2.psi(v2) * f0.rho(x2))
    est = _estimate(np.concatenate(parts), 0.0, 0.0, scale=4.0 * u1.length * u2.length)
    return est, free_pairing(u1, f0, 0.0) * free_pairing(u2, f0, 0.0)


# --- experiments -----------------------------------------------------------

def _ladder(eps_ladder):
    lad = [float(e) for e in eps_ladder]
    if any(b >= a for a, b in zip(lad, lad[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    return lad


def _nonincreasing_within(vals, errs, nsig=3.0):
    return all(b <= a + nsig * math.hypot(ea, eb)
               for a, b, ea, eb in zip(vals, vals[1:], errs, errs[1:]))


def first_order_ladder(u, f0, t, eps_ladder, n_samples, seed=0, potential=None,
                       dt_factor=DEFAULT_DT_FACTOR) -> ExperimentReport:
    """Collision term, memory term and its cutoff split along an eps ladder."""
    pot = potential if potential is not None else PolynomialPotential(3)
    rows = []
    for eps in _ladder(eps_ladder):
        s = first_order_samples(u, f0, t, eps, n_samples, seed, pot, dt_factor)
        ct = _estimate(s.collision, eps, t)
        low, high, tot = _split(s, pot.cutoff_constant() * eps**0.25)
        rows.append({"eps": eps, "collision": ct.value, "collision_err": ct.std_error,
                     "memory": tot.value, "memory_err": tot.std_error,
                     "memory_low": low.value, "memory_low_err": low.std_error,
                     "memory_high": high.value, "memory_high_err": high.std_error,
                     "split_sum_residual": (low.value + high.value) - tot.value,
                     "low_high_ratio": abs(low.value) / abs(high.value) if high.value else math.inf})
    rep = ExperimentReport("first-order", rows, meta={"t": t, "n_samples": n_samples, "seed": seed})
    if len(rows) > 1:
        rep.fit_slope("eps", "collision", "collision_err")
        rep.fit_slope("eps", "memory_low", "memory_low_err")
    return rep


def consistency_experiment(f0: InitialData, u: TestFunction, t: float, eps_ladder, n_samples: int,
                           seed: int = 0, potential: RadialPotential | None = None,
                           dt_factor: float = DEFAULT_DT_FACTOR, reference: dict | None = None,
                           ) -> ExperimentReport:
    """g1 pairing against the first-order Landau pairing along an eps ladder.

    Checks: gaps non-increasing beyond 3 sigma, and the smallest-eps gap at
    most half the largest-eps gap.
    """
    pot = potential if potential is not None else PolynomialPotential(3)
    lad = _ladder(eps_ladder)
    A = pot.landau_constant()
    base = free_pairing(u, f0, t)
    ref = base + landau_increment(u, f0, t, A, **(reference or {}))
    rows = []
    for eps in lad:
        g = g1_pairing(u, f0, t, eps, n_samples, seed, pot, dt_factor)
        rows.append({"eps": eps, "value": g.value, "stderr": g.std_error, "reference": ref,
                     "gap": abs(g.value - ref)})
    rep = ExperimentReport("consistency", rows, meta={"t": t, "A": A, "free_pairing": base,
                                                      "n_samples": n_samples, "seed": seed})
    if len(rows) > 1:
        gaps = [r["gap"] for r in rows]
        errs = [r["stderr"] for r in rows]
        rep.checks["gap_nonincreasing_3sigma"] = _nonincreasing_within(gaps, errs)
        rep.checks["gap_halved"] = gaps[-1] <= 0.5 * gaps[0]
        if all(gaps):
            rep.fit_slope("eps", "gap", "stderr")
    return rep


def gamma2_limit_check(f0, u, t, eps_ladder, seed=0, n_samples=100_000, u2=None, potential=None,
                       dt_factor=DEFAULT_DT_FACTOR) -> ExperimentReport:
    u2 = u if u2 is None else u2
    rows = []
    for eps in _ladder(eps_ladder):
        g = gamma2_pairing(u, u2, f0, t, eps, n_samples, seed, potential, dt_factor)
        rows.append({"eps": eps, "gamma1": gamma1_pairing(u, f0, t, eps),
                     "gamma2": g.value, "gamma2_err": g.std_error})
    rep = ExperimentReport("gamma-limit", rows, meta={"t": t, "n_samples": n_samples, "seed": seed})
    rep.checks["gamma1_zero"] = all(r["gamma1"] == 0.0 for r in rows)
    if len(rows) > 1:
        mags = [abs(r["gamma2"]) for r in rows]
        rep.checks["gamma2_decreasing"] = all(b < a for a, b in zip(mags, mags[1:]))
        if all(m > 0 for m in mags):
            rep.fit_slope("eps", "gamma2", "gamma2_err")
    return rep


def chaos_experiment(f0: InitialData, u1: TestFunction, u2: TestFunction, t: float, eps_ladder,
                     n_samples: int, seed: int = 0, potential: RadialPotential | None = None,
                     dt_factor: float = DEFAULT_DT_FACTOR, reference: dict | None = None,
                     slope_target: float = 1.0, slope_tol: float = 0.15) -> ExperimentReport:
    """j = 2: leading repeated-index terms against the tensorised first-order
    Landau prediction, plus one representative cross-term bound.

    For chaotic data the repeated-index terms factorise, so the leading
    pairing is P1 P2 + M1 P2 + P1 M2 with P the free pairings and M the
    one-particle first-order increments (collision + memory). The prediction
    is P1 P2 + L1 P2 + P1 L2 with L the Landau increments.
    """
    pot = potential if potential is not None else PolynomialPotential(3)
    lad = _ladder(eps_ladder)
    A = pot.landau_constant()
    P1, P2 = free_pairing(u1, f0, t), free_pairing(u2, f0, t)
    L1 = landau_increment(u1, f0, t, A, **(reference or {}))
    L2 = landau_increment(u2, f0, t, A, **(reference or {}))
    rhs = P1 * P2 + L1 * P2 + P1 * L2
    rows = []
    for eps in lad:
        s1 = first_order_samples(u1, f0, t, eps, n_samples, seed, pot, dt_factor, stream=1)
        s2 = first_order_samples(u2, f0, t, eps, n_samples, seed, pot, dt_factor, stream=2)
        m1 = _estimate(s1.collision + s1.memory, eps, t)
        m2 = _estimate(s2.collision + s2.memory, eps, t)
        lead = P1 * P2 + m1.value * P2 + P1 * m2.value
        err = math.hypot(P2 * m1.std_error, P1 * m2.std_error)
        cross = cross_term_bound(u1, u2, f0.b, t, eps, n_samples, seed, pot, dt_factor)
        rows.append({"eps": eps, "value": lead, "stderr": err, "reference": rhs,
                     "gap": abs(lead - rhs), "cross": cross.value, "cross_stderr": cross.std_error})
    fact, prod = factorization_check(u1, u2, f0, n_samples, seed)
    rep = ExperimentReport("chaos", rows, meta={"t": t, "A": A, "P1": P1, "P2": P2, "L1": L1,
                                                "L2": L2, "t0_mc": fact.value,
                                                "t0_mc_err": fact.std_error, "t0_product": prod,
                                                "n_samples": n_samples, "seed": seed})
    rep.checks["t0_factorization_3sigma"] = abs(fact.value - prod) <= 3.0 * fact.std_error
    if len(rows) > 1:
        gaps = [r["gap"] for r in rows]
        rep.checks["gap_nonincreasing_3sigma"] = _nonincreasing_within(
            gaps, [r["stderr"] for r in rows])
        if all(r["cross"] > 0 for r in rows):
            slope, _ = rep.fit_slope("eps", "cross", "cross_stderr")
            rep.checks["cross_slope_near_1"] = abs(slope - slope_target) <= slope_tol
    return rep
