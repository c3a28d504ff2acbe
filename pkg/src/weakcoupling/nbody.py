"""N-particle weak-coupling system in a periodic box.

    x_i' = v_i,   v_i' = eps^{-1/2} sum_{j != i} F((x_i - x_j)/eps),   N = eps^-3.

Forces come from cell lists of side >= eps with a half-shell sweep, so each
pair is visited once and momentum is conserved to rounding. Time stepping is
velocity Verlet. Everything runs serially, which makes trajectories
bit-reproducible for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np
from scipy.spatial import cKDTree

from .potential import PolynomialPotential, RadialPotential, force_xyz, radial_phi
from .profiles import InitialData
from .report import ExperimentReport
from .rng import block_generator

MAX_DT_FACTOR = 1.0 / 100.0
DEFAULT_DT_FACTOR = 1.0 / 200.0
MAX_PAIRS = 1_000_000


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class Ensemble:
    positions: np.ndarray
    velocities: np.ndarray
    eps: float
    box: float = 1.0
    time: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        x = np.ascontiguousarray(self.positions, dtype=float)
        v = np.ascontiguousarray(self.velocities, dtype=float)
        if x.ndim != 2 or x.shape[1] != 3 or x.shape != v.shape:
            raise EnsembleError("positions and velocities must both be (N, 3)")
        if len(x) < 2:
            raise EnsembleError("need at least two particles")
        if not self.eps > 0 or not self.box > 0:
            raise EnsembleError("eps and box must be positive")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def momentum(self) -> np.ndarray:
        return self.velocities.sum(axis=0)


@dataclass
class MarginalEstimate:
    mass: np.ndarray
    edges: np.ndarray
    samples: int
    stderr: np.ndarray
    outside: float = 0.0


@dataclass
class ChaosDefect:
    defect: float
    noise_floor: float
    noise_std: float
    samples: int = 0

    @property
    def excess(self) -> float:
        return self.defect - self.noise_floor


def epsilon_for(n: int) -> float:
    m = round(n ** (1.0 / 3.0))
    return 1.0 / m if m**3 == n else n ** (-1.0 / 3.0)


def init_ensemble(n: int, f0: InitialData | None = None, seed: int = 0) -> Ensemble:
    """i.i.d. particles: uniform in the unit box, velocities from ``f0``'s profile g."""
    if n < 2:
        raise EnsembleError("N must be at least 2")
    f0 = f0 if f0 is not None else InitialData.maxwellian()
    rng = block_generator(seed, 0, stream=21)
    x = rng.random((n, 3))
    v = f0.sample_velocities(rng, n)
    return Ensemble(x, v, epsilon_for(n), 1.0, 0.0, seed)


# --- force kernels --------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _min_image(d, box):
    return d - box * np.floor(d / box + 0.5)


@numba.njit(cache=True, inline="always")
def _pair(pos, acc, i, j, box, eps, s, sq, kind, k, amp, knots, coefs):
    dx = _min_image(pos[i, 0] - pos[j, 0], box) / eps
    dy = _min_image(pos[i, 1] - pos[j, 1], box) / eps
    dz = _min_image(pos[i, 2] - pos[j, 2], box) / eps
    r2 = dx * dx + dy * dy + dz * dz
    if r2 >= 1.0:
        return 0.0
    fx, fy, fz = force_xyz(dx, dy, dz, kind, k, amp, knots, coefs)
    acc[i, 0] += s * fx
    acc[i, 1] += s * fy
    acc[i, 2] += s * fz
    acc[j, 0] -= s * fx
    acc[j, 1] -= s * fy
    acc[j, 2] -= s * fz
    return sq * radial_phi(r2, kind, k, amp, knots, coefs)


@numba.njit(cache=True)
def forces_direct(pos, box, eps, kind, k, amp, knots, coefs):
    """O(N^2) minimum-image sum; returns (accelerations, potential energy)."""
    n = pos.shape[0]
    acc = np.zeros((n, 3))
    s = 1.0 / math.sqrt(eps)
    sq = math.sqrt(eps)
    u = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            u += _pair(pos, acc, i, j, box, eps, s, sq, kind, k, amp, knots, coefs)
    return acc, u


@numba.njit(cache=True)
def forces_cells(pos, box, eps, ncell, kind, k, amp, knots, coefs):
    """Cell-list sum with a half-shell neighbour sweep (needs ncell >= 3)."""
    n = pos.shape[0]
    acc = np.zeros((n, 3))
    s = 1.0 / math.sqrt(eps)
    sq = math.sqrt(eps)
    nc3 = ncell * ncell * ncell
    head = -np.ones(nc3, dtype=np.int64)
    nxt = -np.ones(n, dtype=np.int64)
    c = np.empty(3, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        for a in range(3):
            q = pos[i, a] / box
            q -= math.floor(q)
            ca = int(q * ncell)
            if ca >= ncell:
                ca = ncell - 1
            c[a] = ca
        idx = (c[0] * ncell + c[1]) * ncell + c[2]
        nxt[i] = head[idx]
        head[idx] = i
    # 13 forward neighbour offsets
    offs = np.empty((13, 3), dtype=np.int64)
    m = 0
    for ox in range(-1, 2):
        for oy in range(-1, 2):
            for oz in range(-1, 2):
                if (ox, oy, oz) > (0, 0, 0):
                    offs[m, 0] = ox
                    offs[m, 1] = oy
                    offs[m, 2] = oz
                    m += 1
    u = 0.0
    for cx in range(ncell):
        for cy in range(ncell):
            for cz in range(ncell):
                c0 = (cx * ncell + cy) * ncell + cz
                i = head[c0]
                while i >= 0:
                    j = nxt[i]
                    while j >= 0:
                        u += _pair(pos, acc, i, j, box, eps, s, sq, kind, k, amp, knots, coefs)
                        j = nxt[j]
                    for o in range(13):
                        nx_ = (cx + offs[o, 0]) % ncell
                        ny_ = (cy + offs[o, 1]) % ncell
                        nz_ = (cz + offs[o, 2]) % ncell
                        j = head[(nx_ * ncell + ny_) * ncell + nz_]
                        while j >= 0:
                            u += _pair(pos, acc, i, j, box, eps, s, sq, kind, k, amp, knots, coefs)
                            j = nxt[j]
                    i = nxt[i]
    return acc, u


@numba.njit(cache=True)
def _forces(pos, box, eps, ncell, kind, k, amp, knots, coefs):
    if ncell >= 3:
        return forces_cells(pos, box, eps, ncell, kind, k, amp, knots, coefs)
    return forces_direct(pos, box, eps, kind, k, amp, knots, coefs)


@numba.njit(cache=True)
def _verlet(pos, vel, nsteps, dt, box, eps, ncell, record_every, kind, k, amp, knots, coefs):
    pos = pos.copy()
    vel = vel.copy()
    nrec = nsteps // record_every + 1 if record_every > 0 else 0
    rec = np.zeros((nrec, 7))
    acc, u = _forces(pos, box, eps, ncell, kind, k, amp, knots, coefs)
    r = 0
    for step in range(nsteps + 1):
        if record_every > 0 and step % record_every == 0:
            ke = 0.5 * np.sum(vel * vel)
            rec[r, 0] = step * dt
            rec[r, 1] = ke
            rec[r, 2] = u
            rec[r, 3] = ke + u
            for a in range(3):
                rec[r, 4 + a] = np.sum(vel[:, a])
            r += 1
        if step == nsteps:
            break
        vel += 0.5 * dt * acc
        pos += dt * vel
        pos -= box * np.floor(pos / box)
        acc, u = _forces(pos, box, eps, ncell, kind, k, amp, knots, coefs)
        vel += 0.5 * dt * acc
    return pos, vel, rec


def _ncell(e: Ensemble) -> int:
    # cells only need side >= eps; more than ~8 cells per particle is wasted memory
    return min(int(math.floor(e.box / e.eps)), max(3, int(2 * round(e.n ** (1.0 / 3.0)))))


def compute_forces(e: Ensemble, potential: RadialPotential | None = None, method: str = "cells"):
    pot = potential if potential is not None else PolynomialPotential(3)
    if method == "direct":
        return forces_direct(e.positions, e.box, e.eps, *pot.kernel_args())
    return _forces(e.positions, e.box, e.eps, _ncell(e), *pot.kernel_args())


def total_energy(e: Ensemble, potential: RadialPotential | None = None) -> float:
    """sum |v_i|^2 / 2 + sqrt(eps) sum_{i<j} phi((x_i - x_j)/eps)."""
    _, u = compute_forces(e, potential)
    return 0.5 * float(np.sum(e.velocities**2)) + float(u)


def evolve(e: Ensemble, t: float, dt: float | None = None,
           potential: RadialPotential | None = None, record_every: int = 0):
    """Velocity Verlet over macro time ``t >= 0`` with a uniform step <= dt.

    Returns the new ensemble; with ``record_every > 0`` also a
    (rows, 7) array (t, kinetic, potential, total, P_x, P_y, P_z).
    """
    pot = potential if potential is not None else PolynomialPotential(3)
    if dt is None:
        dt = e.eps * DEFAULT_DT_FACTOR
    if dt <= 0 or dt > e.eps * MAX_DT_FACTOR * (1 + 1e-12):
        raise EnsembleError(f"dt={dt} must lie in (0, eps/100]")
    if t < 0:
        raise EnsembleError("t must be nonnegative")
    n = max(1, int(math.ceil(t / dt - 1e-12))) if t > 0 else 0
    h = t / n if n else 0.0
    x, v, rec = _verlet(e.positions, e.velocities, n, h, e.box, e.eps, _ncell(e),
                        int(record_every), *pot.kernel_args())
    new = replace(e, positions=x, velocities=v, time=e.time + t)
    if record_every > 0:
        rec = rec.copy()
        rec[:, 0] += e.time
        return new, rec
    return new


# --- marginals ------------------------------------------------------------

def _pairs(n, max_pairs, rng):
    total = n * (n - 1) // 2
    if total <= max_pairs:
        i, j = np.triu_indices(n, 1)
        return i, j
    i = rng.integers(0, n, max_pairs)
    j = rng.integers(0, n - 1, max_pairs)
    j = j + (j >= i)
    return i, j


def empirical_marginal(e: Ensemble, order: int = 1, bins=None, component: int = 0,
                       max_pairs: int = MAX_PAIRS, seed: int = 0) -> MarginalEstimate:
    """Histogram of one velocity component (order 1) or of that component
    for unordered particle pairs (order 2, symmetrised)."""
    if e.n == 0:
        raise EnsembleError("empty ensemble")
    edges = np.linspace(-4.0, 4.0, 9) if bins is None else np.asarray(bins, dtype=float)
    c = e.velocities[:, component]
    if order == 1:
        h, _ = np.histogram(c, edges)
        inside = h.sum()
        p = h / inside
        return MarginalEstimate(p, edges, int(inside), np.sqrt(p * (1 - p) / inside),
                                1.0 - inside / e.n)
    if order != 2:
        raise ValueError("order must be 1 or 2")
    i, j = _pairs(e.n, max_pairs, block_generator(seed, 0, stream=31))
    h, _, _ = np.histogram2d(c[i], c[j], [edges, edges])
    h = 0.5 * (h + h.T)
    inside = h.sum()
    p = h / inside
    return MarginalEstimate(p, edges, int(inside), np.sqrt(p * (1 - p) / inside),
                            1.0 - inside / len(i))


def _near_pairs(e: Ensemble, radius: float):
    tree = cKDTree(np.mod(e.positions, e.box), boxsize=e.box)
    pr = tree.query_pairs(radius, output_type="ndarray")
    return pr[:, 0], pr[:, 1]


def chaos_defect(e: Ensemble, bins=None, component: int = 0, n_resample: int = 8,
                 radius: float | None = None, seed: int = 0) -> ChaosDefect:
    """L1 distance between the pair histogram of spatially close pairs and the
    product of one-particle histograms.

    Pairs closer than ``radius`` (default 2 eps, minimum image) are the ones
    through which the dynamics can build correlations; over all pairs of a
    single ensemble the symmetrised pair histogram is the product of the
    one-particle histograms up to an O(1/N) diagonal term, whatever the
    dynamics. The noise floor is the same distance after randomly permuting
    velocities among particles (same pair geometry, independence enforced),
    averaged over ``n_resample`` permutations.
    """
    edges = np.linspace(-4.0, 4.0, 9) if bins is None else np.asarray(bins, dtype=float)
    c = e.velocities[:, component]
    p1 = empirical_marginal(e, 1, edges, component).mass
    prod = np.outer(p1, p1)

    def distance(ci, cj):
        h, _, _ = np.histogram2d(ci, cj, [edges, edges])
        h = 0.5 * (h + h.T)
        tot = h.sum()
        return float(np.abs(h / tot - prod).sum()) if tot else 0.0

    i, j = _near_pairs(e, 2.0 * e.eps if radius is None else radius)
    if len(i) == 0:
        return ChaosDefect(0.0, 0.0, 0.0, 0)
    d = distance(c[i], c[j])
    floors = []
    for r in range(n_resample):
        cp = c[block_generator(seed, r, stream=32).permutation(e.n)]
        floors.append(distance(cp[i], cp[j]))
    return ChaosDefect(d, float(np.mean(floors)), float(np.std(floors)), len(i))


# --- experiment -----------------------------------------------------------

def nbody_run(n: int = 512, t_final: float = 1.0, dt_factor: float = DEFAULT_DT_FACTOR,
              seed: int = 0, f0: InitialData | None = None, bins=None, record_every: int = 0,
              potential: RadialPotential | None = None):
    """Evolve a chaotic ensemble and report energy/momentum series and marginals."""
    e = init_ensemble(n, f0, seed)
    nsteps = int(math.ceil(t_final / (e.eps * dt_factor) - 1e-12))
    rec_every = record_every or max(1, nsteps // 20)
    e1, rec = evolve(e, t_final, e.eps * dt_factor, potential, rec_every)
    rows = [dict(zip(("t", "kinetic", "potential", "total", "momentum_x", "momentum_y",
                      "momentum_z"), map(float, r))) for r in rec]
    e0 = rows[0]["total"]
    drift = max(abs(r["total"] - e0) for r in rows) / abs(e0)
    dp = float(np.max(np.abs(e1.momentum - e.momentum)))
    rep = ExperimentReport("nbody-run", rows, meta={"N": n, "eps": e.eps, "dt": e.eps * dt_factor,
                                                    "seed": seed, "energy_drift_rel": drift,
                                                    "momentum_change": dp})
    rep.checks["energy_drift_1e-5"] = drift <= 1e-5
    rep.checks["momentum_conserved"] = dp <= 1e-10 * max(1.0, float(np.abs(e.velocities).sum()))
    m1 = empirical_marginal(e1, 1, bins)
    cd0 = chaos_defect(e, bins)
    cd1 = chaos_defect(e1, bins)
    marg = [{"bin_lo": float(lo), "bin_hi": float(hi), "mass": float(p), "stderr": float(s)}
            for lo, hi, p, s in zip(m1.edges[:-1], m1.edges[1:], m1.mass, m1.stderr)]
    rep.meta["chaos"] = {"t0": [cd0.defect, cd0.noise_floor], "t_final": [cd1.defect, cd1.noise_floor]}
    return rep, marg
