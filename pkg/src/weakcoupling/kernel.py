"""Landau kernel a(w) and its finite-eps force-force approximation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potential import PolynomialPotential, RadialPotential
from .report import ExperimentReport


class SingularKernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    w: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def symmetric_part(self):
        return 0.5 * (self.entries + self.entries.T)

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.symmetric_part)

    def frobenius_distance(self, other) -> float:
        return float(np.linalg.norm(self.entries - np.asarray(other)))


def _check_w(w):
    w = np.asarray(w, dtype=float)
    if w.shape != (3,):
        raise ValueError(f"w must be a 3-vector, got shape {w.shape}")
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        raise SingularKernelError("a(w) is undefined at w = 0")
    return w, nw


def a_matrix(w, A: float) -> KernelMatrix:
    """(A/|w|) (Id - w w^T / |w|^2)."""
    w, nw = _check_w(w)
    what = w / nw
    return KernelMatrix((A / nw) * (np.eye(3) - np.outer(what, what)), w)


def spherical_delta_matrix(w, A: float, n_nodes: int = 64) -> KernelMatrix:
    """A int_{S^2} delta(k.w) k k^T dk, divided by pi.

    The delta restricts k to the great circle orthogonal to w, with line
    density 1/|w|; the circle integral of k k^T is evaluated with the
    trapezoidal rule, which is exact here for n_nodes >= 3 (the integrand
    is a trigonometric polynomial of degree 2).
    """
    w, nw = _check_w(w)
    what = w / nw
    # orthonormal frame (e1, e2) spanning the plane orthogonal to w
    trial = np.eye(3)[int(np.argmin(np.abs(what)))]
    e1 = np.cross(what, trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(what, e1)
    theta = 2.0 * math.pi * np.arange(n_nodes) / n_nodes
    k = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
    circle = (2.0 * math.pi / n_nodes) * k.T @ k
    return KernelMatrix((A / (math.pi * nw)) * circle, w)


def ball_nodes(n_r: int = 32, n_theta: int = 16, n_phi: int = 32):
    """Tensor nodes on the unit ball: Gauss-Legendre in r and cos(theta),
    midpoint (spectrally exact for periodic integrands) in phi."""
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (xr + 1.0)
    wr = 0.5 * wr * r * r
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    R, C, P = np.meshgrid(r, ct, phi, indexing="ij")
    S = np.sqrt(1.0 - C * C)
    pts = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * C], axis=-1).reshape(-1, 3)
    W = (wr[:, None, None] * wt[None, :, None] * np.full(n_phi, 2.0 * math.pi / n_phi)).ravel()
    return pts, W


def kernel_quadrature(w, tau: float, eps: float, potential: RadialPotential | None = None,
                      resolution=(32, 16, 32), s_steps_per_unit: int = 64,
                      trajectory: str = "straight") -> KernelMatrix:
    """K_eps(w) = int_{|r|<=1} dr int_0^{tau/eps} ds F(r) F(r - w s)^T.

    The s-window is cut at ``min(tau/eps, 4/|w|)``: for |r| <= 1 and
    s > 2/|w| the second factor vanishes identically, so the cut is exact.
    Composite Simpson in s with step ``1/(s_steps_per_unit |w|)``.

    ``trajectory="deflected"`` replaces the straight path ``r - w s`` by the
    backward relative two-body path ``rho(s)`` solving
    ``rho'' = 2 sqrt(eps) F(rho)``, ``rho(0) = r``, ``rho'(0) = -w``
    (velocity Verlet on the Simpson grid). It is a diagnostic; the default
    is the straight path.
    """
    w, nw = _check_w(w)
    if eps <= 0 or tau <= 0:
        raise ValueError("need eps > 0 and tau > 0")
    if trajectory not in ("straight", "deflected"):
        raise ValueError(f"unknown trajectory {trajectory!r}")
    pot = potential if potential is not None else PolynomialPotential(3)
    if pot.is_zero:
        return KernelMatrix(np.zeros((3, 3)), w)
    pts, W = ball_nodes(*resolution)
    smax = min(tau / eps, 4.0 / nw)
    n = int(math.ceil(smax * s_steps_per_unit * nw))
    n += n % 2
    h = smax / n
    simpson = np.ones(n + 1)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0
    simpson *= h / 3.0

    Fr = pot.eval_force(pts) * W[:, None]
    M = np.zeros((3, 3))
    if trajectory == "straight":
        for i in range(n + 1):
            M += simpson[i] * (Fr.T @ pot.eval_force(pts - (i * h) * w))
    else:
        g = 2.0 * math.sqrt(eps)
        pos = pts.copy()
        vel = np.broadcast_to(-w, pts.shape).copy()
        acc = g * pot.eval_force(pos)
        for i in range(n + 1):
            M += simpson[i] * (Fr.T @ (acc / g))
            vel += 0.5 * h * acc
            pos += h * vel
            acc = g * pot.eval_force(pos)
            vel += 0.5 * h * acc
    return KernelMatrix(M, w)


def kernel_convergence_study(w, eps_ladder, tau: float = 1.0,
                             potential: RadialPotential | None = None,
                             resolution=(32, 16, 32), s_steps_per_unit: int = 64,
                             trajectory: str = "straight",
                             check_quadrature: bool = True) -> ExperimentReport:
    """Relative Frobenius error of K_eps(w) against a(w) along an eps ladder.

    With ``check_quadrature`` each rung is recomputed at doubled resolution
    in every direction; the difference is reported as ``quad_err_rel`` so
    quadrature error and eps-limit error can be told apart.
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if any(e <= 0 for e in eps_ladder):
        raise ValueError("eps values must be positive")
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    pot = potential if potential is not None else PolynomialPotential(3)
    A = pot.landau_constant()
    a = a_matrix(w, A).entries
    na = np.linalg.norm(a)
    rows = []
    for eps in eps_ladder:
        K = kernel_quadrature(w, tau, eps, pot, resolution, s_steps_per_unit, trajectory).entries
        row = {"eps": eps}
        for i in range(3):
            for j in range(3):
                row[f"K{i + 1}{j + 1}"] = K[i, j]
        row["frob_err_rel"] = float(np.linalg.norm(K - a) / na)
        if check_quadrature:
            fine = tuple(2 * r for r in resolution)
            K2 = kernel_quadrature(w, tau, eps, pot, fine, 2 * s_steps_per_unit, trajectory).entries
            row["quad_err_rel"] = float(np.linalg.norm(K - K2) / na)
        rows.append(row)
    errs = [r["frob_err_rel"] for r in rows]
    checks = {}
    if len(rows) > 1:
        checks["strictly_decreasing"] = all(b < a for a, b in zip(errs, errs[1:]))
    rep = ExperimentReport("kernel-limit", rows,
                           meta={"w": list(map(float, np.asarray(w))), "tau": tau, "A": A,
                                 "trajectory": trajectory})
    if len(rows) > 1:
        rep.fit_slope("eps", "frob_err_rel")
    rep.checks.update(checks)
    return rep
