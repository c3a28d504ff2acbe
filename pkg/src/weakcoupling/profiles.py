"""Initial data and test functions in slab geometry.

Spatial dependence is through the first coordinate only (per unit transverse
area), which keeps the Landau reference one-dimensional in space.

Initial data: ``f0(x, v) = rho(x_1) g(v)`` with

* ``rho(y) = (1 - (y/L)^2)^p`` for |y| < L;
* ``g`` a mixture of Maxwellians ``sum_m w_m (b/pi)^{3/2} exp(-b |v - d_m|^2)``.

Test functions: ``u(x, v) = eta(x_1) psi(v)`` with
``eta(y) = (1 - (y/L)^2)^p`` and
``psi(v) = (1 - |v|^2/R^2)^q (1 + c (v.n)^2)`` on |v| < R.

Both families have numba twins taking the packed parameter tuples from
:meth:`InitialData.params` and :meth:`TestFunction.params`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class InitialData:
    """Separable initial density ``rho(x_1) g(v)``."""

    length: float = 1.5
    power: int = 4
    b: float = 1.0
    drifts: tuple = ((0.0, 1.2, 0.0), (0.0, -1.2, 0.0))
    weights: tuple = (0.5, 0.5)

    def __post_init__(self):
        d = np.asarray(self.drifts, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if d.ndim != 2 or d.shape[1] != 3 or len(w) != len(d):
            raise ValueError("drifts must be an (M, 3) array with M matching weights")
        if self.b <= 0 or self.length <= 0 or self.power < 2:
            raise ValueError("need b > 0, length > 0, power >= 2")
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("mixture weights must be nonnegative and sum to 1")

    @classmethod
    def maxwellian(cls, b=1.0, mean=(0.0, 0.0, 0.0), length=1.5, power=4):
        return cls(length=length, power=power, b=b, drifts=(tuple(mean),), weights=(1.0,))

    @classmethod
    def from_config(cls, cfg: dict) -> "InitialData":
        cfg = dict(cfg or {})
        drifts = cfg.get("drifts")
        if drifts is None:
            d = float(cfg.get("drift", 1.2))
            drifts = ((0.0, d, 0.0), (0.0, -d, 0.0)) if d else ((0.0, 0.0, 0.0),)
        drifts = tuple(tuple(float(c) for c in row) for row in drifts)
        weights = cfg.get("weights") or tuple([1.0 / len(drifts)] * len(drifts))
        return cls(length=float(cfg.get("length", 1.5)), power=int(cfg.get("power", 4)),
                   b=float(cfg.get("b", 1.0)), drifts=drifts,
                   weights=tuple(float(w) for w in weights))

    def params(self):
        return (float(self.length), int(self.power), float(self.b),
                np.ascontiguousarray(self.drifts, dtype=float),
                np.ascontiguousarray(self.weights, dtype=float))

    def rho(self, y):
        y = np.asarray(y, dtype=float)
        q = np.clip(1.0 - (y / self.length) ** 2, 0.0, None)
        return q**self.power

    def g(self, v):
        """Velocity profile; ``v`` has shape ``(..., 3)``."""
        v = np.asarray(v, dtype=float)
        c = (self.b / math.pi) ** 1.5
        out = np.zeros(v.shape[:-1])
        for d, w in zip(self.drifts, self.weights):
            out += w * c * np.exp(-self.b * np.sum((v - np.asarray(d)) ** 2, axis=-1))
        return out

    def __call__(self, x, v):
        x = np.asarray(x, dtype=float)
        return self.rho(x[..., 0]) * self.g(v)

    def envelope_extent(self) -> float:
        """Half-width of a velocity box holding every component to 4/sqrt(b)."""
        return float(np.max(np.abs(self.drifts)) + 4.0 / math.sqrt(self.b))

    def sample_velocities(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        v = rng.standard_normal((n, 3)) / math.sqrt(2.0 * self.b)
        return v + np.asarray(self.drifts)[comp]

    def to_config(self) -> dict:
        return {"length": self.length, "power": self.power, "b": self.b,
                "drifts": [list(d) for d in self.drifts], "weights": list(self.weights)}


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported ``u(x, v) = eta(x_1) psi(v)``."""

    length: float = 1.0
    power: int = 4
    radius: float = 3.0
    vpower: int = 4
    c: float = 0.5
    axis: tuple = (0.0, 1.0, 0.0)
    shift: float = 0.0
    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.length <= 0 or self.radius <= 0 or self.power < 2 or self.vpower < 2:
            raise ValueError("need positive support radii and powers >= 2")
        n = np.asarray(self.axis, dtype=float)
        if n.shape != (3,) or not math.isclose(np.linalg.norm(n), 1.0, rel_tol=1e-12):
            raise ValueError("axis must be a unit 3-vector")

    @classmethod
    def from_config(cls, cfg: dict) -> "TestFunction":
        cfg = dict(cfg or {})
        kw = {k: cfg[k] for k in ("length", "power", "radius", "vpower", "c", "shift") if k in cfg}
        if "axis" in cfg:
            kw["axis"] = tuple(float(a) for a in cfg["axis"])
        return cls(**kw)

    @property
    def support_radius(self):
        return max(self.length, self.radius)

    def params(self):
        return (float(self.length), int(self.power), float(self.radius), int(self.vpower),
                float(self.c), np.ascontiguousarray(self.axis, dtype=float), float(self.shift))

    def eta(self, y):
        y = np.asarray(y, dtype=float) - self.shift
        q = np.clip(1.0 - (y / self.length) ** 2, 0.0, None)
        return q**self.power

    def deta(self, y):
        y = np.asarray(y, dtype=float) - self.shift
        q = np.clip(1.0 - (y / self.length) ** 2, 0.0, None)
        return self.power * q ** (self.power - 1) * (-2.0 * y / self.length**2)

    def psi(self, v):
        v = np.asarray(v, dtype=float)
        q = np.clip(1.0 - np.sum(v * v, axis=-1) / self.radius**2, 0.0, None)
        vn = v @ np.asarray(self.axis)
        return q**self.vpower * (1.0 + self.c * vn * vn)

    def grad_psi(self, v):
        v = np.asarray(v, dtype=float)
        n = np.asarray(self.axis)
        q = np.clip(1.0 - np.sum(v * v, axis=-1) / self.radius**2, 0.0, None)
        vn = v @ n
        m = 1.0 + self.c * vn * vn
        dq = self.vpower * q ** (self.vpower - 1) * (-2.0 / self.radius**2)
        return (dq * m)[..., None] * v + (q**self.vpower * 2.0 * self.c * vn)[..., None] * n

    def __call__(self, x, v):
        x = np.asarray(x, dtype=float)
        return self.eta(x[..., 0]) * self.psi(v)

    def grad_x(self, x, v):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, np.shape(v)))
        out[..., 0] = self.deta(x[..., 0]) * self.psi(v)
        return out

    def grad_v(self, x, v):
        x = np.asarray(x, dtype=float)
        return self.eta(x[..., 0])[..., None] * self.grad_psi(v)

    def to_config(self) -> dict:
        return {"length": self.length, "power": self.power, "radius": self.radius,
                "vpower": self.vpower, "c": self.c, "axis": list(self.axis), "shift": self.shift}


def free_pairing(u: TestFunction, f0: InitialData, t: float, nodes: int = 48) -> float:
    """<u, S(t) f0> = int dx dv u(x + v t, v) rho(x_1) g(v), per unit transverse area.

    Tensor Gauss-Legendre in x_1 (over supp rho) and in v (over the cube
    holding the ball |v| < R).
    """
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    x = f0.length * xg
    wx = f0.length * wg
    R = u.radius
    vg = R * xg
    wv = R * wg
    V = np.stack(np.meshgrid(vg, vg, vg, indexing="ij"), axis=-1)
    W = wv[:, None, None] * wv[None, :, None] * wv[None, None, :]
    pg = u.psi(V) * f0.g(V) * W
    rho = f0.rho(x) * wx
    # eta(x + v_1 t) depends on v only through v_1
    E = u.eta(x[:, None] + t * vg[None, :])
    return float(rho @ E @ pg.sum(axis=(1, 2)))


# --- numba twins --------------------------------------------------------

@numba.njit(cache=True, inline="always")
def nb_rho(y, L, p):
    s = y / L
    if s * s >= 1.0:
        return 0.0
    return (1.0 - s * s) ** p


@numba.njit(cache=True, inline="always")
def nb_g(vx, vy, vz, b, drifts, weights):
    c = (b / math.pi) ** 1.5
    acc = 0.0
    for m in range(weights.shape[0]):
        dx = vx - drifts[m, 0]
        dy = vy - drifts[m, 1]
        dz = vz - drifts[m, 2]
        acc += weights[m] * math.exp(-b * (dx * dx + dy * dy + dz * dz))
    return c * acc


@numba.njit(cache=True, inline="always")
def nb_f0(x, vx, vy, vz, L, p, b, drifts, weights):
    r = nb_rho(x, L, p)
    if r == 0.0:
        return 0.0
    return r * nb_g(vx, vy, vz, b, drifts, weights)


@numba.njit(cache=True, inline="always")
def nb_eta(y, L, p, shift):
    s = (y - shift) / L
    if s * s >= 1.0:
        return 0.0, 0.0
    q = 1.0 - s * s
    return q**p, p * q ** (p - 1) * (-2.0 * s / L)


@numba.njit(cache=True, inline="always")
def nb_psi(vx, vy, vz, R, q, c, axis):
    s = (vx * vx + vy * vy + vz * vz) / (R * R)
    if s >= 1.0:
        return 0.0, 0.0, 0.0, 0.0
    base = 1.0 - s
    vn = vx * axis[0] + vy * axis[1] + vz * axis[2]
    m = 1.0 + c * vn * vn
    bq = base**q
    dq = q * base ** (q - 1) * (-2.0 / (R * R)) * m
    e = bq * 2.0 * c * vn
    return bq * m, dq * vx + e * axis[0], dq * vy + e * axis[1], dq * vz + e * axis[2]


@numba.njit(cache=True, inline="always")
def nb_u(y, vx, vy, vz, L, p, R, q, c, axis, shift):
    e, _ = nb_eta(y, L, p, shift)
    if e == 0.0:
        return 0.0
    ps, _, _, _ = nb_psi(vx, vy, vz, R, q, c, axis)
    return e * ps


@numba.njit(cache=True, inline="always")
def nb_R(y, vx, vy, vz, T, L, p, R, q, c, axis, shift):
    """grad_v of u(x + v T, v) evaluated with y = x_1 + v_1 T."""
    e, de = nb_eta(y, L, p, shift)
    if e == 0.0 and de == 0.0:
        return 0.0, 0.0, 0.0
    ps, px, py, pz = nb_psi(vx, vy, vz, R, q, c, axis)
    return T * de * ps + e * px, e * py, e * pz
