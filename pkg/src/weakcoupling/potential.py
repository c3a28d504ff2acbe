"""Short-range radial pair potentials.

All potentials have range 1 in the micro argument: callers evaluate them at
``(x_i - x_j) / eps``, which keeps this module free of ``eps``.

Two families are provided:

* :class:`PolynomialPotential`, ``amplitude * (1 - |x|^2)^k`` on the unit ball
  (globally C^{k-1}, so ``k >= 3`` gives a C^2 potential);
* :class:`TabulatedPotential`, a clamped cubic spline through a two-column
  radial table ``(r, phi(r))`` ending at ``r = 1``.

The numba kernels used by the particle codes share one evaluation routine,
:func:`force_xyz`, parametrised by the tuple returned from
:meth:`RadialPotential.kernel_args`.
"""

from __future__ import annotations

import math
from functools import cached_property
from pathlib import Path

import numba
import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline

KIND_ZERO = 0
KIND_POLY = 1
KIND_SPLINE = 2

# absolute tolerance of the radial quadratures
QUAD_ABS_TOL = 1e-10
# the integrand of the Landau constant is truncated below this value
A_TAIL_TOL = 1e-14


class PotentialError(ValueError):
    pass


class RadialPotential:
    """Base class: a spherically symmetric potential supported in |x| <= 1.

    Subclasses implement :meth:`profile` and :meth:`dprofile` (the radial
    derivative) for radii in ``[0, inf)`` and return zero beyond ``r = 1``.
    """

    kind = KIND_ZERO

    # --- radial profile -------------------------------------------------
    def profile(self, r):
        raise NotImplementedError

    def dprofile(self, r):
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False

    def scaled(self, factor: float) -> "RadialPotential":
        raise NotImplementedError

    def kernel_args(self):
        """Arguments ``(kind, k, amplitude, knots, coefs)`` for numba kernels."""
        raise NotImplementedError

    # --- vector API -----------------------------------------------------
    def eval_phi(self, x):
        """phi(|x|) for a 3-vector or an ``(..., 3)`` array."""
        x = np.asarray(x, dtype=float)
        return self.profile(np.linalg.norm(x, axis=-1))

    def eval_force(self, x):
        """F(x) = -grad phi(x) = -phi'(|x|) x / |x|, zero at the origin."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, -self.dprofile(r) / np.where(r > 0, r, 1.0), 0.0)
        return scale[..., None] * x

    def force_sample(self, x) -> "ForceSample":
        x = np.asarray(x, dtype=float)
        return ForceSample(location=x, value=self.eval_force(x))

    # --- derived constants ----------------------------------------------
    def fourier_transform(self, kappa: float, epsabs: float = QUAD_ABS_TOL) -> float:
        """Radial Fourier transform phi_hat(kappa) = int phi(|x|) exp(-i k.x) dx.

        Uses ``(4 pi / kappa) int_0^1 r sin(kappa r) phi(r) dr`` and its limit
        ``4 pi int_0^1 r^2 phi(r) dr`` at ``kappa = 0``.
        """
        kappa = float(kappa)
        if kappa < 0 or not math.isfinite(kappa):
            raise PotentialError(f"wavenumber must be a finite nonnegative number, got {kappa}")
        if self.is_zero:
            return 0.0
        points = self._breakpoints()
        if kappa == 0.0:
            val, _ = integrate.quad(lambda r: r * r * self.profile(r), 0.0, 1.0,
                                    epsabs=epsabs, epsrel=0.0, points=points, limit=400)
            return 4.0 * math.pi * val
        val, _ = integrate.quad(lambda r: r * self.profile(r) * math.sin(kappa * r), 0.0, 1.0,
                                epsabs=epsabs * kappa / (4 * math.pi), epsrel=0.0,
                                points=points, limit=400)
        return 4.0 * math.pi * val / kappa

    def fourier_transform_many(self, kappa) -> np.ndarray:
        """Vectorised phi_hat on a batch of wavenumbers (panel Gauss-Legendre)."""
        kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
        if np.any(kappa < 0):
            raise PotentialError("wavenumbers must be nonnegative")
        if self.is_zero:
            return np.zeros_like(kappa)
        out = np.empty_like(kappa)
        edges = np.concatenate(([0.0], self._breakpoints() or [], [1.0]))
        xg, wg = np.polynomial.legendre.leggauss(24)
        # panels per unit length grow with the oscillation frequency
        n_panels = np.maximum(1, np.ceil(kappa / 4.0)).astype(int)
        # coarsen to powers of two so few distinct node sets are built
        n_panels = 2 ** np.ceil(np.log2(n_panels)).astype(int)
        lo, hi = edges[:-1], edges[1:]
        for m in np.unique(n_panels):
            idx = np.nonzero(n_panels == m)[0]
            per = np.maximum(1, np.ceil(m * (hi - lo) - 1e-9)).astype(int)
            width = np.repeat((hi - lo) / per, per)
            left = np.repeat(lo, per) + width * (np.arange(per.sum()) - np.repeat(np.cumsum(per) - per, per))
            r = (left[:, None] + 0.5 * width[:, None] * (xg + 1.0)).ravel()
            w = (0.5 * width[:, None] * wg).ravel()
            w = w * r * self.profile(r)
            chunk = max(1, int(4e6 // r.size))
            for s in range(0, idx.size, chunk):
                sel = idx[s:s + chunk]
                kr = np.outer(kappa[sel], r)
                # sin(kr)/k written as r*sinc to stay finite at k = 0
                out[sel] = 4.0 * math.pi * (np.sinc(kr / math.pi) * r) @ w
        return out

    def landau_constant(self) -> float:
        """A = (1 / 8 pi) int_0^inf rho^3 phi_hat(rho)^2 d rho."""
        if self.is_zero:
            return 0.0
        cached = getattr(self, "_landau_constant", None)
        if cached is not None:
            return cached
        cut = self._tail_cutoff()
        # fixed panel Gauss-Legendre on [0, cut]; integrand oscillates on scale ~1
        n_panels = int(math.ceil(cut / 0.5))
        xg, wg = np.polynomial.legendre.leggauss(16)
        lo = np.arange(n_panels) * (cut / n_panels)
        half = 0.5 * cut / n_panels
        rho = (lo[:, None] + half * (xg[None, :] + 1.0)).ravel()
        w = np.tile(wg * half, n_panels)
        vals = rho**3 * self.fourier_transform_many(rho) ** 2
        self._landau_constant = float(w @ vals) / (8.0 * math.pi)
        return self._landau_constant

    def _tail_cutoff(self) -> float:
        # first point past which the envelope of rho^3 phi_hat^2 stays below
        # A_TAIL_TOL; the envelope is the running max over a window of 2 pi.
        grid = np.arange(0.0, 4096.0, 0.5)
        vals = np.abs(grid**3 * self.fourier_transform_many(grid) ** 2)
        window = int(round(2 * math.pi / 0.5)) + 1
        big = np.nonzero(vals > A_TAIL_TOL)[0]
        if big.size == 0:
            return 1.0
        last = big[-1]
        if last >= len(grid) - window:
            raise PotentialError("Landau-constant integrand does not decay; profile not smooth enough")
        return float(grid[min(last + window, len(grid) - 1)])

    def sup_force(self) -> float:
        """sup_x |F(x)| = max_r |phi'(r)| (one-dimensional maximisation)."""
        if self.is_zero:
            return 0.0
        r = np.linspace(0.0, 1.0, 4001)
        vals = np.abs(self.dprofile(r))
        i = int(np.argmax(vals))
        lo, hi = r[max(i - 1, 0)], r[min(i + 1, len(r) - 1)]
        res = optimize.minimize_scalar(lambda s: -abs(float(self.dprofile(s))), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-13})
        return float(max(vals[i], -res.fun))

    def cutoff_constant(self) -> float:
        """a = 4 sqrt(sup |F|), the relative-speed cutoff constant."""
        return 4.0 * math.sqrt(self.sup_force())

    def sup_phi(self) -> float:
        r = np.linspace(0.0, 1.0, 4001)
        return float(np.max(np.abs(self.profile(r))))

    def _breakpoints(self):
        return None

    def to_spec(self) -> dict:
        raise NotImplementedError


class PolynomialPotential(RadialPotential):
    """phi(x) = amplitude * (1 - |x|^2)^k for |x| <= 1, zero outside."""

    kind = KIND_POLY

    def __init__(self, k: int = 3, amplitude: float = 1.0):
        if int(k) != k or k < 3:
            raise PotentialError(f"smoothness order k must be an integer >= 3, got {k}")
        self.k = int(k)
        self.amplitude = float(amplitude)

    def __repr__(self):
        return f"PolynomialPotential(k={self.k}, amplitude={self.amplitude})"

    @property
    def is_zero(self):
        return self.amplitude == 0.0

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        q = np.clip(1.0 - r * r, 0.0, None)
        return self.amplitude * q**self.k

    def dprofile(self, r):
        r = np.asarray(r, dtype=float)
        q = np.clip(1.0 - r * r, 0.0, None)
        return -2.0 * self.k * self.amplitude * r * q ** (self.k - 1)

    def sup_force(self):
        # max of 2k r (1-r^2)^(k-1) sits at r^2 = 1/(2k-1)
        r = 1.0 / math.sqrt(2 * self.k - 1)
        return abs(self.amplitude) * 2 * self.k * r * (1 - r * r) ** (self.k - 1)

    def sup_phi(self):
        return abs(self.amplitude)

    def scaled(self, factor):
        return PolynomialPotential(self.k, self.amplitude * factor)

    def kernel_args(self):
        kind = KIND_ZERO if self.is_zero else KIND_POLY
        return (kind, self.k, self.amplitude, _EMPTY_KNOTS, _EMPTY_COEFS)

    def to_spec(self):
        return {"name": "poly", "k": self.k, "amplitude": self.amplitude}


class TabulatedPotential(RadialPotential):
    """Clamped cubic spline through a radial table.

    The table must start at ``r = 0`` and end at ``r = 1`` with ``phi(1) = 0``.
    The spline has zero slope at both ends so the force is continuous at the
    origin and at the range. Smoothness beyond that is the caller's business.
    """

    kind = KIND_SPLINE

    def __init__(self, r, phi, amplitude: float = 1.0):
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if r.ndim != 1 or r.shape != phi.shape or len(r) < 4:
            raise PotentialError("radial table needs two equal-length columns with >= 4 rows")
        if np.any(np.diff(r) <= 0):
            raise PotentialError("radii must be strictly increasing")
        if r[0] != 0.0 or not math.isclose(r[-1], 1.0, abs_tol=1e-12):
            raise PotentialError("radial table must span [0, 1] (range normalised to 1)")
        if abs(phi[-1]) > 1e-12 * max(1.0, np.max(np.abs(phi))):
            raise PotentialError("phi(1) must vanish for a continuous compactly supported potential")
        r[-1] = 1.0
        self.r = r
        self.phi = phi
        self.amplitude = float(amplitude)
        self._spline = CubicSpline(r, phi, bc_type=((1, 0.0), (1, 0.0)))

    def __repr__(self):
        return f"TabulatedPotential(n={len(self.r)}, amplitude={self.amplitude})"

    @classmethod
    def from_file(cls, path, amplitude: float = 1.0):
        data = np.loadtxt(Path(path), ndmin=2)
        if data.shape[1] != 2:
            raise PotentialError(f"{path}: expected two whitespace-separated columns (r, phi)")
        return cls(data[:, 0], data[:, 1], amplitude=amplitude)

    @property
    def is_zero(self):
        return self.amplitude == 0.0 or not np.any(self.phi)

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= 1.0
        return self.amplitude * np.where(inside, self._spline(np.clip(r, 0.0, 1.0)), 0.0)

    def dprofile(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= 1.0
        return self.amplitude * np.where(inside, self._spline(np.clip(r, 0.0, 1.0), 1), 0.0)

    def scaled(self, factor):
        return TabulatedPotential(self.r, self.phi, self.amplitude * factor)

    def _breakpoints(self):
        return list(self.r[1:-1])

    @cached_property
    def _coefs(self):
        # rows: knot intervals; columns: c0..c3 in powers of (r - r_i)
        c = self._spline.c[::-1].T.copy() * self.amplitude
        return np.ascontiguousarray(c)

    def kernel_args(self):
        if self.is_zero:
            return (KIND_ZERO, 0, 0.0, _EMPTY_KNOTS, _EMPTY_COEFS)
        return (KIND_SPLINE, 0, 1.0, np.ascontiguousarray(self.r), self._coefs)

    def to_spec(self):
        return {"name": "table", "r": self.r.tolist(), "phi": self.phi.tolist(),
                "amplitude": self.amplitude}


class ForceSample:
    __slots__ = ("location", "value")

    def __init__(self, location, value):
        self.location = location
        self.value = value

    def __repr__(self):
        return f"ForceSample(location={self.location!r}, value={self.value!r})"


_EMPTY_KNOTS = np.zeros(1)
_EMPTY_COEFS = np.zeros((1, 4))


def zero_potential() -> PolynomialPotential:
    return PolynomialPotential(3, 0.0)


def load_potential(spec) -> RadialPotential:
    """Build a potential from a config mapping.

    ``{"name": "poly", "k": 3, "amplitude": 1.0}`` or
    ``{"name": "table", "path": "phi.txt"}`` (two whitespace-separated columns)
    or ``{"name": "zero"}``.
    """
    if isinstance(spec, RadialPotential):
        return spec
    spec = dict(spec or {})
    name = spec.get("name", "poly")
    amp = float(spec.get("amplitude", 1.0))
    if name == "poly":
        return PolynomialPotential(int(spec.get("k", 3)), amp)
    if name == "zero":
        return zero_potential()
    if name == "table":
        if "path" in spec:
            return TabulatedPotential.from_file(spec["path"], amplitude=amp)
        return TabulatedPotential(spec["r"], spec["phi"], amplitude=amp)
    raise PotentialError(f"unknown potential name {name!r} (expected 'poly', 'table' or 'zero')")


# --- numba kernels --------------------------------------------------------

@numba.njit(cache=True, inline="always")
def radial_dphi_over_r(r2, kind, k, amp, knots, coefs):
    """-phi'(r)/r, so that F(x) = radial_dphi_over_r(|x|^2) * x."""
    if kind == KIND_ZERO or r2 >= 1.0:
        return 0.0
    if kind == KIND_POLY:
        return amp * 2.0 * k * (1.0 - r2) ** (k - 1)
    r = math.sqrt(r2)
    if r == 0.0:
        return -2.0 * coefs[0, 2]
    i = np.searchsorted(knots, r, side="right") - 1
    if i >= coefs.shape[0]:
        i = coefs.shape[0] - 1
    d = r - knots[i]
    dphi = coefs[i, 1] + d * (2.0 * coefs[i, 2] + 3.0 * d * coefs[i, 3])
    return -amp * dphi / r


@numba.njit(cache=True, inline="always")
def radial_phi(r2, kind, k, amp, knots, coefs):
    if kind == KIND_ZERO or r2 >= 1.0:
        return 0.0
    if kind == KIND_POLY:
        return amp * (1.0 - r2) ** k
    r = math.sqrt(r2)
    i = np.searchsorted(knots, r, side="right") - 1
    if i >= coefs.shape[0]:
        i = coefs.shape[0] - 1
    d = r - knots[i]
    return amp * (coefs[i, 0] + d * (coefs[i, 1] + d * (coefs[i, 2] + d * coefs[i, 3])))


@numba.njit(cache=True, inline="always")
def force_xyz(x, y, z, kind, k, amp, knots, coefs):
    s = radial_dphi_over_r(x * x + y * y + z * z, kind, k, amp, knots, coefs)
    return s * x, s * y, s * z
