"""Reference laws on the sphere and in the plane.

Closed forms:

* uniform law on CP^1: dx dy / (pi (1+|lambda|^2)^2), the round measure.
* 2x2 Hermitian-pencil law: (4/pi) |y| dx dy / (1+x^2+y^2)^3, vanishing on
  the real axis.
* circular law: uniform on the unit disk.
* elliptic law with parameter tau in [0,1): uniform on the ellipse with
  semi-axes 1+tau and 1-tau (density 1/(pi(1-tau^2))), interpolating the
  circular law (tau=0) and the semicircle segment (tau -> 1).

Quadrature-defined objects:

* log_energy: the double integral of log|z-w| against a compactly supported
  law, computed with a two-sided truncated kernel (clip at distance delta
  below, at R above; R never binds on these supports) and extrapolation
  delta -> 0 over delta in {1e-2, 1e-3, 1e-4}.
* EnergyTable: G(q) = log_energy(elliptic(sqrt(q))) tabulated on a q-grid,
  serialized as CSV.
* psi_density: (1/2pi) times the numerical Laplacian of the potential
  F(lambda) = (1/2) log(1+|lambda|^2) + G(1 - Y^2), the candidate bulk
  density for Hermitian pencils; with a constant G it reduces exactly to the
  uniform law.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.integrate
from scipy.interpolate import CubicSpline

from .geometry import sphere_y

__all__ = [
    "QuadratureError", "LawSpec", "EnergyTable",
    "uniform_density", "gue2_density", "elliptic_density",
    "law_uniform_cp1", "law_gue2", "law_circular", "law_elliptic", "law_psi",
    "absY_cdf", "log_energy", "psi_density",
    "build_energy_table", "check_normalization",
    "UNIT_DISK_LOG_ENERGY",
]

# average of the disk potential (|z|^2 - 1)/2 over the disk: 1/4 - 1/2
UNIT_DISK_LOG_ENERGY = -0.25

DELTA_LADDER = (1e-2, 1e-3, 1e-4)   # truncation radii for the log kernel
BULK_Q_MAX = 0.95                   # table cutoff: q <= 1 - 0.05


class QuadratureError(RuntimeError):
    """A quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class LawSpec:
    """A named law: its density in natural coordinates, the |Y| distribution
    when it lives on the sphere, and whether mass 1 has been verified."""

    id: str
    density: Callable[[complex], float]
    cdf_absY: Callable[[float], float] | None = None
    normalization_checked: bool = False
    tau: float | None = None        # elliptic parameter when id == "elliptic"


def uniform_density(lam: complex) -> float:
    """Density of the uniform law on CP^1 in the lambda chart."""
    r2 = lam.real**2 + lam.imag**2
    return 1.0 / (math.pi * (1.0 + r2) ** 2)


def gue2_density(lam: complex) -> float:
    """Crossing density of the 2x2 Hermitian Gaussian pencil: zero on the
    real axis, maximal on the imaginary unit circle |lambda| = 1."""
    r2 = lam.real**2 + lam.imag**2
    return 4.0 * abs(lam.imag) / (math.pi * (1.0 + r2) ** 3)


def elliptic_density(tau_abs: float, z: complex) -> float:
    """Uniform law on the ellipse with semi-axes 1+tau, 1-tau."""
    if not 0.0 <= tau_abs < 1.0:
        raise ValueError("elliptic parameter must satisfy 0 <= tau < 1")
    a, b = 1.0 + tau_abs, 1.0 - tau_abs
    if (z.real / a) ** 2 + (z.imag / b) ** 2 <= 1.0:
        return 1.0 / (math.pi * (1.0 - tau_abs**2))
    return 0.0


def _uniform_absY_cdf(t: float) -> float:
    # the height of a uniform sphere point is uniform on [-1,1] along any
    # axis, so |Y| is uniform on [0,1]
    return min(max(t, 0.0), 1.0)


def _gue2_sphere_band_mass(t: float, tol: float) -> float:
    """P(|Y| <= t) for the 2x2 Hermitian law by iterated adaptive quadrature
    in the cylinder chart: density |Y|/(2pi) per unit area, Y = sqrt(1-Z^2)
    sin(phi)."""
    t = float(t)
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0

    def inner(phi: float) -> float:
        s = abs(math.sin(phi))
        if s == 0.0:
            return 0.0
        # |Y| <= t on |Z| >= z0; integrand even in Z
        z0sq = 1.0 - (t / s) ** 2
        z0 = math.sqrt(z0sq) if z0sq > 0.0 else 0.0
        val, err = scipy.integrate.quad(
            lambda zz: s * math.sqrt(max(0.0, 1.0 - zz * zz)) / (2.0 * math.pi),
            z0, 1.0, epsabs=tol * 1e-2, limit=100)
        return 2.0 * val

    # sin(phi) = +-t are kinks of the region boundary
    kink = math.asin(min(t, 1.0))
    pts = [kink, math.pi - kink, math.pi + kink, 2.0 * math.pi - kink]
    val, err = scipy.integrate.quad(inner, 0.0, 2.0 * math.pi,
                                    points=pts, epsabs=tol * 0.5, limit=200)
    if err > tol:
        raise QuadratureError(f"band-mass quadrature error {err:.2e} above {tol}")
    return min(val, 1.0)


def absY_cdf(law: LawSpec, t: float) -> float:
    """P(|Y| <= t) under a sphere law (Y the height toward the imaginary
    axis pole).  Exact for the uniform law, adaptive quadrature at 1e-6 for
    the 2x2 Hermitian law."""
    if law.cdf_absY is None:
        raise ValueError(f"law {law.id!r} does not live on the sphere")
    return law.cdf_absY(t)


def law_uniform_cp1() -> LawSpec:
    return LawSpec(id="uniform-cp1", density=uniform_density,
                   cdf_absY=_uniform_absY_cdf)


def law_gue2() -> LawSpec:
    return LawSpec(id="gue2", density=gue2_density,
                   cdf_absY=lambda t: _gue2_sphere_band_mass(t, 1e-6))


def law_circular() -> LawSpec:
    return LawSpec(id="circular", density=lambda z: elliptic_density(0.0, z),
                   tau=0.0)


def law_elliptic(tau: float) -> LawSpec:
    if not 0.0 <= tau < 1.0:
        raise ValueError("elliptic parameter must satisfy 0 <= tau < 1")
    return LawSpec(id="elliptic", density=lambda z: elliptic_density(tau, z),
                   tau=tau)


def law_psi(energy: "EnergyTable") -> LawSpec:
    """Candidate bulk law; defined away from the equator, so its mass over
    the covered band is whatever the potential produces (reported by the
    experiments, never asserted to be 1)."""
    return LawSpec(id="psi", density=lambda lam: psi_density(lam, energy))


# ---------------------------------------------------------------------------
# logarithmic energy of elliptic laws
#
# Affine disk coordinates: the elliptic law is the image of the uniform disk
# law under T(u) = ((1+tau) Re u, (1-tau) Im u), so with d = u - u' =
# rho e^{i alpha},
#
#     log|T(u) - T(u')| = log rho + m(alpha),
#     m(alpha) = (1/2) log(a^2 cos^2 alpha + b^2 sin^2 alpha).
#
# The inner integral over u' is taken in polar coordinates around u: along
# direction alpha the ray leaves the disk at P(alpha), and the radial
# integral of the clipped kernel has a closed form.  The angular integral
# uses a periodic substitution that crowds nodes where m varies fastest; the
# outer disk average uses Gauss-Legendre in r^2 times a trapezoid in angle.
# ---------------------------------------------------------------------------

def _ellipse_energy_truncated(a: float, b: float, delta: float,
                              nr: int, nth: int, nal: int) -> float:
    xs, ws = np.polynomial.legendre.leggauss(nr)
    s = 0.5 * (xs + 1.0)                 # int_0^1 f(r) r dr = 1/2 int_0^1 f(sqrt s) ds
    wr = 0.25 * ws                       # interval halving x the 1/2 of the substitution
    r = np.sqrt(s)
    t = 2.0 * np.pi * np.arange(nth) / nth
    beta = 2.0 * np.pi * np.arange(nal) / nal
    c = 1.0 - b / a
    alpha = beta + 0.5 * c * np.sin(2.0 * beta)
    jac = 1.0 + c * np.cos(2.0 * beta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    m = 0.5 * np.log(a * a * ca * ca + b * b * sa * sa)
    u = (r[:, None] * np.cos(t)[None, :]).ravel()[:, None]
    v = (r[:, None] * np.sin(t)[None, :]).ravel()[:, None]
    pe = u * ca[None, :] + v * sa[None, :]          # component of u along the ray
    px = u * sa[None, :] - v * ca[None, :]          # component across the ray
    P = -pe + np.sqrt(np.maximum(1.0 - px * px, 0.0))   # exit length of the ray
    rd = delta * np.exp(-m)[None, :]                # clip radius in disk coordinates

    def g(x):
        return x * x * (2.0 * np.log(np.maximum(x, 1e-300)) - 1.0) / 4.0

    logd = math.log(delta)
    big = P > rd
    # int_0^P clip(log rho + m) rho drho, kernel = log delta below rd
    K = np.where(big,
                 0.5 * rd * rd * logd + g(P) - g(rd) + m[None, :] * (P * P - rd * rd) / 2.0,
                 0.5 * P * P * logd)
    inner = (K * jac[None, :]).mean(axis=1) * 2.0   # (1/pi) int over angles
    outer = inner.reshape(nr, nth).mean(axis=1) * 2.0
    return float(np.sum(wr * outer))


def _energy_at_resolution(tau: float, nr: int, nth: int, nal: int):
    a, b = 1.0 + tau, 1.0 - tau
    vals = [_ellipse_energy_truncated(a, b, d, nr, nth, nal) for d in DELTA_LADDER]

    def extrap(d1, g1, d2, g2):
        # remove the delta^2 truncation bias
        return (g2 * d1 * d1 - g1 * d2 * d2) / (d1 * d1 - d2 * d2)

    coarse = extrap(DELTA_LADDER[0], vals[0], DELTA_LADDER[1], vals[1])
    fine = extrap(DELTA_LADDER[1], vals[1], DELTA_LADDER[2], vals[2])
    return fine, abs(fine - coarse)


_RESOLUTIONS = ((24, 48, 128), (32, 64, 192), (48, 96, 256))


def log_energy(law: LawSpec, tol: float = 1e-3) -> float:
    """The double log-kernel integral of a compactly supported law.

    Refines the mesh until two consecutive resolutions agree to tol/2 and the
    truncation extrapolation is stable to tol/2; raises QuadratureError when
    the ladder is exhausted first.  Deterministic for a given tolerance.
    """
    if law.tau is None:
        raise ValueError("log_energy needs a compactly supported law "
                         "(circular or elliptic)")
    tau = law.tau
    prev = None
    for res in _RESOLUTIONS:
        val, trunc_err = _energy_at_resolution(tau, *res)
        if prev is not None and abs(val - prev) <= 0.5 * tol and trunc_err <= 0.5 * tol:
            return val
        prev = val
    raise QuadratureError(
        f"log-energy quadrature did not stabilize to {tol} for tau={tau}")


@dataclass
class EnergyTable:
    """G(q) = log-energy of the elliptic law with tau = sqrt(q), tabulated."""

    q_grid: np.ndarray
    g_values: np.ndarray
    quadrature_tol: float

    def __post_init__(self):
        self.q_grid = np.asarray(self.q_grid, dtype=float)
        self.g_values = np.asarray(self.g_values, dtype=float)
        if self.q_grid.ndim != 1 or self.q_grid.shape != self.g_values.shape:
            raise ValueError("q_grid and g_values must be 1-d of equal length")
        if np.any(np.diff(self.q_grid) <= 0):
            raise ValueError("q_grid must be strictly increasing")
        self._spline = None

    def spline(self) -> CubicSpline:
        if self._spline is None:
            self._spline = CubicSpline(self.q_grid, self.g_values)
        return self._spline

    def g(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        lo, hi = self.q_grid[0], self.q_grid[-1]
        if np.any(q < lo - 1e-12) or np.any(q > hi + 1e-12):
            raise ValueError(f"q outside table coverage [{lo}, {hi}]")
        return self.spline()(np.clip(q, lo, hi))

    def check_continuity(self, slope_bound: float = 1.0) -> float:
        """Largest neighbor jump per unit q; raises when it exceeds the
        declared modulus (plus the quadrature tolerance allowance)."""
        dq = np.diff(self.q_grid)
        jumps = np.abs(np.diff(self.g_values))
        worst = float(np.max(jumps / (slope_bound * dq + 2.0 * self.quadrature_tol)))
        if worst > 1.0:
            raise ValueError(f"energy table discontinuity: jump ratio {worst:.2f}")
        return worst

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "G", "tol"])
            for q, g in zip(self.q_grid, self.g_values):
                w.writerow([repr(float(q)), repr(float(g)), repr(self.quadrature_tol)])

    @classmethod
    def from_csv(cls, path) -> "EnergyTable":
        qs, gs, tols = [], [], []
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if header[:3] != ["q", "G", "tol"]:
                raise ValueError(f"not an energy table: header {header}")
            for row in rd:
                qs.append(float(row[0]))
                gs.append(float(row[1]))
                tols.append(float(row[2]))
        return cls(q_grid=np.array(qs), g_values=np.array(gs),
                   quadrature_tol=max(tols) if tols else 1e-3)


def build_energy_table(q_grid=None, tol: float = 1e-3) -> EnergyTable:
    """Tabulate G on a grid (default: step 0.025 up to the bulk cutoff 0.95)."""
    if q_grid is None:
        q_grid = np.linspace(0.0, BULK_Q_MAX, 39)
    q_grid = np.asarray(q_grid, dtype=float)
    vals = np.array([log_energy(law_elliptic(math.sqrt(q)), tol) for q in q_grid])
    return EnergyTable(q_grid=q_grid, g_values=vals, quadrature_tol=tol)


def _potential(lam: complex, table: EnergyTable) -> float:
    y = sphere_y(lam)
    q = 1.0 - y * y
    return 0.5 * math.log1p(abs(lam) ** 2) + float(table.g(q))


def psi_density(lam: complex, energy: EnergyTable, h: float = 1e-3) -> float:
    """(1/2pi) Laplacian of F(lambda) = (1/2)log(1+|lambda|^2) + G(1-Y^2).

    Five-point stencil at steps h and h/2, Richardson-combined.  Needs
    Im(lambda) != 0 and all stencil points inside the table's q coverage;
    raises ValueError otherwise.
    """
    lam = complex(lam)
    if lam.imag == 0.0:
        raise ValueError("psi_density is defined away from the real axis")
    offs = [0.0, h, -h, 1j * h, -1j * h, h / 2, -h / 2, 1j * h / 2, -1j * h / 2]
    pts = [lam + o for o in offs]
    for p in pts:
        q = 1.0 - sphere_y(p) ** 2
        if not (energy.q_grid[0] - 1e-12 <= q <= energy.q_grid[-1] + 1e-12):
            raise ValueError(
                f"stencil point {p:.6g} has q={q:.4f} outside table coverage")
    f = [_potential(p, energy) for p in pts]
    lap_h = (f[1] + f[2] + f[3] + f[4] - 4.0 * f[0]) / (h * h)
    lap_h2 = (f[5] + f[6] + f[7] + f[8] - 4.0 * f[0]) / (h * h / 4.0)
    lap = (4.0 * lap_h2 - lap_h) / 3.0
    return lap / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# normalization checks
# ---------------------------------------------------------------------------

def _sphere_mass(density, tol: float) -> float:
    # integrate over CP^1 in the cylinder chart: dx dy = (1+|lam|^2)^2/4 dphi dZ
    def f(z, phi):
        mod = math.sqrt((1.0 + z) / (1.0 - z)) if z < 1.0 else math.inf
        lam = complex(mod * math.cos(phi), mod * math.sin(phi))
        r2 = mod * mod
        return density(lam) * (1.0 + r2) ** 2 / 4.0

    val, err = scipy.integrate.dblquad(f, 0.0, 2.0 * math.pi,
                                       -1.0 + 1e-13, 1.0 - 1e-13,
                                       epsabs=tol * 0.5)
    if err > tol:
        raise QuadratureError(f"sphere mass error {err:.2e} above {tol}")
    return val


def _ellipse_mass(density, tau: float, tol: float) -> float:
    # stretched polar coordinates flatten the support boundary
    a, b = 1.0 + tau, 1.0 - tau

    def f(r, t):
        z = complex(a * r * math.cos(t), b * r * math.sin(t))
        return density(z) * a * b * r

    val, err = scipy.integrate.dblquad(f, 0.0, 2.0 * math.pi, 0.0, 1.0,
                                       epsabs=tol * 0.5)
    if err > tol:
        raise QuadratureError(f"ellipse mass error {err:.2e} above {tol}")
    return val


def check_normalization(law: LawSpec, tol: float = 1e-6) -> LawSpec:
    """Verify total mass 1 by adaptive quadrature and stamp the law.

    The candidate bulk law ``psi`` is excluded: its mass over the covered
    band is an open quantity that experiments report rather than assert.
    """
    if law.id == "psi":
        raise ValueError("psi has no normalization guarantee to check")
    if law.id in ("uniform-cp1", "gue2"):
        mass = _sphere_mass(law.density, tol)
    elif law.tau is not None:
        mass = _ellipse_mass(law.density, law.tau, tol)
    else:
        raise ValueError(f"unknown law {law.id!r}")
    if abs(mass - 1.0) > tol:
        raise QuadratureError(f"law {law.id!r} has mass {mass!r}, not 1")
    return replace(law, normalization_checked=True)
