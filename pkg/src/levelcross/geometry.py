"""Charts and group actions on the parameter sphere.

The pencil parameter lambda lives on the Riemann sphere.  We use the chart
that sends the south pole to lambda = 0 and the north pole to infinity:

    x = 2 Re(lambda) / (1 + |lambda|^2)
    y = 2 Im(lambda) / (1 + |lambda|^2)
    z = (|lambda|^2 - 1) / (1 + |lambda|^2)

The image of the extended real line is the great circle {y = 0}; the distance
from a point to it is arcsin|y|.  The SU(2) element (u, v), |u|^2 + |v|^2 = 1,
acts on pencils by (A, B) -> (uA + vB, -conj(v)A + conj(u)B) and moves the
parameter by the Mobius map

    mu = (u lambda - v) / (conj(v) lambda + conj(u)),

a rotation of the sphere.  Infinity is a value here, not an error: it is
represented by ``INFINITY`` and handled through homogeneous coordinates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

INFINITY = complex(float("inf"), 0.0)

_UNIT_TOL = 1e-12


def is_infinite(lam: complex) -> bool:
    """True when lam represents the point at infinity (any non-finite complex)."""
    return not (math.isfinite(lam.real) and math.isfinite(lam.imag))


@dataclass(frozen=True)
class SpherePoint:
    """Point on the unit sphere; ``phi`` and ``zc`` are the cylinder coordinates."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        r = self.x * self.x + self.y * self.y + self.z * self.z
        if abs(r - 1.0) > 1e-10:
            raise ValueError(f"sphere point has norm^2 {r!r}, not 1")

    @property
    def phi(self) -> float:
        """Azimuth in [0, 2 pi)."""
        return math.atan2(self.y, self.x) % (2.0 * math.pi)

    @property
    def zc(self) -> float:
        """Height coordinate, identical to z."""
        return self.z


def to_sphere(lam: complex) -> SpherePoint:
    """Stereographic chart C u {inf} -> S^2 with 0 at the south pole.

    Parameters
    ----------
    lam : complex
        Pencil parameter; ``INFINITY`` (or any non-finite value) maps to (0, 0, 1).
    """
    if is_infinite(lam):
        return SpherePoint(0.0, 0.0, 1.0)
    a, b = lam.real, lam.imag
    m = a * a + b * b
    # for very large |lambda| the quotient forms below lose nothing: each factor
    # is computed at full relative precision
    d = 1.0 + m
    return SpherePoint(2.0 * a / d, 2.0 * b / d, (m - 1.0) / d)


def from_sphere(p: SpherePoint) -> complex:
    """Inverse stereographic chart; the north pole returns ``INFINITY``.

    Uses lambda = (x + iy)/(1 - z) on the southern half and the equivalent
    form lambda = (1 + z)/(x - iy) on the northern half, which keeps the
    round trip accurate to ~1e-15 relative even for |lambda| ~ 1e6.
    """
    if p.z <= 0.0:
        return complex(p.x, p.y) / (1.0 - p.z)
    w = complex(p.x, -p.y)
    if w == 0:
        return INFINITY
    return (1.0 + p.z) / w


def sphere_y(lam: complex) -> float:
    """Height above the real circle: Y = 2 Im(lambda) / (1 + |lambda|^2)."""
    if is_infinite(lam):
        return 0.0
    a, b = lam.real, lam.imag
    return 2.0 * b / (1.0 + a * a + b * b)


def tau(lam: complex) -> complex:
    """Pseudo-covariance of the normalized pencil entry, (1 + lambda^2)/(1 + |lambda|^2).

    |tau| <= 1, with tau = 0 exactly at lambda = +-i and |tau| = 1 on the
    extended real line (tau(inf) = 1).
    """
    if is_infinite(lam):
        return 1.0 + 0.0j
    return (1.0 + lam * lam) / (1.0 + abs(lam) ** 2)


def q_of_lambda(lam: complex) -> float:
    """|tau(lambda)|^2, which equals 1 - Y^2 with Y = sphere_y(lambda)."""
    t = tau(lam)
    return t.real * t.real + t.imag * t.imag


def dist_to_rp1(lam: complex) -> float:
    """Spherical (geodesic) distance from lambda to the real great circle.

    Equals arcsin|Y|; zero exactly on R u {inf}, pi/2 at +-i.
    """
    y = sphere_y(lam)
    return math.asin(min(1.0, abs(y)))


def _check_su2(u: complex, v: complex) -> None:
    if abs(abs(u) ** 2 + abs(v) ** 2 - 1.0) > _UNIT_TOL:
        raise ValueError("(u, v) must satisfy |u|^2 + |v|^2 = 1 to 1e-12")


def mobius_param(u: complex, v: complex, lam: complex) -> complex:
    """Parameter transport of the SU(2) pencil action.

    If mu is a crossing parameter of the transformed pencil
    (uA + vB, -conj(v)A + conj(u)B), the original pencil crosses at
    lambda = (v + mu conj(u)) / (u - mu conj(v)); this function is the
    forward map lambda -> mu.  Computed in homogeneous coordinates, so the
    poles go to/from ``INFINITY`` cleanly.
    """
    _check_su2(u, v)
    if is_infinite(lam):
        num, den = u, v.conjugate()
    else:
        num = u * lam - v
        den = v.conjugate() * lam + u.conjugate()
    if den == 0:
        return INFINITY
    out = num / den
    return out if not is_infinite(out) else INFINITY


def compose_su2(first: tuple[complex, complex],
                second: tuple[complex, complex]) -> tuple[complex, complex]:
    """Group element equal to acting by ``first`` and then by ``second``."""
    u1, v1 = first
    u2, v2 = second
    _check_su2(u1, v1)
    _check_su2(u2, v2)
    return (u2 * u1 - v2 * v1.conjugate(), u2 * v1 + v2 * u1.conjugate())


def chordal_distance(l1: complex, l2: complex) -> float:
    """Chordal metric on the sphere, 2|l1 - l2| / sqrt((1+|l1|^2)(1+|l2|^2)); range [0, 2]."""
    i1, i2 = is_infinite(l1), is_infinite(l2)
    if i1 and i2:
        return 0.0
    if i1 or i2:
        lf = l2 if i1 else l1
        return 2.0 / math.sqrt(1.0 + abs(lf) ** 2)
    num = 2.0 * abs(l1 - l2)
    den = math.sqrt((1.0 + abs(l1) ** 2) * (1.0 + abs(l2) ** 2))
    return num / den


def sphere_distance(l1: complex, l2: complex) -> float:
    """Geodesic distance on the unit sphere between two parameters."""
    c = chordal_distance(l1, l2)
    return 2.0 * math.asin(min(1.0, 0.5 * c))


def random_su2(rng) -> tuple[complex, complex]:
    """Haar-uniform SU(2) element (u, v) from four independent Gaussians."""
    g = rng.standard_normal(4)
    nrm = math.sqrt(float(g @ g))
    if nrm == 0.0:
        return 1.0 + 0.0j, 0.0 + 0.0j
    g = g / nrm
    return complex(g[0], g[1]), complex(g[2], g[3])
