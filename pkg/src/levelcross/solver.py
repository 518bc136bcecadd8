"""Finding all zeros of the pencil discriminant.

D(lambda) = prod_{i<j} (xi_i(lambda) - xi_j(lambda))^2 is a polynomial of
degree n(n-1) whose leading coefficient is the discriminant of B, so a pencil
with a degenerate B direction has part of its zero set at infinity.  Two
solvers:

``solve_crossings``
    Simultaneous Aberth iteration driven by the Newton ratio
    D/D' = 1/(log D)', available pointwise through eigenvalue perturbation
    without ever forming the polynomial.  Scales past n = 12 and detects
    roots at infinity (surplus iterates diverge and are frozen there).
``solve_crossings_interp``
    Sample D on a circle, recover coefficients by FFT, take balanced
    companion-matrix roots, polish with Newton.  An independent cross-check;
    the dynamic range of |D| on the circle limits it to moderate n.

Both feed the same clustering (nearby roots merge, multiplicities add) and
per-root validation: the smallest eigenvalue gap of C(lambda*), measured in
the scale eigenvalues live at (sqrt(n(1+|lambda*|^2))), must be below
``accept_tol``.  A solve that cannot produce the full count of validated
zeros raises CountDeficitError with diagnostics; it never pads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import INFINITY, SpherePoint, is_infinite, to_sphere
from .pencil import _derivative_sweep, _log_disc_many

__all__ = [
    "SolverError", "CountDeficitError", "DegeneratePencilError", "DynamicRangeError",
    "SolverOptions", "CrossingPoint", "CrossingSet", "ValidationReport",
    "spiral_points", "solve_crossings", "solve_crossings_interp",
    "validate_crossing", "validation_report", "mobius_pencil",
]

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class SolverError(RuntimeError):
    pass


class CountDeficitError(SolverError):
    """Fewer validated zeros than the degree demands, after all restarts."""


class DegeneratePencilError(SolverError):
    """B = 0: the pencil never leaves the single matrix A."""


class DynamicRangeError(SolverError):
    """|D| spans too many orders of magnitude on the sampling circle."""


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 120
    step_tol: float = 1e-12          # relative step size declaring convergence
    accept_tol: float = 1e-6         # validation gate on the gap residual
    infinity_threshold: float = 1e8  # |z| beyond this counts toward divergence
    infinity_sweeps: int = 5         # consecutive sweeps beyond threshold
    cluster_tol: float = 1e-7        # relative merge distance for root clusters
    polish_steps: int = 2
    restarts: int = 3
    initial_radius: float = 1.0


@dataclass(frozen=True)
class CrossingPoint:
    """One zero of the discriminant.  ``lam`` may be the point at infinity,
    in which case there is no residual to report (``None``)."""

    lam: complex
    multiplicity: int
    residual: float | None
    iterations: int = 0
    method: str = "aberth"           # aberth | interp | refined
    coincident: bool = False         # gap at rounding level: exactly repeated eigenvalue

    @property
    def sphere(self) -> SpherePoint:
        return to_sphere(self.lam)

    @property
    def infinite(self) -> bool:
        return is_infinite(self.lam)


@dataclass(frozen=True)
class CrossingSet:
    """All crossings of one pencil, finite and at infinity, with multiplicity."""

    points: tuple[CrossingPoint, ...]
    n: int
    restarts: int = 0

    @property
    def total_count(self) -> int:
        return sum(p.multiplicity for p in self.points)

    @property
    def degree(self) -> int:
        return self.n * (self.n - 1)

    @property
    def n_infinite(self) -> int:
        return sum(p.multiplicity for p in self.points if p.infinite)

    def finite_points(self) -> tuple[CrossingPoint, ...]:
        return tuple(p for p in self.points if not p.infinite)

    def lambdas(self) -> np.ndarray:
        """Finite crossing locations, one entry per multiplicity."""
        out = []
        for p in self.finite_points():
            out.extend([p.lam] * p.multiplicity)
        return np.asarray(out, dtype=complex)

    def sphere_points(self) -> list[SpherePoint]:
        """All crossings on the sphere (infinity included), with multiplicity."""
        return [p.sphere for p in self.points for _ in range(p.multiplicity)]

    def complete(self) -> bool:
        return self.total_count == self.degree

    def max_residual(self) -> float:
        vals = [p.residual for p in self.points if p.residual is not None]
        return max(vals) if vals else 0.0


@dataclass(frozen=True)
class ValidationReport:
    lam: complex
    min_gap: float
    residual: float
    coincident: bool
    scale: float


def validation_report(pencil, lam: complex) -> ValidationReport:
    """Gap structure of C(lam) at a candidate crossing.

    residual = (smallest eigenvalue gap) / sqrt(n (1+|lam|^2)), the gap in the
    units eigenvalues naturally live in at that point; a simple crossing
    polished to machine precision sits around 1e-8 or below.  ``coincident``
    flags gaps at rounding level relative to the matrix scale, i.e. an exactly
    repeated eigenvalue rather than a resolved near-pair.  At infinity the
    pencil direction is B and the gap is measured on B's spectrum.
    """
    if is_infinite(lam):
        xi = np.linalg.eigvals(pencil.b)
        unit = math.sqrt(pencil.n)
        c_norm = float(np.linalg.norm(pencil.b)) / math.sqrt(pencil.n)
    else:
        c = pencil.at(lam)
        xi = np.linalg.eigvals(c)
        unit = math.sqrt(pencil.n * (1.0 + abs(lam) ** 2))
        c_norm = float(np.linalg.norm(c)) / math.sqrt(pencil.n)
    if len(xi) < 2:
        return ValidationReport(lam, math.inf, math.inf, False, 1.0)
    d = np.abs(xi[:, None] - xi[None, :])
    d[np.diag_indices(len(xi))] = np.inf
    gap = float(d.min())
    scale = max(1.0, c_norm, float(np.abs(xi).max()))
    return ValidationReport(
        lam=lam, min_gap=gap, residual=gap / unit,
        coincident=gap <= 1e-7 * scale, scale=scale)


def validate_crossing(pencil, lam: complex) -> float:
    """Normalized minimal eigenvalue gap of C(lam): the residual
    min_{i<j}|xi_i - xi_j| / sqrt(n (1+|lam|^2)).  Small (default gate 1e-6)
    exactly when lam really is a crossing."""
    return validation_report(pencil, lam).residual


def mobius_pencil(pencil, u: complex, v: complex):
    """Rotate the pencil by the unit quaternion (u, v): (A, B) becomes
    (uA + vB, -conj(v)A + conj(u)B).  Crossings transport by the matching
    Mobius map on lambda (``geometry.mobius_param``)."""
    if abs(abs(u) ** 2 + abs(v) ** 2 - 1.0) > 1e-12:
        raise ValueError("(u, v) must satisfy |u|^2 + |v|^2 = 1")
    a2 = u * pencil.a + v * pencil.b
    b2 = -np.conj(v) * pencil.a + np.conj(u) * pencil.b
    return replace(pencil, a=a2, b=b2)


def spiral_points(m: int, radius: float = 1.0, rotation: float = 0.0) -> np.ndarray:
    """m starting points, spread over the sphere along a golden-angle spiral
    and mapped down to the plane.  Midpoint heights keep the poles off the
    list; ``radius`` scales all moduli, ``rotation`` turns the spiral."""
    k = np.arange(m)
    h = -1.0 + 2.0 * (k + 0.5) / m          # z-coordinates, in (-1, 1)
    phi = _GOLDEN_ANGLE * k + rotation
    mod = np.sqrt((1.0 + h) / (1.0 - h))    # |lam|^2 = (1+z)/(1-z)
    return radius * mod * np.exp(1j * phi)


def _aberth_pass(pencil, opts: SolverOptions, sigma: float, attempt: int):
    n = pencil.n
    degree = n * (n - 1)
    z = spiral_points(degree, radius=opts.initial_radius * 1.25**attempt,
                      rotation=_GOLDEN_ANGLE * 0.5 * attempt)
    state = np.zeros(degree, dtype=np.int8)   # 0 active, 1 converged, 2 infinite
    inf_streak = np.zeros(degree, dtype=np.int32)
    rng_kick = np.random.Generator(np.random.Philox(key=attempt + 977))
    sweeps_done = 0
    for sweep in range(opts.max_iters):
        act = np.nonzero(state == 0)[0]
        if len(act) == 0:
            break
        sweeps_done = sweep + 1
        deriv, _, min_gap, _ = _derivative_sweep(pencil, z[act], sigma)
        with np.errstate(all="ignore"):
            w = 1.0 / deriv
        exact = ~np.isfinite(w) & (min_gap == 0.0)
        w[exact] = 0.0
        bad = ~np.isfinite(w)
        if np.any(bad):
            # lost precision with no root underfoot: kick and retry next sweep
            kick = 1e-3 * (rng_kick.standard_normal(bad.sum())
                           + 1j * rng_kick.standard_normal(bad.sum()))
            z[act[bad]] += kick * np.maximum(1.0, np.abs(z[act[bad]]))
            w[bad] = 0.0
        repul_idx = np.nonzero(state != 2)[0]
        diff = z[act][:, None] - z[repul_idx][None, :]
        self_mask = act[:, None] == repul_idx[None, :]
        with np.errstate(all="ignore"):
            inv = np.where(self_mask, 0.0, 1.0 / diff)
        s = inv.sum(axis=1)
        den = 1.0 - w * s
        step = np.where(np.abs(den) > 1e-300, -w / den, -w)
        step[bad] = 0.0
        z[act] += step
        moved = np.abs(step)
        scale_z = np.maximum(1.0, np.abs(z[act]))
        # converged: both the damped step and the raw Newton step are small
        # (a tiny damped step alone can be repulsion stagnation, not a root)
        conv = (moved <= opts.step_tol * scale_z) & (np.abs(w) <= 1e-6 * scale_z) & ~bad
        state[act[conv]] = 1
        out = np.abs(z[act]) > opts.infinity_threshold
        inf_streak[act[out]] += 1
        inf_streak[act[~out]] = 0
        gone = inf_streak[act] >= opts.infinity_sweeps
        state[act[gone]] = 2
    unresolved = int((state == 0).sum())
    return z, state, sweeps_done, unresolved


def _newton_polish(pencil, z: np.ndarray, steps: int, sigma: float) -> np.ndarray:
    z = z.copy()
    for _ in range(steps):
        if len(z) == 0:
            break
        deriv, _, _, _ = _derivative_sweep(pencil, z, sigma)
        with np.errstate(all="ignore"):
            w = 1.0 / deriv
        w[~np.isfinite(w)] = 0.0
        z = z - w
    return z


def _cluster(z: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    """Union of roots within relative distance tol; (mean, multiplicity) each."""
    m = len(z)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            lim = tol * max(1.0, abs(z[i]), abs(z[j]))
            if abs(z[i] - z[j]) <= lim:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return [(complex(np.mean(z[idx])), len(idx)) for idx in groups.values()]


def _finalize(pencil, finite_z, n_infinite, method, sigma, opts,
              iterations=0, restarts=0) -> CrossingSet:
    finite_z = _newton_polish(pencil, np.asarray(finite_z, dtype=complex),
                              opts.polish_steps, sigma)
    pts = []
    for lam, mult in _cluster(finite_z, opts.cluster_tol):
        rep = validation_report(pencil, lam)
        pts.append(CrossingPoint(
            lam=lam, multiplicity=mult, residual=rep.residual,
            iterations=iterations, method="refined" if mult > 1 else method,
            coincident=rep.coincident))
    pts.sort(key=lambda p: (p.lam.real, p.lam.imag))
    if n_infinite > 0:
        pts.append(CrossingPoint(lam=INFINITY, multiplicity=n_infinite,
                                 residual=None, iterations=iterations,
                                 method=method))
    return CrossingSet(points=tuple(pts), n=pencil.n, restarts=restarts)


def _deficit_diagnostics(cs: CrossingSet, opts: SolverOptions) -> str:
    bad = [p for p in cs.finite_points() if p.residual > opts.accept_tol]
    parts = [f"validated {cs.total_count - sum(p.multiplicity for p in bad)}"
             f" of {cs.degree} zeros ({cs.n_infinite} at infinity)"]
    for p in bad[:6]:
        parts.append(f"rejected {p.lam:.6g} residual {p.residual:.2e}")
    return "; ".join(parts)


def solve_crossings(pencil, options: SolverOptions | None = None,
                    sigma: float = 1.0) -> CrossingSet:
    """All crossings of the pencil by simultaneous root iteration.

    Returns the full degree n(n-1) counted with multiplicity, finite points
    validated below ``accept_tol`` plus any roots at infinity.  Restarts from
    a rotated, dilated spiral when a pass stalls or leaves unvalidated
    points; after ``restarts`` extra passes it raises CountDeficitError with
    diagnostics rather than padding or silently dropping.  ``sigma`` is the
    ensemble entry scale, forwarded to derivative evaluations.
    """
    opts = options or SolverOptions()
    n = pencil.n
    if n < 2:
        return CrossingSet(points=(), n=n)
    if not np.any(pencil.b):
        raise DegeneratePencilError("B = 0: crossings are not defined")
    failure = "no pass completed"
    for attempt in range(opts.restarts + 1):
        z, state, sweeps, unresolved = _aberth_pass(pencil, opts, sigma, attempt)
        if unresolved:
            failure = f"{unresolved} of {n * (n - 1)} iterates unresolved after {opts.max_iters} sweeps"
            continue
        cs = _finalize(pencil, z[state == 1], int((state == 2).sum()),
                       "aberth", sigma, opts, iterations=sweeps, restarts=attempt)
        ok = cs.complete() and all(
            p.residual <= opts.accept_tol for p in cs.finite_points())
        if ok:
            return cs
        failure = _deficit_diagnostics(cs, opts)
    raise CountDeficitError(
        f"after {opts.restarts + 1} passes: {failure}")


def _expected_infinite(b: np.ndarray) -> int:
    """Degree deficit of D from B's spectrum: eigenvalue clusters of size m
    contribute m(m-1) roots at infinity."""
    beta = np.linalg.eigvals(b)
    deficit = 0
    for _, mult in _cluster(beta, 1e-8):
        deficit += mult * (mult - 1)
    return deficit


def solve_crossings_interp(pencil, radius: float = 1.0,
                           options: SolverOptions | None = None,
                           sigma: float = 1.0) -> CrossingSet:
    """Crossings via trigonometric interpolation of D and companion roots.

    Samples log D at M points on |lambda| = radius (M the smallest power of
    two exceeding the degree, nodes offset half a step so the axes miss
    them), normalizes by the geometric mean of the magnitudes, recovers
    coefficients by FFT, and polishes the companion-matrix roots with a few
    Newton steps.  Raises DynamicRangeError when log|D| spans more than 600
    on the circle (change the radius, or use solve_crossings).  Frequencies
    above the known degree calibrate the roundoff floor; leading coefficients
    below that floor are treated as a degree deficit (roots at infinity).
    Intended for n <= 12; conditioning degrades beyond that.
    """
    opts = options or SolverOptions()
    n = pencil.n
    degree = n * (n - 1)
    if n < 2:
        return CrossingSet(points=(), n=n)
    if not np.any(pencil.b):
        raise DegeneratePencilError("B = 0: crossings are not defined")
    if n > 12:
        raise ValueError("interpolation solver is limited to n <= 12")
    m = 1
    while m <= degree:
        m *= 2
    nodes = radius * np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
    log_abs, phase, _ = _log_disc_many(pencil, nodes, sigma)
    if not np.all(np.isfinite(log_abs)):
        raise DynamicRangeError("discriminant vanishes on a sampling node")
    spread = float(log_abs.max() - log_abs.min())
    if spread > 600.0:
        raise DynamicRangeError(f"log|D| spread {spread:.0f} over the circle")
    shift = float(log_abs.mean())
    vals = np.exp(log_abs - shift + 1j * phase)
    b = np.fft.fft(vals) / m
    eta = np.exp(1j * np.pi / m)            # undo the half-step node offset
    k = np.arange(m)
    coeff = b / (radius**k * eta**k)
    mags = np.abs(b)                        # conditioning on the sampling circle
    # frequencies above the known degree are pure roundoff: they calibrate
    # the noise floor, and leading coefficients below it are genuinely zero
    # (a degenerate B direction, roots at infinity)
    noise = float(mags[degree + 1:].max()) if m > degree + 1 else 0.0
    floor = max(10.0 * noise, 1e-13 * float(mags.max()))
    top = degree
    while top > 0 and mags[top] <= floor:
        top -= 1
    if top == 0 and mags[0] <= floor:
        raise SolverError("all interpolated coefficients vanished")
    if top < degree - _expected_infinite(pencil.b):
        # the trimmed coefficients are not explained by B's spectrum being
        # degenerate: they drowned in roundoff, the answer would be wrong
        raise DynamicRangeError(
            f"leading coefficients {top + 1}..{degree} fell below the "
            f"roundoff floor (log|D| spread {spread:.0f}); reduce n or "
            f"change radius, or use solve_crossings")
    c = coeff[: top + 1]
    roots = np.roots(c[::-1])
    roots = _newton_polish(pencil, roots, 3, sigma)
    cs = _finalize(pencil, roots, degree - top, "interp", sigma, opts)
    if any(p.residual > opts.accept_tol for p in cs.finite_points()):
        raise CountDeficitError(
            "interpolated roots failed gap validation: " + _deficit_diagnostics(cs, opts))
    return cs
