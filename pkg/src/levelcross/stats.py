"""Empirical measures and the functionals the limit theorems quantify.

The crossing set of one pencil is a point measure on the sphere; over many
trials these aggregate into an EmpiricalMeasure.  The per-spectrum
functionals here (pair log-energy, small-gap and tail sums, test-function
discrepancies) are the quantities whose convergence or smallness the limit
statements require, each evaluated on normalized eigenvalue clouds
zeta_k = xi_k / sqrt(n (1+|lambda|^2)).

Monte Carlo estimators aggregate with compensated summation in a fixed trial
order, so reported digits do not depend on scheduling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.optimize

from .ensembles import EnsembleSpec, sample
from .geometry import SpherePoint, dist_to_rp1, is_infinite, sphere_y, to_sphere
from .pencil import _log_disc_from_xi

__all__ = [
    "EmpiricalMeasure", "TestFunction", "HnProfile",
    "ks_statistic", "pair_log_energy", "sr_functional", "small_gap_count",
    "lt_functional", "ucl_discrepancy", "default_test_functions",
    "un_estimator", "hn_profile", "near_real_count", "exactly_real_count",
    "matched_q_representatives",
]


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted sphere points: crossings aggregated over trials."""

    samples: tuple[SpherePoint, ...]
    weights: tuple[int, ...]

    def __post_init__(self):
        if len(self.samples) != len(self.weights):
            raise ValueError("samples and weights must align")
        if any(w < 1 for w in self.weights):
            raise ValueError("weights must be positive integers")

    @property
    def total_weight(self) -> int:
        return sum(self.weights)

    @classmethod
    def from_crossing_sets(cls, crossing_sets) -> "EmpiricalMeasure":
        pts, ws = [], []
        for cs in crossing_sets:
            for p in cs.points:
                pts.append(p.sphere)
                ws.append(p.multiplicity)
        return cls(samples=tuple(pts), weights=tuple(ws))

    def _expanded(self, getter) -> np.ndarray:
        vals = []
        for p, w in zip(self.samples, self.weights):
            vals.extend([getter(p)] * w)
        return np.asarray(vals, dtype=float)

    def z_values(self) -> np.ndarray:
        return self._expanded(lambda p: p.z)

    def y_values(self) -> np.ndarray:
        return self._expanded(lambda p: p.y)

    def phi_values(self) -> np.ndarray:
        return self._expanded(lambda p: p.phi)


def ks_statistic(samples: Sequence[float], cdf: Callable[[float], float]) -> float:
    """sup |empirical CDF - cdf| over the sample points (both one-sided gaps)."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = len(x)
    if m < 2:
        raise ValueError("need at least 2 samples")
    f = np.asarray([cdf(v) for v in x], dtype=float)
    i = np.arange(1, m + 1)
    d_plus = float(np.max(i / m - f))
    d_minus = float(np.max(f - (i - 1) / m))
    return max(d_plus, d_minus, 0.0)


def _pair_distances(eigs: np.ndarray):
    n = len(eigs)
    i, j = np.triu_indices(n, 1)
    return np.abs(eigs[i] - eigs[j])


def pair_log_energy(eigs: Sequence[complex]) -> float:
    """(2/(n(n-1))) sum_{i<j} log|z_i - z_j|; -inf when points coincide."""
    eigs = np.asarray(eigs, dtype=complex)
    n = len(eigs)
    if n < 2:
        raise ValueError("need at least 2 points")
    d = _pair_distances(eigs)
    if np.any(d == 0.0):
        return -math.inf
    return 2.0 * float(np.sum(np.log(d))) / (n * (n - 1))


def sr_functional(eigs: Sequence[complex], eps: float) -> float:
    """Small-gap log mass: (1/n(n-1)) sum over ordered pairs within eps of
    |log distance|."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    eigs = np.asarray(eigs, dtype=complex)
    n = len(eigs)
    d = _pair_distances(eigs)
    close = d[(d <= eps)]
    if len(close) == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        vals = np.abs(np.log(close))
    # ordered pairs: each unordered pair twice
    return 2.0 * float(np.sum(vals)) / (n * (n - 1))


def small_gap_count(eigs: Sequence[complex], r: float, big_r: float) -> float:
    """Normalized count of ordered pairs inside radius big_r at distance <= r."""
    if not (0.0 < r < 1.0 < big_r):
        raise ValueError("need 0 < r < 1 < R")
    eigs = np.asarray(eigs, dtype=complex)
    n = len(eigs)
    inside = np.abs(eigs) <= big_r
    i, j = np.triu_indices(n, 1)
    hit = inside[i] & inside[j] & (np.abs(eigs[i] - eigs[j]) <= r)
    return 2.0 * float(np.sum(hit)) / (n * (n - 1))


def lt_functional(eigs: Sequence[complex], big_r: float) -> float:
    """Tail mass of the pair measure: mean over ordered pairs with
    max(|z|,|w|) > R of log(2 + |z| + |w|)."""
    if big_r <= 1.0:
        raise ValueError("R must exceed 1")
    eigs = np.asarray(eigs, dtype=complex)
    n = len(eigs)
    a = np.abs(eigs)
    i, j = np.triu_indices(n, 1)
    outside = np.maximum(a[i], a[j]) > big_r
    if not np.any(outside):
        return 0.0
    vals = np.log(2.0 + a[i][outside] + a[j][outside])
    return 2.0 * float(np.sum(vals)) / (n * (n - 1))


@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    circ_integral: float


@lru_cache(maxsize=1)
def _bump_circ_integral() -> float:
    # (1/pi) * integral of the radius-1/2 mollifier over the unit disk
    def f(r):
        u = 4.0 * r * r
        return math.exp(1.0 - 1.0 / (1.0 - u)) * 2.0 * r if u < 1.0 else 0.0

    val, err = scipy.integrate.quad(f, 0.0, 0.5, epsabs=1e-12)
    return val


def _bump(z: np.ndarray) -> np.ndarray:
    u = 4.0 * np.abs(z) ** 2
    out = np.zeros_like(u, dtype=float)
    ok = u < 1.0
    out[ok] = np.exp(1.0 - 1.0 / (1.0 - u[ok]))
    return out


def default_test_functions() -> list[TestFunction]:
    """The fixed dictionary for circular-law discrepancies: moments up to
    degree 2 plus one smooth bump localized at the origin."""
    return [
        TestFunction("one", lambda z: np.ones(np.shape(z)), 1.0),
        TestFunction("re", lambda z: np.real(z), 0.0),
        TestFunction("im", lambda z: np.imag(z), 0.0),
        TestFunction("abs2", lambda z: np.abs(z) ** 2, 0.5),
        TestFunction("re2", lambda z: np.real(z**2), 0.0),
        TestFunction("im2", lambda z: np.imag(z**2), 0.0),
        TestFunction("bump", _bump, _bump_circ_integral()),
    ]


def ucl_discrepancy(eigs: Sequence[complex],
                    test_fns: Sequence[TestFunction] | None = None) -> float:
    """max over the dictionary of |mean f(points) - circular-law integral|."""
    eigs = np.asarray(eigs, dtype=complex)
    fns = default_test_functions() if test_fns is None else list(test_fns)
    worst = 0.0
    for tf in fns:
        emp = float(np.mean(np.real(tf.fn(eigs))))
        worst = max(worst, abs(emp - tf.circ_integral))
    return worst


def _normalized_log_disc(a, b, lam: complex) -> float:
    xi = np.linalg.eigvals(a + lam * b)
    n = len(xi)
    ld = _log_disc_from_xi(xi, lam, 1.0)
    return ld.log_abs / (n * (n - 1))


def un_estimator(spec: EnsembleSpec, lam: complex, trials: int, rng) -> tuple[float, float]:
    """Monte Carlo E[(1/n(n-1)) log|D(lam)|] with standard error.

    Degenerate samples (non-finite log-discriminant, an exact coincidence)
    are discarded and counted; more than 1% discards raises.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    vals = []
    discarded = 0
    for _ in range(trials):
        a = sample(spec, rng)
        b = sample(spec, rng)
        v = _normalized_log_disc(a, b, lam)
        if math.isfinite(v):
            vals.append(v)
        else:
            discarded += 1
    if discarded > 0.01 * trials:
        raise RuntimeError(f"{discarded}/{trials} degenerate samples discarded")
    m = len(vals)
    mean = math.fsum(vals) / m
    var = math.fsum((v - mean) ** 2 for v in vals) / (m - 1)
    return mean, math.sqrt(var / m)


def matched_q_representatives(q: float) -> tuple[complex, complex]:
    """Two lambdas with the same pseudocovariance modulus squared q.

    Primary: on the imaginary axis, lambda = i t with ((1-t^2)/(1+t^2))^2 = q.
    Secondary: on the ray angle 3pi/8, radius in (0,1] solved numerically.
    (A flatter ray cannot represent small q: along angle theta the reachable
    minimum is cos^2 theta, so the pi/4 ray stops at q = 1/2; 3pi/8 reaches
    q ~ 0.147.)
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly inside (0, 1)")
    s = math.sqrt(q)
    t = math.sqrt((1.0 - s) / (1.0 + s))
    primary = complex(0.0, t)
    theta = 3.0 * math.pi / 8.0
    qmin = math.cos(theta) ** 2
    if q < qmin + 1e-9:
        raise ValueError(f"secondary ray cannot represent q={q} (minimum {qmin:.4f})")
    cos2t = math.cos(2.0 * theta)

    def qr(r: float) -> float:
        r2 = r * r
        return (1.0 + 2.0 * r2 * cos2t + r2 * r2) / (1.0 + r2) ** 2 - q

    r = scipy.optimize.brentq(qr, 1e-9, 1.0, xtol=1e-14)
    secondary = r * complex(math.cos(theta), math.sin(theta))
    return primary, secondary


@dataclass
class HnProfile:
    """Rows of the pseudocovariance profile H_n(q) = U_n(lambda(q)) -
    (1/2) log(1+|lambda(q)|^2), with a matched-q structure check.

    CSV header: q,hn,stderr,hn_alt,stderr_alt,discrepancy,combined_se
    """

    q: np.ndarray
    hn: np.ndarray
    stderr: np.ndarray
    hn_alt: np.ndarray
    stderr_alt: np.ndarray

    @property
    def discrepancy(self) -> np.ndarray:
        return np.abs(self.hn - self.hn_alt)

    @property
    def combined_se(self) -> np.ndarray:
        return np.sqrt(self.stderr**2 + self.stderr_alt**2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "hn", "stderr", "hn_alt", "stderr_alt",
                        "discrepancy", "combined_se"])
            for k in range(len(self.q)):
                w.writerow([repr(float(v)) for v in
                            (self.q[k], self.hn[k], self.stderr[k],
                             self.hn_alt[k], self.stderr_alt[k],
                             self.discrepancy[k], self.combined_se[k])])


def hn_profile(spec: EnsembleSpec, q_grid: Sequence[float], trials: int, rng) -> HnProfile:
    """H_n over a q-grid, evaluated at two matched-q representatives on
    common random pencils (the same draws across all grid points), so the
    discrepancy column isolates the structural claim that U_n depends on
    lambda only through q."""
    q_grid = np.asarray(q_grid, dtype=float)
    pencils = [(sample(spec, rng), sample(spec, rng)) for _ in range(trials)]
    hn = np.empty(len(q_grid))
    se = np.empty(len(q_grid))
    hn2 = np.empty(len(q_grid))
    se2 = np.empty(len(q_grid))
    for k, q in enumerate(q_grid):
        for which, lam in enumerate(matched_q_representatives(q)):
            correction = 0.5 * math.log1p(abs(lam) ** 2)
            vals = []
            for a, b in pencils:
                v = _normalized_log_disc(a, b, lam)
                if math.isfinite(v):
                    vals.append(v - correction)
            if len(vals) < 2:
                raise RuntimeError("all samples degenerate")
            m = math.fsum(vals) / len(vals)
            s = math.sqrt(math.fsum((v - m) ** 2 for v in vals)
                          / (len(vals) - 1) / len(vals))
            if which == 0:
                hn[k], se[k] = m, s
            else:
                hn2[k], se2[k] = m, s
    return HnProfile(q=q_grid, hn=hn, stderr=se, hn_alt=hn2, stderr_alt=se2)


def near_real_count(crossings, eps: float) -> int:
    """Crossings (with multiplicity) within sphere distance eps of the real
    circle; the point at infinity lies on that circle."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    count = 0
    for p in crossings.points:
        if dist_to_rp1(p.lam) < eps:
            count += p.multiplicity
    return count


def exactly_real_count(crossings, tol: float = 1e-8) -> int:
    """Crossings pinned to the real circle: within the chart-unbiased band
    |Im lambda| < tol (1+|lambda|^2) and without a distinct conjugate
    partner in the set.  A conjugate pair straddling the axis is two
    distinct points exchanging under conjugation and is not counted; an
    isolated real crossing has no such partner and is."""
    cands = [p for p in crossings.points
             if is_infinite(p.lam) or abs(sphere_y(p.lam)) < 2.0 * tol]
    count = 0
    for p in cands:
        if is_infinite(p.lam):
            count += p.multiplicity     # infinity is a real point
            continue
        band = tol * (1.0 + abs(p.lam) ** 2)
        partner = any(
            q is not p and not is_infinite(q.lam)
            and abs(q.lam - p.lam.conjugate()) <= 3.0 * band
            and abs(q.lam - p.lam) > 3.0 * band
            for q in cands)
        if not partner:
            count += p.multiplicity
    return count
