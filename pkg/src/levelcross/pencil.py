"""Pencil spectra and the discriminant of the characteristic polynomial.

For C(lambda) = A + lambda B with eigenvalues xi_1..xi_n, the discriminant

    D(lambda) = prod_{i<j} (xi_i - xi_j)^2

is a polynomial in lambda of degree n(n-1) with leading coefficient equal to
the discriminant of det(xI - B); its zeros are the crossing points.  Working
with log D avoids overflow: degree grows quadratically and entry scales like
sqrt(n) push |D| past 1e300 already for moderate n.

Everything here evaluates at a point.  The scaled form uses normalized
eigenvalues zeta_i = xi_i / (sigma sqrt(n (1 + |lambda|^2))), which keeps the
pairwise-sum term O(n^2) with O(1) summands; the identity

    log D = n(n-1) [ log sigma + (log n)/2 + log(1+|lambda|^2)/2 ]
            + 2 sum_{i<j} log |zeta_i - zeta_j|   (+ phase)

is exact, not asymptotic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NearDefectiveError", "SpectrumAt", "LogDisc",
    "eigenvalues_at", "spectrum_at", "log_discriminant",
    "log_discriminant_decomposition", "log_disc_derivative",
]

OVERLAP_FLOOR = 1e-8     # below this, eigenvector pairing is unreliable
FD_STEP = 1e-6           # central-difference fallback step
NEAR_CROSSING_GAP = 1e-3  # relative gap below which small overlap means "at a root"


class NearDefectiveError(RuntimeError):
    """Eigenvector basis too ill-conditioned for perturbation formulas."""


@dataclass(frozen=True)
class SpectrumAt:
    """Eigen-decomposition of C(lambda) = A + lambda B at one point.

    ``right`` has unit columns; ``left_rows`` holds the rows of the inverse of
    ``right``, so left_rows @ right = I and row i is a left eigenvector for
    xi_i.  ``overlaps`` are 1/||row_i||, the eigenvector condition measures
    (1 for a normal matrix, -> 0 when two eigenvectors coalesce).
    """

    lam: complex
    xi: np.ndarray
    right: np.ndarray
    left_rows: np.ndarray
    overlaps: np.ndarray

    @property
    def n(self) -> int:
        return len(self.xi)

    def min_gap(self) -> float:
        d = np.abs(self.xi[:, None] - self.xi[None, :])
        d[np.diag_indices(len(self.xi))] = np.inf
        return float(d.min())


@dataclass(frozen=True)
class LogDisc:
    """log D(lambda) split as magnitude + phase, with the scaled pair sum.

    value = log_abs + 1j*phase exactly; ``pair_sum`` is the zeta pairwise sum
    of the scaled decomposition and ``prefactor`` the remaining exact terms,
    so log_abs = prefactor + pair_sum.
    """

    lam: complex
    log_abs: float
    phase: float
    pair_sum: float
    prefactor: float
    min_gap: float

    @property
    def value(self) -> complex:
        return complex(self.log_abs, self.phase)


def eigenvalues_at(pencil, lam: complex) -> np.ndarray:
    """Eigenvalues of A + lambda B (unordered)."""
    return np.linalg.eigvals(pencil.at(lam))


def spectrum_at(pencil, lam: complex) -> SpectrumAt:
    """Full spectral data at lambda; right eigenvectors plus inverse rows."""
    c = pencil.at(lam)
    xi, u = np.linalg.eig(c)
    try:
        rows = np.linalg.inv(u)
    except np.linalg.LinAlgError as exc:
        raise NearDefectiveError(f"singular eigenvector matrix at {lam}") from exc
    overlaps = 1.0 / np.linalg.norm(rows, axis=1)
    return SpectrumAt(lam=lam, xi=xi, right=u, left_rows=rows, overlaps=overlaps)


def _pairwise_terms(xi: np.ndarray):
    n = len(xi)
    i, j = np.triu_indices(n, 1)
    return xi[i] - xi[j]


def log_discriminant(pencil, lam: complex, sigma: float = 1.0) -> LogDisc:
    """log D at one point, via the scaled eigenvalue decomposition.

    ``sigma`` is the entry scale of the ensemble (enters only the split
    between prefactor and pair sum, not the total).  Phase is reported in
    (-pi, pi] per pair and summed, i.e. a specific branch of the log.
    """
    xi = eigenvalues_at(pencil, lam)
    return _log_disc_from_xi(xi, lam, sigma)


def _log_disc_from_xi(xi: np.ndarray, lam: complex, sigma: float) -> LogDisc:
    n = len(xi)
    if n < 2:
        return LogDisc(lam=lam, log_abs=0.0, phase=0.0, pair_sum=0.0,
                       prefactor=0.0, min_gap=math.inf)
    unit = sigma * math.sqrt(n * (1.0 + abs(lam) ** 2))
    diffs = _pairwise_terms(xi)
    agap = np.abs(diffs)
    min_gap = float(agap.min())
    if min_gap == 0.0:
        return LogDisc(lam=lam, log_abs=-math.inf, phase=0.0, pair_sum=-math.inf,
                       prefactor=n * (n - 1) * math.log(unit), min_gap=0.0)
    pair_sum = 2.0 * float(np.sum(np.log(agap / unit)))
    prefactor = n * (n - 1) * math.log(unit)
    phase = 2.0 * float(np.sum(np.angle(diffs)))
    return LogDisc(lam=lam, log_abs=prefactor + pair_sum, phase=phase,
                   pair_sum=pair_sum, prefactor=prefactor, min_gap=min_gap)


def log_discriminant_decomposition(pencil, lam: complex, sigma: float = 1.0) -> dict:
    """The exact terms of the scaled split, as a dict for inspection.

    Keys: ``degree_term`` = n(n-1)(log sigma + log(n)/2), ``sphere_term`` =
    n(n-1) log(1+|lambda|^2)/2, ``pair_sum``, ``log_abs`` (their sum), and
    ``zeta`` (the normalized eigenvalues).
    """
    xi = eigenvalues_at(pencil, lam)
    n = len(xi)
    unit = sigma * math.sqrt(n * (1.0 + abs(lam) ** 2))
    zeta = xi / unit
    ld = _log_disc_from_xi(xi, lam, sigma)
    degree_term = n * (n - 1) * (math.log(sigma) + 0.5 * math.log(n))
    sphere_term = n * (n - 1) * 0.5 * math.log1p(abs(lam) ** 2)
    return {
        "degree_term": degree_term,
        "sphere_term": sphere_term,
        "pair_sum": ld.pair_sum,
        "log_abs": ld.log_abs,
        "zeta": zeta,
    }


def _xi_derivatives(spec: SpectrumAt, b: np.ndarray) -> np.ndarray:
    # first-order perturbation: xi_i' = (v_i* B u_i) / (v_i* u_i); with
    # left_rows = inv(right) the denominators are exactly 1
    return np.einsum("ij,jk,ki->i", spec.left_rows, b, spec.right)


def log_disc_derivative(pencil, lam: complex, sigma: float = 1.0,
                        allow_fd: bool = True) -> tuple[complex, LogDisc]:
    """d/dlambda log D at lambda, with the LogDisc evaluated there.

    Uses eigenvalue perturbation: (log D)' = 2 sum_{i<j} (xi_i' - xi_j') /
    (xi_i - xi_j).  A tiny eigenvector overlap *at a crossing* is expected
    (the matrix is defective there) and the formula stays accurate, the
    colliding pair dominating as 1/(lam - root).  A tiny overlap with all
    gaps open means a genuinely ill-conditioned basis; there a central
    finite difference of log D is used instead when ``allow_fd``, else
    NearDefectiveError is raised.
    """
    try:
        spec = spectrum_at(pencil, lam)
    except NearDefectiveError:
        if not allow_fd:
            raise
        return _fd_derivative(pencil, lam, sigma), log_discriminant(pencil, lam, sigma)
    ld = _log_disc_from_xi(spec.xi, lam, sigma)
    unit = sigma * math.sqrt(spec.n * (1.0 + abs(lam) ** 2))
    away_from_roots = ld.min_gap > NEAR_CROSSING_GAP * unit
    if float(spec.overlaps.min()) < OVERLAP_FLOOR and away_from_roots:
        if not allow_fd:
            raise NearDefectiveError(
                f"eigenvector overlap {spec.overlaps.min():.2e} below {OVERLAP_FLOOR}")
        return _fd_derivative(pencil, lam, sigma), ld
    dxi = _xi_derivatives(spec, pencil.b)
    i, j = np.triu_indices(spec.n, 1)
    num = dxi[i] - dxi[j]
    den = spec.xi[i] - spec.xi[j]
    if np.any(den == 0):
        return complex(np.inf, 0.0), ld
    deriv = 2.0 * complex(np.sum(num / den))
    return deriv, ld


def _fd_derivative(pencil, lam: complex, sigma: float, h: float = FD_STEP) -> complex:
    # central difference on log_abs and (unwrapped) phase separately
    scale = max(1.0, abs(lam))
    step = h * scale
    vals = []
    for d in (step, 1j * step):
        p = log_discriminant(pencil, lam + d, sigma)
        m = log_discriminant(pencil, lam - d, sigma)
        dre = (p.log_abs - m.log_abs)
        dph = _wrap_phase(p.phase - m.phase)
        vals.append(complex(dre, dph) / (2.0 * step))
    # analytic f: f'(z) = f_x = -i f_y; average the two estimates
    fx, fy = vals
    return 0.5 * (fx - 1j * fy)


def _wrap_phase(d: float) -> float:
    return (d + math.pi) % (2.0 * math.pi) - math.pi


# --- batched helpers used by the crossing solvers ---------------------------

def _eigvals_many(pencil, lams: np.ndarray) -> np.ndarray:
    """Eigenvalues at many lambdas at once; shape (len(lams), n)."""
    mats = pencil.a[None, :, :] + lams[:, None, None] * pencil.b[None, :, :]
    return np.linalg.eigvals(mats)


def _log_disc_many(pencil, lams: np.ndarray, sigma: float = 1.0):
    """(log_abs, phase, min_gap) arrays for many lambdas; same branch rules
    as log_discriminant."""
    xs = _eigvals_many(pencil, np.asarray(lams, dtype=complex))
    m, n = xs.shape
    i, j = np.triu_indices(n, 1)
    diffs = xs[:, i] - xs[:, j]
    agap = np.abs(diffs)
    min_gap = agap.min(axis=1)
    with np.errstate(divide="ignore"):
        log_abs = (2.0 * np.sum(np.log(agap), axis=1))
    phase = 2.0 * np.sum(np.angle(diffs), axis=1)
    return log_abs, phase, min_gap


def _derivative_sweep(pencil, lams: np.ndarray, sigma: float = 1.0):
    """Batched (log D)'/1 and diagnostics for the root iterations.

    Returns (deriv, log_abs, min_gap, min_overlap) arrays.  Points whose
    eigenvector basis dips below the overlap floor fall back to a central
    difference individually.
    """
    lams = np.asarray(lams, dtype=complex)
    mats = pencil.a[None, :, :] + lams[:, None, None] * pencil.b[None, :, :]
    xi, u = np.linalg.eig(mats)
    m, n = xi.shape
    try:
        rows = np.linalg.inv(u)
        bad_inv = ~np.all(np.isfinite(rows), axis=(1, 2))
    except np.linalg.LinAlgError:
        rows = np.empty_like(u)
        bad_inv = np.zeros(m, dtype=bool)
        for k in range(m):
            try:
                rows[k] = np.linalg.inv(u[k])
            except np.linalg.LinAlgError:
                rows[k] = np.nan
                bad_inv[k] = True
    with np.errstate(all="ignore"):
        overlaps = 1.0 / np.linalg.norm(rows, axis=2)
    min_overlap = np.where(bad_inv, 0.0, np.nan_to_num(overlaps, nan=0.0).min(axis=1))
    dxi = np.einsum("mij,jk,mki->mi", rows, pencil.b, u)
    i, j = np.triu_indices(n, 1)
    diffs = xi[:, i] - xi[:, j]
    agap = np.abs(diffs)
    min_gap = agap.min(axis=1)
    with np.errstate(all="ignore"):
        deriv = 2.0 * np.sum((dxi[:, i] - dxi[:, j]) / diffs, axis=1)
        log_abs = 2.0 * np.sum(np.log(agap), axis=1)
    # FD only where the basis is bad *away* from any crossing; at small gaps
    # the perturbation sum is dominated by the colliding pair and stays sound
    unit = sigma * np.sqrt(n * (1.0 + np.abs(lams) ** 2))
    needs_fd = (min_overlap < OVERLAP_FLOOR) & (min_gap > NEAR_CROSSING_GAP * unit)
    for k in np.nonzero(needs_fd)[0]:
        deriv[k] = _fd_derivative(pencil, complex(lams[k]), sigma)
    return deriv, log_abs, min_gap, min_overlap
