"""Log-discriminant evaluation and its derivative field."""

import cmath
import math

import numpy as np
import pytest

from levelcross.ensembles import EnsembleSpec, Pencil, sample_pencil
from levelcross.pencil import (
    _derivative_sweep, eigenvalues_at, log_disc_derivative, log_discriminant,
    log_discriminant_decomposition, spectrum_at,
)


def _pencil(kind, n, seed, trial=0):
    return sample_pencil(EnsembleSpec(kind=kind, n=n), seed, trial)


def _direct_log_disc(pencil, lam):
    """Independent oracle: plain eigenvalue differences, no scaling."""
    xi = np.linalg.eigvals(pencil.at(lam))
    i, j = np.triu_indices(len(xi), 1)
    diffs = xi[i] - xi[j]
    return 2.0 * complex(np.sum(np.log(diffs)))


def test_eigenvalues_diag_pencil_exact():
    spec = EnsembleSpec(kind="complex-ginibre", n=3)
    p = Pencil(a=np.diag([1.0, 2.0, 3.0]), b=np.diag([1.0, -1.0, 0.5]),
               spec=spec)
    xi = np.sort_complex(eigenvalues_at(p, 2.0))
    assert np.allclose(xi, [0.0, 3.0, 4.0])


def test_log_discriminant_matches_direct():
    for seed in range(20):
        p = _pencil("complex-ginibre", 5, 200, seed)
        lam = complex(*np.random.default_rng(seed).normal(size=2))
        ld = log_discriminant(p, lam)
        want = _direct_log_disc(p, lam)
        assert math.isclose(ld.log_abs, want.real, rel_tol=0, abs_tol=1e-9)
        # phases agree mod 2 pi
        d = (ld.phase - want.imag) % (2.0 * math.pi)
        assert min(d, 2.0 * math.pi - d) < 1e-9


def test_log_discriminant_scaled_split():
    p = _pencil("gue", 6, 201)
    lam = 0.4 + 1.3j
    sigma = 1.0 / math.sqrt(6)
    parts = log_discriminant_decomposition(p, lam, sigma)
    total = parts["degree_term"] + parts["sphere_term"] + parts["pair_sum"]
    assert math.isclose(total, parts["log_abs"], rel_tol=0, abs_tol=1e-8)
    # zeta really is xi over the unit
    unit = sigma * math.sqrt(6 * (1.0 + abs(lam) ** 2))
    assert np.allclose(parts["zeta"] * unit, eigenvalues_at(p, lam))
    # and the scale convention cancels in log_abs
    assert math.isclose(parts["log_abs"], log_discriminant(p, lam).log_abs,
                        abs_tol=1e-9)


def test_log_discriminant_coincident_is_minus_inf():
    spec = EnsembleSpec(kind="complex-ginibre", n=2)
    p = Pencil(a=np.array([[1.0, 0.0], [0.0, 1.0]]), b=np.eye(2), spec=spec)
    assert log_discriminant(p, 0.5).log_abs == -math.inf


def test_spectrum_overlaps_are_unit_for_normal_matrices():
    # left and right eigenvectors coincide for Hermitian evaluations
    p = _pencil("gue", 5, 202)
    s = spectrum_at(p, 0.0)
    assert np.all(s.overlaps > 0.2)


def test_derivative_matches_central_difference():
    for kind, n in (("complex-ginibre", 4), ("goe", 5), ("gue", 6)):
        p = _pencil(kind, n, 203)
        lam = 0.8 + 0.6j
        d = log_disc_derivative(p, lam)
        h = 1e-6
        fx = (log_discriminant(p, lam + h).log_abs
              - log_discriminant(p, lam - h).log_abs) / (2 * h)
        fy = (log_discriminant(p, lam + 1j * h).log_abs
              - log_discriminant(p, lam - 1j * h).log_abs) / (2 * h)
        # d log|D| is the real part of the complex log-derivative
        want = complex(0.5 * fx, -0.5 * fy)
        assert abs(d - want) < 1e-4 * (1.0 + abs(want))


def test_derivative_has_pole_at_crossing():
    # sigma_z + lambda sigma_x crosses at +-i; the log-derivative blows up
    # like 2/(lambda - i) there (double zero of the discriminant)
    spec = EnsembleSpec(kind="real-ginibre", n=2)
    p = Pencil(a=np.diag([1.0, -1.0]),
               b=np.array([[0.0, 1.0], [1.0, 0.0]]), spec=spec)
    for eps in (1e-4, 1e-5, 1e-6):
        lam = 1j * (1.0 + eps)
        d = log_disc_derivative(p, lam)
        assert abs(d - 2.0 / (lam - 1j)) < 2e-3 * abs(d)


def test_derivative_sweep_matches_scalar():
    p = _pencil("complex-ginibre", 6, 204)
    lams = np.array([0.3 + 0.2j, -1.1 + 0.9j, 2.0 - 0.5j, 0.05j])
    deriv, log_abs, min_gap, min_ov = _derivative_sweep(p, lams)
    for k, lam in enumerate(lams):
        assert abs(deriv[k] - log_disc_derivative(p, lam)) < 1e-10
        ld = log_discriminant(p, lam)
        assert math.isclose(log_abs[k], ld.log_abs, abs_tol=1e-9)
        assert math.isclose(min_gap[k], ld.min_gap, rel_tol=1e-12)
    assert 0.0 < min_ov <= 1.0


def test_su2_transported_log_disc_is_consistent():
    # |Delta| transforms with the pencil: evaluating the rotated pencil at
    # the transported parameter keeps the normalized pair_sum (the
    # chart-free content) within roundoff
    from levelcross.geometry import mobius_param, random_su2
    from levelcross.solver import mobius_pencil

    p = _pencil("complex-ginibre", 4, 205)
    rng = np.random.default_rng(9)
    u, v = random_su2(rng)
    q = mobius_pencil(p, u, v)
    lam = 0.37 - 0.81j
    mu = mobius_param(u, v, lam)
    a = log_discriminant(p, lam)
    b = log_discriminant(q, mu)
    assert math.isclose(a.pair_sum, b.pair_sum, rel_tol=0, abs_tol=1e-7)
