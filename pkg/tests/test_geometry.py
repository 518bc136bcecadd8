"""Sphere chart, pseudocovariance, and SU(2) action identities."""

import cmath
import math

import numpy as np
import pytest

from levelcross.geometry import (
    INFINITY, SpherePoint, chordal_distance, compose_su2, dist_to_rp1,
    from_sphere, is_infinite, mobius_param, q_of_lambda, random_su2,
    sphere_distance, sphere_y, tau, to_sphere,
)


def _random_lambdas(seed, count, spread=3.0):
    rng = np.random.default_rng(seed)
    re = rng.standard_normal(count) * spread
    im = rng.standard_normal(count) * spread
    return [complex(a, b) for a, b in zip(re, im)]


def test_landmarks():
    assert to_sphere(0.0) == SpherePoint(0.0, 0.0, -1.0)
    assert to_sphere(INFINITY) == SpherePoint(0.0, 0.0, 1.0)
    assert to_sphere(1.0) == SpherePoint(1.0, 0.0, 0.0)
    p = to_sphere(1j)
    assert p.y == 1.0 and p.x == 0.0 and p.z == 0.0


def test_sphere_point_validates_norm():
    with pytest.raises(ValueError):
        SpherePoint(0.5, 0.5, 0.5)


def test_cylinder_coordinates():
    p = to_sphere(1j)
    assert math.isclose(p.phi, math.pi / 2.0)
    assert p.zc == p.z
    assert to_sphere(1.0).phi == 0.0


def test_round_trip_plane():
    for lam in _random_lambdas(0, 300):
        back = from_sphere(to_sphere(lam))
        assert abs(back - lam) <= 1e-12 * (1.0 + abs(lam))


def test_round_trip_huge_modulus():
    for lam in (1e6 + 2e6j, -3e7j, 5e5 - 1e6j):
        back = from_sphere(to_sphere(lam))
        assert abs(back - lam) <= 1e-9 * abs(lam)
    assert is_infinite(from_sphere(to_sphere(INFINITY)))


def test_sphere_y_values():
    assert sphere_y(1j) == 1.0
    assert sphere_y(-1j) == -1.0
    assert sphere_y(INFINITY) == 0.0
    assert sphere_y(3.7) == 0.0
    for lam in _random_lambdas(1, 100):
        assert math.isclose(sphere_y(lam), to_sphere(lam).y, abs_tol=1e-15)


def test_tau_landmarks():
    assert tau(0.0) == 1.0
    assert tau(INFINITY) == 1.0
    assert abs(tau(1j)) == 0.0
    # |tau| = 1 exactly on the real line
    for x in (-2.0, 0.3, 10.0):
        assert math.isclose(abs(tau(x)), 1.0, rel_tol=1e-15)


def test_q_equals_one_minus_y_squared():
    for lam in _random_lambdas(2, 300):
        y = sphere_y(lam)
        assert math.isclose(q_of_lambda(lam), 1.0 - y * y, abs_tol=1e-14)


def test_dist_to_rp1():
    assert dist_to_rp1(1j) == pytest.approx(math.pi / 2.0)
    assert dist_to_rp1(4.2) == 0.0
    assert dist_to_rp1(INFINITY) == 0.0
    for lam in _random_lambdas(3, 100):
        assert math.isclose(dist_to_rp1(lam), math.asin(abs(sphere_y(lam))),
                            abs_tol=1e-15)


def test_chordal_distance_matches_embedding():
    for lam, mu in zip(_random_lambdas(4, 100), _random_lambdas(5, 100)):
        p, q = to_sphere(lam), to_sphere(mu)
        emb = math.sqrt((p.x - q.x) ** 2 + (p.y - q.y) ** 2
                        + (p.z - q.z) ** 2)
        assert math.isclose(chordal_distance(lam, mu), emb, abs_tol=1e-12)
    assert chordal_distance(INFINITY, INFINITY) == 0.0
    assert chordal_distance(0.0, INFINITY) == 2.0


def test_sphere_distance_antipodes():
    assert sphere_distance(0.0, INFINITY) == pytest.approx(math.pi)
    assert sphere_distance(1j, -1j) == pytest.approx(math.pi)


def test_mobius_param_is_isometry():
    rng = np.random.default_rng(6)
    lams = _random_lambdas(7, 50) + [INFINITY, 0.0]
    for _ in range(50):
        u, v = random_su2(rng)
        for lam, mu in zip(lams, lams[1:]):
            d0 = chordal_distance(lam, mu)
            d1 = chordal_distance(mobius_param(u, v, lam),
                                  mobius_param(u, v, mu))
            assert math.isclose(d0, d1, abs_tol=1e-10)


def test_mobius_param_composition():
    rng = np.random.default_rng(8)
    for _ in range(50):
        g1 = random_su2(rng)
        g2 = random_su2(rng)
        g21 = compose_su2(g1, g2)
        for lam in (_random_lambdas(9, 5) + [INFINITY]):
            two_step = mobius_param(*g2, mobius_param(*g1, lam))
            one_step = mobius_param(*g21, lam)
            assert chordal_distance(two_step, one_step) < 1e-10


def test_mobius_param_identity_and_pole():
    assert mobius_param(1.0, 0.0, 2.5 + 1j) == 2.5 + 1j
    # u=0, v=1 sends lam -> -1/lam (antipodal map on the sphere)
    assert is_infinite(mobius_param(0.0, 1.0, 0.0))
    assert mobius_param(0.0, 1.0, INFINITY) == 0.0
    for lam in _random_lambdas(10, 20):
        assert abs(mobius_param(0.0, 1.0, lam) - (-1.0 / lam)) < 1e-12


def test_mobius_param_rejects_non_unit():
    with pytest.raises(ValueError):
        mobius_param(1.0, 1.0, 0.5)


def test_random_su2_haar_column():
    rng = np.random.default_rng(11)
    pairs = [random_su2(rng) for _ in range(4000)]
    for u, v in pairs[:100]:
        assert abs(abs(u) ** 2 + abs(v) ** 2 - 1.0) < 1e-12
    # |u|^2 of a Haar column is Uniform[0,1]; crude moment check
    m = float(np.mean([abs(u) ** 2 for u, _ in pairs]))
    assert abs(m - 0.5) < 0.03
