"""Sampler structure, moments, and stream reproducibility."""

import math

import numpy as np
import pytest

from levelcross.ensembles import (
    EnsembleSpec, Pencil, declared_moments, entry_scale, moment_self_test,
    sample, sample_pencil, trial_stream,
)


def test_trial_stream_reproducible():
    a = trial_stream(42, 7).standard_normal(16)
    b = trial_stream(42, 7).standard_normal(16)
    assert np.array_equal(a, b)
    c = trial_stream(42, 8).standard_normal(16)
    d = trial_stream(43, 7).standard_normal(16)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_trial_stream_validates_range():
    with pytest.raises(ValueError):
        trial_stream(-1, 0)
    with pytest.raises(ValueError):
        trial_stream(0, 2**64)
    trial_stream(2**64 - 1, 2**64 - 1)  # extremes are fine


def test_spec_validation_errors():
    with pytest.raises(ValueError):
        EnsembleSpec(kind="circular", n=4).validate()
    with pytest.raises(ValueError):
        EnsembleSpec(kind="goe", n=0).validate()
    with pytest.raises(ValueError):
        EnsembleSpec(kind="wigner", n=4, nu="poisson").validate()
    with pytest.raises(ValueError):
        EnsembleSpec(kind="subspace", n=4).validate()
    with pytest.raises(ValueError):
        EnsembleSpec(kind="subspace", n=4, subspace_kind="band").validate()
    EnsembleSpec(kind="subspace", n=4, subspace_kind="band",
                 band_width=1).validate()


def test_symmetry_classes():
    rng = trial_stream(0, 0)
    goe = sample(EnsembleSpec(kind="goe", n=6), rng)
    assert np.array_equal(goe, goe.T)
    assert goe.dtype == float

    gue = sample(EnsembleSpec(kind="gue", n=6), rng)
    assert np.allclose(gue, gue.conj().T)

    wig = sample(EnsembleSpec(kind="wigner", n=6, nu="rademacher"), rng)
    assert np.allclose(wig, wig.conj().T)

    sym = sample(EnsembleSpec(kind="subspace", n=6,
                              subspace_kind="complex-symmetric"), rng)
    assert np.allclose(sym, sym.T)
    assert not np.allclose(sym, sym.conj().T)


def test_toeplitz_and_band_structure():
    rng = trial_stream(0, 1)
    t = sample(EnsembleSpec(kind="subspace", n=6, subspace_kind="toeplitz"),
               rng)
    for off in range(-5, 6):
        d = np.diagonal(t, off)
        assert np.allclose(d, d[0])

    b = sample(EnsembleSpec(kind="subspace", n=6, subspace_kind="band",
                            band_width=1), rng)
    idx = np.arange(6)
    far = np.abs(idx[None, :] - idx[:, None]) > 1
    assert np.all(b[far] == 0)
    assert np.all(b[~far] != 0)

    bt = sample(EnsembleSpec(kind="subspace", n=6,
                             subspace_kind="band-toeplitz", band_width=2),
                rng)
    assert np.all(np.diagonal(bt, 3) == 0)
    assert np.allclose(np.diagonal(bt, 2), np.diagonal(bt, 2)[0])

    dg = sample(EnsembleSpec(kind="subspace", n=6, subspace_kind="diagonal"),
                rng)
    assert np.all(dg[~np.eye(6, dtype=bool)] == 0)


def test_rademacher_and_uniform_supports():
    rng = trial_stream(0, 2)
    r = sample(EnsembleSpec(kind="real-ginibre", n=8,
                            entry_law="rademacher"), rng)
    assert set(np.unique(r)) <= {-1.0, 1.0}
    u = sample(EnsembleSpec(kind="real-ginibre", n=8, entry_law="uniform"),
               rng)
    assert np.all(np.abs(u) <= math.sqrt(3.0))
    w = sample(EnsembleSpec(kind="wigner", n=8, nu="rademacher"), rng)
    off = w[np.triu_indices(8, 1)] * math.sqrt(8)
    assert np.allclose(np.abs(off.real), 1.0 / math.sqrt(2.0))


def test_scale_knob_is_linear():
    s1 = sample(EnsembleSpec(kind="gue", n=5, scale=1.0), trial_stream(3, 0))
    s2 = sample(EnsembleSpec(kind="gue", n=5, scale=2.5), trial_stream(3, 0))
    assert np.allclose(s2, 2.5 * s1)


def test_entry_scale():
    assert entry_scale(EnsembleSpec(kind="gue", n=4)) == 0.5
    assert entry_scale(EnsembleSpec(kind="wigner", n=9)) == pytest.approx(1 / 3)
    assert entry_scale(EnsembleSpec(kind="goe", n=9)) == 1.0
    assert entry_scale(EnsembleSpec(kind="complex-ginibre", n=4,
                                    scale=3.0)) == 3.0


def test_pencil_container():
    spec = EnsembleSpec(kind="complex-ginibre", n=3)
    p = sample_pencil(spec, 5, 9)
    assert p.n == 3
    assert p.seed_tag == (5, 9)
    lam = 0.7 - 0.2j
    assert np.allclose(p.at(lam), p.a + lam * p.b)
    with pytest.raises(ValueError):
        Pencil(a=np.zeros((2, 3)), b=np.zeros((2, 3)), spec=spec)


def test_pencil_draw_order():
    # A consumes the stream before B
    spec = EnsembleSpec(kind="real-ginibre", n=4)
    rng = trial_stream(11, 3)
    a = sample(spec, rng)
    b = sample(spec, rng)
    p = sample_pencil(spec, 11, 3)
    assert np.array_equal(p.a, a)
    assert np.array_equal(p.b, b)


@pytest.mark.parametrize("spec", [
    EnsembleSpec(kind="complex-ginibre", n=6),
    EnsembleSpec(kind="complex-ginibre", n=6, diag_variance=2.0),
    EnsembleSpec(kind="real-ginibre", n=6, entry_law="uniform"),
    EnsembleSpec(kind="goe", n=6),
    EnsembleSpec(kind="gue", n=6),
    EnsembleSpec(kind="wigner", n=6, mu="rademacher", nu="uniform"),
    EnsembleSpec(kind="subspace", n=6, subspace_kind="complex-symmetric"),
    EnsembleSpec(kind="subspace", n=6, subspace_kind="toeplitz"),
    EnsembleSpec(kind="subspace", n=6, subspace_kind="band", band_width=2),
    EnsembleSpec(kind="subspace", n=6, subspace_kind="band-toeplitz",
                 band_width=2),
    EnsembleSpec(kind="subspace", n=6, subspace_kind="diagonal"),
], ids=lambda s: f"{s.kind}-{s.subspace_kind or s.entry_law or ''}")
def test_declared_moments_hold(spec):
    # 5 standard errors at 20k draws; seeded, so deterministic
    moment_self_test(spec, draws=20000, master_seed=100)


def test_moment_self_test_catches_wrong_scale():
    spec = EnsembleSpec(kind="goe", n=6, scale=1.1)
    good = declared_moments(spec)
    assert good["diag"][1] == pytest.approx(2.0 * 1.1**2)
    bad = EnsembleSpec(kind="goe", n=6)

    def fake(s):
        return {k: (m, v * 1.2) for k, (m, v) in declared_moments(s).items()}

    import levelcross.ensembles as ens
    orig = ens.declared_moments
    ens.declared_moments = fake
    try:
        with pytest.raises(AssertionError):
            moment_self_test(bad, draws=20000, master_seed=100)
    finally:
        ens.declared_moments = orig
