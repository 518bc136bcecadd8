"""Random matrix ensembles and pencil sampling.

All pencils are pairs (A, B) of independent draws from one ensemble.  The
catalog:

``complex-ginibre``
    Independent complex Gaussian entries.  Off-diagonal entries have
    E|e|^2 = 1 (variance 1/2 per real component); the per-component variance
    of diagonal entries is an explicit knob ``diag_variance`` (default 1/2,
    which makes all n^2 entries i.i.d.).  The crossing statistics do not
    depend on it, and experiments verify that.
``real-ginibre``
    Independent real entries from ``entry_law`` (unit variance).
``goe``
    Real symmetric; off-diagonal N(0,1), diagonal N(0,2).
``gue``
    Hermitian with density proportional to exp(-n tr(H^2)/2): diagonal
    N(0, 1/n), off-diagonal E|h|^2 = 1/n.
``wigner``
    Hermitian with i.i.d. diagonal from real law ``mu`` and i.i.d. upper
    triangle from complex law ``nu`` (unit second absolute moment), all
    scaled by 1/sqrt(n).  ``mu = nu = "gaussian"`` reproduces ``gue`` in law.
``subspace``
    Complex Gaussian on a matrix subspace stable under the SU(2) pencil
    action: ``complex-symmetric``, ``toeplitz``, ``band`` (width k),
    ``band-toeplitz`` (width k), ``diagonal``.  Free coordinates are
    independent circular complex Gaussians with the variances induced by
    restricting the ambient density exp(-sum |e_ij|^2): a coordinate shared
    by m entries gets E|.|^2 = 1/m (e.g. Toeplitz diagonal value 1/(n-|k|)).

Reproducibility: ``trial_stream(master_seed, trial)`` builds a Philox
counter-based generator keyed by the 128-bit integer
(master_seed << 64) + trial.  Trials are therefore independent streams and a
trial's matrices are bit-identical regardless of batching, worker count, or
execution order.  Within a trial, A is drawn before B, and each sampler
documents its draw order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

KINDS = ("complex-ginibre", "real-ginibre", "goe", "gue", "wigner", "subspace")
SUBSPACE_KINDS = ("complex-symmetric", "toeplitz", "band", "band-toeplitz", "diagonal")
REAL_LAWS = ("gaussian", "rademacher", "uniform")
COMPLEX_LAWS = ("gaussian", "rademacher", "uniform")


def trial_stream(master_seed: int, trial: int) -> np.random.Generator:
    """Independent per-trial generator; Philox keyed by (master_seed, trial)."""
    if not (0 <= master_seed < 2**64 and 0 <= trial < 2**64):
        raise ValueError("master_seed and trial must be 64-bit non-negative integers")
    return np.random.Generator(np.random.Philox(key=(int(master_seed) << 64) + int(trial)))


@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of an ensemble; validate() checks the fields."""

    kind: str
    n: int
    diag_variance: float = 0.5      # complex-ginibre only (per real component)
    scale: float = 1.0              # global multiplier on sampled matrices
    mu: str = "gaussian"            # wigner diagonal law (real)
    nu: str = "gaussian"            # wigner off-diagonal law (complex)
    entry_law: str = "gaussian"     # real-ginibre entry law
    subspace_kind: str | None = None
    band_width: int | None = None   # for band / band-toeplitz

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.diag_variance <= 0:
            raise ValueError("diag_variance must be positive")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.kind == "wigner":
            if self.mu not in REAL_LAWS or self.nu not in COMPLEX_LAWS:
                raise ValueError(f"wigner laws must be in {REAL_LAWS}")
        if self.kind == "real-ginibre" and self.entry_law not in REAL_LAWS:
            raise ValueError(f"entry_law must be in {REAL_LAWS}")
        if self.kind == "subspace":
            if self.subspace_kind not in SUBSPACE_KINDS:
                raise ValueError(f"subspace_kind must be in {SUBSPACE_KINDS}")
            if self.subspace_kind in ("band", "band-toeplitz"):
                if self.band_width is None or not (0 <= self.band_width < self.n):
                    raise ValueError("band ensembles need 0 <= band_width < n")


@dataclass(frozen=True)
class Pencil:
    """Sampled pencil A + lambda B with provenance.

    ``seed_tag`` records (master_seed, trial); symmetry of A and B against the
    ensemble's class is established at sampling time (an SU(2)-transformed
    real pencil is legitimately complex, so the container does not re-check).
    """

    a: np.ndarray
    b: np.ndarray
    spec: EnsembleSpec
    seed_tag: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise ValueError("a and b must be square matrices of equal shape")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def at(self, lam: complex) -> np.ndarray:
        """Evaluate A + lambda B."""
        return self.a + lam * self.b


def _complex_gaussian(rng, shape, second_moment=1.0):
    # circular complex Gaussian, E|e|^2 = second_moment; real block drawn first
    s = math.sqrt(second_moment / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return s * (re + 1j * im)


def _real_law(rng, shape, law):
    if law == "gaussian":
        return rng.standard_normal(shape)
    if law == "rademacher":
        return rng.integers(0, 2, shape) * 2.0 - 1.0
    if law == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), shape)
    raise ValueError(f"unknown real law {law!r}")


def _complex_law(rng, shape, law):
    # unit second absolute moment in every case
    if law == "gaussian":
        return _complex_gaussian(rng, shape, 1.0)
    if law == "rademacher":
        re = rng.integers(0, 2, shape) * 2.0 - 1.0
        im = rng.integers(0, 2, shape) * 2.0 - 1.0
        return (re + 1j * im) / math.sqrt(2.0)
    if law == "uniform":
        a = math.sqrt(1.5)
        return rng.uniform(-a, a, shape) + 1j * rng.uniform(-a, a, shape)
    raise ValueError(f"unknown complex law {law!r}")


def sample_complex_ginibre(n: int, diag_variance: float, rng) -> np.ndarray:
    """Complex Gaussian matrix; off-diagonal E|e|^2 = 1, diagonal per-component
    variance ``diag_variance``.  Draw order: full matrix, then diagonal overwrite."""
    m = _complex_gaussian(rng, (n, n), 1.0)
    d = _complex_gaussian(rng, n, 2.0 * diag_variance)
    m[np.diag_indices(n)] = d
    return m


def sample_real_iid(n: int, law: str, rng) -> np.ndarray:
    """Real i.i.d. matrix with unit-variance entries from the law catalog."""
    return _real_law(rng, (n, n), law).astype(float)


def sample_goe(n: int, rng) -> np.ndarray:
    """Real symmetric Gaussian: offdiag N(0,1), diag N(0,2).  (G + G^T)/sqrt(2)."""
    g = rng.standard_normal((n, n))
    return (g + g.T) / math.sqrt(2.0)


def sample_gue(n: int, rng) -> np.ndarray:
    """Hermitian Gaussian with density ~ exp(-n tr(H^2)/2).

    Diagonal real N(0, 1/n); off-diagonal circular complex with E|h|^2 = 1/n.
    Draw order: complex upper triangle (row-major), then diagonal.
    """
    h = np.zeros((n, n), dtype=complex)
    iu = np.triu_indices(n, 1)
    up = _complex_gaussian(rng, len(iu[0]), 1.0 / n)
    h[iu] = up
    h += h.conj().T
    h[np.diag_indices(n)] = rng.standard_normal(n) / math.sqrt(n)
    return h


def sample_wigner(n: int, mu: str, nu: str, rng) -> np.ndarray:
    """Hermitian Wigner matrix scaled by 1/sqrt(n).

    Unscaled entries: diagonal i.i.d. from real law ``mu``, upper triangle
    i.i.d. from complex law ``nu`` (E|nu|^2 = 1), lower triangle conjugated.
    Draw order: upper triangle, then diagonal.
    """
    h = np.zeros((n, n), dtype=complex)
    iu = np.triu_indices(n, 1)
    h[iu] = _complex_law(rng, len(iu[0]), nu)
    h += h.conj().T
    h[np.diag_indices(n)] = _real_law(rng, n, mu)
    return h / math.sqrt(n)


def _toeplitz_from_coeffs(t, n):
    # t indexed by offset k = -(n-1)..(n-1), entry (i, j) = t[j - i]
    idx = np.arange(n)
    return t[(idx[None, :] - idx[:, None]) + (n - 1)]


def sample_subspace(kind: str, n: int, rng) -> np.ndarray:
    """Complex Gaussian on an SU(2)-stable subspace with induced variances.

    Draw orders: complex-symmetric draws the upper triangle then the diagonal;
    toeplitz variants draw offsets k = -(n-1)..(n-1) in order; band draws the
    full matrix and masks.
    """
    if kind == "complex-symmetric":
        m = np.zeros((n, n), dtype=complex)
        iu = np.triu_indices(n, 1)
        m[iu] = _complex_gaussian(rng, len(iu[0]), 0.5)
        m += m.T.copy()
        m[np.diag_indices(n)] = _complex_gaussian(rng, n, 1.0)
        return m
    if kind in ("toeplitz", "band-toeplitz"):
        offsets = np.arange(-(n - 1), n)
        mult = n - np.abs(offsets)
        t = _complex_gaussian(rng, 2 * n - 1, 1.0) / np.sqrt(mult)
        if kind == "band-toeplitz":
            raise ValueError("band-toeplitz needs the width; use sample() with a spec")
        return _toeplitz_from_coeffs(t, n)
    if kind == "diagonal":
        return np.diag(_complex_gaussian(rng, n, 1.0))
    if kind == "band":
        raise ValueError("band needs the width; use sample() with a spec")
    raise ValueError(f"unknown subspace kind {kind!r}")


def _sample_subspace_spec(spec: EnsembleSpec, rng) -> np.ndarray:
    n, kind, k = spec.n, spec.subspace_kind, spec.band_width
    if kind == "band":
        m = _complex_gaussian(rng, (n, n), 1.0)
        idx = np.arange(n)
        mask = np.abs(idx[None, :] - idx[:, None]) <= k
        return np.where(mask, m, 0.0)
    if kind == "band-toeplitz":
        offsets = np.arange(-(n - 1), n)
        mult = n - np.abs(offsets)
        t = _complex_gaussian(rng, 2 * n - 1, 1.0) / np.sqrt(mult)
        t[np.abs(offsets) > k] = 0.0
        return _toeplitz_from_coeffs(t, n)
    return sample_subspace(kind, n, rng)


def sample(spec: EnsembleSpec, rng) -> np.ndarray:
    """One matrix from the ensemble described by ``spec`` (scale applied)."""
    spec.validate()
    if spec.kind == "complex-ginibre":
        m = sample_complex_ginibre(spec.n, spec.diag_variance, rng)
    elif spec.kind == "real-ginibre":
        m = sample_real_iid(spec.n, spec.entry_law, rng)
    elif spec.kind == "goe":
        m = sample_goe(spec.n, rng)
    elif spec.kind == "gue":
        m = sample_gue(spec.n, rng)
    elif spec.kind == "wigner":
        m = sample_wigner(spec.n, spec.mu, spec.nu, rng)
    else:
        m = _sample_subspace_spec(spec, rng)
    return spec.scale * m


def sample_pencil(spec: EnsembleSpec, master_seed: int, trial: int) -> Pencil:
    """Independent (A, B) from the trial's own stream; A drawn before B."""
    rng = trial_stream(master_seed, trial)
    a = sample(spec, rng)
    b = sample(spec, rng)
    return Pencil(a=a, b=b, spec=spec, seed_tag=(master_seed, trial))


def entry_scale(spec: EnsembleSpec) -> float:
    """RMS of a generic off-diagonal entry: the sigma that makes the
    normalized eigenvalue cloud xi / (sigma sqrt(n (1+|lambda|^2)))
    asymptotically unit-disk shaped."""
    if spec.kind in ("gue", "wigner"):
        return spec.scale / math.sqrt(spec.n)
    return spec.scale


def declared_moments(spec: EnsembleSpec) -> dict:
    """Entry-class means and second absolute moments the samplers promise.

    Returns a dict mapping class name to (mean, E|entry|^2); used by the
    moment self-test.  Scale is included.
    """
    s2 = spec.scale**2
    n = spec.n
    if spec.kind == "complex-ginibre":
        return {"offdiag": (0.0, s2), "diag": (0.0, 2.0 * spec.diag_variance * s2)}
    if spec.kind == "real-ginibre":
        return {"entry": (0.0, s2)}
    if spec.kind == "goe":
        return {"offdiag": (0.0, s2), "diag": (0.0, 2.0 * s2)}
    if spec.kind == "gue":
        return {"offdiag": (0.0, s2 / n), "diag": (0.0, s2 / n)}
    if spec.kind == "wigner":
        return {"offdiag": (0.0, s2 / n), "diag": (0.0, _real_law_var(spec.mu) * s2 / n)}
    return _subspace_moments(spec)


def _real_law_var(law):
    return 1.0  # all catalog laws are unit variance


def _subspace_moments(spec):
    s2 = spec.scale**2
    n = spec.n
    kind = spec.subspace_kind
    if kind == "complex-symmetric":
        return {"offdiag": (0.0, 0.5 * s2), "diag": (0.0, s2)}
    if kind == "diagonal":
        return {"diag": (0.0, s2)}
    if kind == "band":
        return {"inband": (0.0, s2)}
    # toeplitz / band-toeplitz: per-offset second moments
    out = {}
    width = n - 1 if kind == "toeplitz" else spec.band_width
    for k in range(-width, width + 1):
        out[f"offset{k}"] = (0.0, s2 / (n - abs(k)))
    return out


def _entry_classes(spec: EnsembleSpec, m: np.ndarray) -> dict:
    n = spec.n
    if spec.kind == "real-ginibre":
        return {"entry": m.ravel()}
    if spec.kind == "subspace" and spec.subspace_kind == "diagonal":
        return {"diag": np.diag(m)}
    if spec.kind == "subspace" and spec.subspace_kind == "band":
        idx = np.arange(n)
        mask = np.abs(idx[None, :] - idx[:, None]) <= spec.band_width
        return {"inband": m[mask]}
    if spec.kind == "subspace" and spec.subspace_kind in ("toeplitz", "band-toeplitz"):
        width = n - 1 if spec.subspace_kind == "toeplitz" else spec.band_width
        return {f"offset{k}": np.diagonal(m, offset=k).copy()
                for k in range(-width, width + 1)}
    off = m[~np.eye(n, dtype=bool)]
    return {"offdiag": off, "diag": np.diag(m)}


def moment_self_test(spec: EnsembleSpec, draws: int = 100_000, master_seed: int = 0,
                     tolerance_se: float = 5.0) -> dict:
    """Empirical first/second moments of every entry class over ``draws`` samples.

    Draws are spread over matrices (ceil(draws / n^2) of them).  Returns a
    report dict per class with fields mean, second, declared values, and the
    worst deviation in standard errors; raises AssertionError beyond
    ``tolerance_se``.
    """
    spec.validate()
    rng = trial_stream(master_seed, 0)
    reps = max(1, math.ceil(draws / spec.n**2))
    pools: dict[str, list] = {}
    for _ in range(reps):
        m = sample(spec, rng)
        for k, v in _entry_classes(spec, m).items():
            pools.setdefault(k, []).append(np.asarray(v).ravel())
    declared = declared_moments(spec)
    report = {}
    for k, chunks in pools.items():
        x = np.concatenate(chunks)
        mean = complex(np.mean(x))
        second = float(np.mean(np.abs(x) ** 2))
        dm, ds = declared[k]
        se_mean = math.sqrt(second / len(x)) + 1e-300
        se_sec = float(np.std(np.abs(x) ** 2)) / math.sqrt(len(x)) + 1e-300
        z = max(abs(mean - dm) / se_mean, abs(second - ds) / se_sec)
        report[k] = dict(count=len(x), mean=mean, second=second,
                         declared_mean=dm, declared_second=ds, worst_se=z)
        if z > tolerance_se:
            raise AssertionError(
                f"{spec.kind}/{k}: moments off by {z:.1f} standard errors "
                f"(mean {mean:.4f} vs {dm}, second {second:.4f} vs {ds})")
    return report
