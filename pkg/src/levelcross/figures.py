"""Static SVG figures for finished experiment runs.

Everything renders through the Agg backend; no display is required.
SVG element ids are salted with the config hash and the Date metadata is
suppressed, so rerunning a config reproduces the files byte for byte.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["emit_figures"]

_SCATTER_CAP = 20000


def _save(fig, record, name: str) -> Path:
    path = record.output_dir / name
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _stats(record, *cols):
    if not record.statistics:
        raise ValueError("record has no aggregate statistics")
    out = []
    for c in cols:
        if c not in record.stat_columns:
            raise ValueError(f"missing aggregate column {c!r}")
        out.append(np.array([float(r[c]) for r in record.statistics]))
    return out


def emit_figures(record) -> list[Path]:
    """Render the experiment's figures next to its CSVs."""
    matplotlib.rcParams["svg.hashsalt"] = record.config_hash
    fn = {
        "uniformity": _fig_uniformity,
        "gue2-law": _fig_gue2,
        "goe-hq": _fig_hq,
        "sr-scan": _fig_sr,
        "lt-scan": _fig_lt,
        "ucl-check": _fig_ucl,
        "near-real": _fig_near_real,
        "energy-table": _fig_energy,
        "psi-profile": _fig_psi,
        "absY-profile": _fig_absy,
    }[record.config["experiment"]]
    return fn(record)


def _thin(arr: np.ndarray) -> np.ndarray:
    if len(arr) <= _SCATTER_CAP:
        return arr
    step = -(-len(arr) // _SCATTER_CAP)
    return arr[::step]


def _crossing_arrays(record, n):
    rows = record.crossings(n)
    lam = np.array([complex(r["re_lambda"], r["im_lambda"]) for r in rows])
    y = np.array([r["y"] for r in rows])
    z = np.array([r["z"] for r in rows])
    return lam, y, z


def _fig_uniformity(record) -> list[Path]:
    out = []
    for n in record.config["n_list"]:
        lam, y, z = _crossing_arrays(record, n)
        lam, y, z = _thin(lam), _thin(y), _thin(z)

        fig, axes = plt.subplots(1, 2, figsize=(9, 4.6))
        inner = np.isfinite(lam) & (np.abs(lam) <= 1.0)
        outer = ~inner
        with np.errstate(divide="ignore", invalid="ignore"):
            mirrored = np.where(lam[outer] == 0, 0, 1.0 / lam[outer])
        for ax, pts, c, title in (
                (axes[0], lam[inner], np.abs(y[inner]),
                 r"chart $|\lambda| \leq 1$"),
                (axes[1], mirrored, np.abs(y[outer]),
                 r"chart $1/\lambda$")):
            ax.scatter(pts.real, pts.imag, c=c, s=2, cmap="viridis",
                       vmin=0.0, vmax=1.0, linewidths=0)
            ax.add_patch(plt.Circle((0, 0), 1.0, fill=False, lw=0.6,
                                    color="gray"))
            ax.set_xlim(-1.05, 1.05)
            ax.set_ylim(-1.05, 1.05)
            ax.set_aspect("equal")
            ax.set_title(title)
        fig.suptitle(f"crossings on the stereographic disk pair, n={n}")
        out.append(_save(fig, record, f"scatter-n{n}.svg"))

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(z, bins=40, range=(-1, 1), density=True, alpha=0.75)
        ax.axhline(0.5, color="k", lw=1, ls="--", label="uniform level 1/2")
        ax.set_xlabel("Z")
        ax.set_ylabel("density")
        ax.set_title(f"sphere height histogram, n={n}")
        ax.legend()
        out.append(_save(fig, record, f"z-hist-n{n}.svg"))
    return out


def _fig_gue2(record) -> list[Path]:
    from .experiments import _absy_law_cdf

    n = record.config["n_list"][0]
    _, y, _ = _crossing_arrays(record, n)
    absy = np.sort(np.abs(y))
    emp = np.arange(1, len(absy) + 1) / len(absy)
    grid = np.linspace(0, 1, 513)
    cdf = _absy_law_cdf()
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot(absy, emp, lw=1.2, label="empirical")
    ax.plot(grid, [cdf(t) for t in grid], "k--", lw=1, label="law")
    ax.set_xlabel("|Y|")
    ax.set_ylabel("CDF")
    ax.set_title(f"|Y| distribution, n={n}")
    ax.legend()
    return [_save(fig, record, "absy-cdf.svg")]


def _fig_hq(record) -> list[Path]:
    q, hn, se, hn2, se2, nn = _stats(record, "q", "hn", "stderr",
                                     "hn_alt", "stderr_alt", "n")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for n in sorted(set(nn.astype(int))):
        m = nn == n
        ax.errorbar(q[m], hn[m], 2 * se[m], fmt="o-", ms=3, capsize=3,
                    label=f"n={n}, imaginary axis")
        ax.errorbar(q[m] + 0.004, hn2[m], 2 * se2[m], fmt="s--", ms=3,
                    capsize=3, label=f"n={n}, oblique ray")
    ax.set_xlabel("q")
    ax.set_ylabel(r"$H_n(q)$")
    ax.set_title("pseudocovariance profile (2 s.e. bars)")
    ax.legend(fontsize=7)
    return [_save(fig, record, "hn-profile.svg")]


def _fig_sr(record) -> list[Path]:
    r, ratio = _stats(record, "r", "ratio")
    k = len(record.config["r_list"])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(r[:k], ratio[:k], "o-", label="count ratio r vs r/2")
    ax.axhline(record.config["ratio_lo"], color="gray", ls=":", lw=1)
    ax.axhline(record.config["ratio_hi"], color="gray", ls=":", lw=1)
    ax.axhline(4.0, color="k", ls="--", lw=1, label="area scaling")
    ax.set_xlabel("r")
    ax.set_ylabel("ratio")
    ax.set_title("small-gap count scaling")
    ax.legend()
    return [_save(fig, record, "gap-ratio.svg")]


def _fig_lt(record) -> list[Path]:
    big_r, m, se = _stats(record, "R", "mean", "stderr")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(big_r, m, 2 * se, fmt="o-", capsize=3)
    ax.axhline(record.config["lt_max"], color="gray", ls=":", lw=1)
    ax.set_xlabel("R")
    ax.set_ylabel("tail mass")
    ax.set_title("pair-measure log tail")
    return [_save(fig, record, "lt-tail.svg")]


def _fig_ucl(record) -> list[Path]:
    vals = [r["ucl"] for r in record.trials if r["ok"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(vals)), vals, "o", ms=4)
    ax.axhline(record.config["ucl_max"], color="gray", ls=":", lw=1,
               label="bound")
    ax.set_xlabel("trial")
    ax.set_ylabel("max test-function discrepancy")
    ax.set_title("circular-law discrepancy per spectrum")
    ax.legend()
    return [_save(fig, record, "ucl.svg")]


def _fig_near_real(record) -> list[Path]:
    n, near, nse, real, rse = _stats(record, "n", "near_frac", "near_se",
                                     "real_frac", "real_se")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(n, near, 2 * nse, fmt="o-", capsize=3,
                label="near real circle")
    ax.errorbar(n, real, 2 * rse, fmt="s--", capsize=3, label="exactly real")
    ax.set_xlabel("n")
    ax.set_ylabel("fraction of crossings")
    ax.set_title("crossings near the real circle")
    ax.legend()
    return [_save(fig, record, "near-real.svg")]


def _fig_energy(record) -> list[Path]:
    q, g = _stats(record, "q", "G")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(q, g, "o-", ms=3)
    ax.axhline(-0.25, color="k", ls="--", lw=1, label="disk value -1/4")
    ax.set_xlabel("q")
    ax.set_ylabel("G(q)")
    ax.set_title("elliptic-family logarithmic energy")
    ax.legend()
    return [_save(fig, record, "energy-table.svg")]


def _fig_psi(record) -> list[Path]:
    lo, hi, emp, se, pred = _stats(record, "bin_lo", "bin_hi", "empirical",
                                   "stderr", "predicted")
    c = 0.5 * (lo + hi)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.errorbar(c, emp, 3 * se, fmt="o", ms=4, capsize=3,
                label="empirical (3 s.e.)")
    ax.plot(c, pred, "k--", lw=1.2, label="potential-theory prediction")
    ax.set_xlabel("|Y|")
    ax.set_ylabel("density")
    ax.set_title(f"bulk |Y| density, n={record.config['n_list'][0]}")
    ax.legend()
    return [_save(fig, record, "psi-profile.svg")]


def _fig_absy(record) -> list[Path]:
    cols = [c for c in record.stat_columns if c.startswith("cdf_n")]
    (t,) = _stats(record, "t")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for c in cols:
        (v,) = _stats(record, c)
        ax.plot(t, v, lw=1.2, label=c.replace("cdf_", ""))
    ax.plot(t, t, "k:", lw=1, label="uniform limit")
    ax.set_xlabel("|Y|")
    ax.set_ylabel("CDF")
    ax.set_title("|Y| distribution across sizes")
    ax.legend()
    return [_save(fig, record, "absy-profile.svg")]
