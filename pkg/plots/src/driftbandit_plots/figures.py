"""Figure builders over harness output files.

All numeric annotations are read from the summaries, never recomputed; the
cross-check flag re-derives each annotated number from the raw rows and
fails loudly on a mismatch beyond 1e-9.  Rendering is a pure function of
the input files (fixed dpi, fixed svg hash salt), so re-rendering is
idempotent.
"""

from __future__ import annotations

import math
from pathlib import Path
from statistics import NormalDist

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "driftbandit"

import matplotlib.pyplot as plt
import numpy as np

from .io import CrossCheckError, SummaryData, load_runs_for_summary, load_shift_times, load_summary

# Okabe-Ito palette: colorblind-safe
PALETTE = ["#0072B2", "#D55E00", "#009E73", "#CC79A7", "#E69F00", "#56B4E9", "#000000"]

_TOL = 1e-9


def _save(fig, out_path: str | Path, svg: bool) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150, format="svg" if svg else "png")
    plt.close(fig)
    return out_path


def _ci_half_width(samples: np.ndarray, level: float) -> np.ndarray:
    n = samples.shape[0]
    if n < 2:
        return np.zeros(samples.shape[1])
    z = NormalDist().inv_cdf(0.5 + level / 2)
    return z * samples.std(axis=0, ddof=1) / math.sqrt(n)


def _single_horizon(summary: SummaryData) -> int:
    horizons = summary.horizons()
    if len(horizons) != 1:
        raise ValueError(
            f"summary {summary.name} spans horizons {horizons}; regret curves "
            "need a single-horizon summary (use the exponent plot for sweeps)"
        )
    return horizons[0]


def _check_endpoints(summary: SummaryData, pairs) -> None:
    for row, run in pairs:
        if abs(run.regret_cum[-1] - row["final_regret"]) > _TOL:
            raise CrossCheckError(
                f"{run.run_id}: CSV endpoint {run.regret_cum[-1]!r} != "
                f"summary final_regret {row['final_regret']!r}"
            )
    finals = np.array([run.regret_cum[-1] for _, run in pairs])
    T = pairs[0][0]["T"]
    agg = next(a for a in summary.aggregates if a["T"] == T)
    if abs(finals.mean() - agg["mean_regret"]) > _TOL:
        raise CrossCheckError(
            f"{summary.name}: mean of CSV endpoints {finals.mean()!r} != "
            f"summary mean_regret {agg['mean_regret']!r}"
        )


def plot_regret_curves(
    summary_paths,
    out_path,
    ci: float = 0.95,
    shifts_path=None,
    cross_check: bool = False,
    svg: bool = False,
) -> Path:
    """Mean cumulative regret per summary with an across-seed confidence band.

    Vertical gray marks show episode restarts of the first run of the first
    summary; red dashed marks show detected shift times when a shift report
    is supplied.
    """
    summaries = [load_summary(p) for p in summary_paths]
    if not summaries:
        raise ValueError("need at least one summary")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for color, summary in zip(PALETTE, summaries):
        T = _single_horizon(summary)
        pairs = load_runs_for_summary(summary, T)
        if cross_check:
            _check_endpoints(summary, pairs)
        curves = np.stack([run.regret_cum for _, run in pairs])
        mean = curves.mean(axis=0)
        half = _ci_half_width(curves, ci)
        t = pairs[0][1].t
        ax.plot(t, mean, color=color, label=f"{summary.name} (n={len(pairs)})")
        ax.fill_between(t, mean - half, mean + half, color=color, alpha=0.2, linewidth=0)
    first_run = load_runs_for_summary(summaries[0], _single_horizon(summaries[0]))[0][1]
    restarts = first_run.t[np.flatnonzero(np.diff(first_run.episode)) + 1]
    for r in restarts:
        ax.axvline(r, color="0.6", linewidth=0.8, zorder=0)
    if shifts_path is not None:
        for s in load_shift_times(shifts_path):
            ax.axvline(s, color="#D55E00", linestyle="--", linewidth=1.0, zorder=0)
    ax.set_xlabel("round t")
    ax.set_ylabel("cumulative regret")
    ax.legend(frameon=False)
    return _save(fig, out_path, svg)


def _refit_slope(aggregates) -> tuple[float, float]:
    x = np.log([a["T"] for a in aggregates])
    y = np.log([a["mean_regret"] for a in aggregates])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def plot_exponent_fit(
    summary_path,
    out_path,
    cross_check: bool = False,
    svg: bool = False,
) -> Path:
    """Log-log sweep scatter with the harness-fitted line and slope annotation.

    The annotated slope is read from the summary; it is never re-fit here
    unless the cross-check flag asks for verification.
    """
    summary = load_summary(summary_path)
    if summary.fit is None or len(summary.aggregates) < 3:
        raise ValueError(f"summary {summary.name} has no exponent fit (needs >= 3 sweep points)")
    slope = summary.fit["slope"]
    intercept = summary.fit["intercept"]
    if cross_check:
        refit, _ = _refit_slope(summary.aggregates)
        if abs(refit - slope) > _TOL:
            raise CrossCheckError(
                f"{summary.name}: re-fitted slope {refit!r} != summary slope {slope!r}"
            )
    Ts = np.array([a["T"] for a in summary.aggregates], dtype=float)
    means = np.array([a["mean_regret"] for a in summary.aggregates])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.scatter(Ts, means, color=PALETTE[0], zorder=3, label=summary.name)
    grid = np.geomspace(Ts.min(), Ts.max(), 64)
    ax.plot(grid, np.exp(intercept) * grid**slope, color=PALETTE[1],
            label=f"slope {slope:.6f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("mean final regret")
    ax.annotate(f"slope {slope:.6f}", xy=(0.05, 0.9), xycoords="axes fraction")
    ax.legend(frameon=False)
    return _save(fig, out_path, svg)


def plot_shift_overlay(
    summary_paths,
    shifts_path,
    out_path,
    ci: float = 0.95,
    cross_check: bool = False,
    svg: bool = False,
) -> Path:
    """Regret curves with detected shift times overlaid (report required)."""
    if shifts_path is None:
        raise ValueError("shift overlay needs a shift report file")
    return plot_regret_curves(
        summary_paths, out_path, ci=ci, shifts_path=shifts_path,
        cross_check=cross_check, svg=svg,
    )
