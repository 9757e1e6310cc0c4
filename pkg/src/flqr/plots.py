"""Matplotlib renderers for the CLI report paths.

Every renderer writes a PNG next to the delimited artifact it illustrates
and returns the figure path.  All figures use the non-interactive Agg
backend so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_beta(path, grid_points, beta_values, title="fitted slope"):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(grid_points, beta_values, color="tab:red", lw=1.8)
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\hat\beta(t)$")
    ax.set_title(title)
    return _finish(fig, path)


def plot_band(path, grid_points, center, lower, upper, title, band_label):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.fill_between(grid_points, lower, upper, color="tab:blue", alpha=0.25, label=band_label)
    ax.plot(grid_points, center, color="tab:red", lw=1.8, label="estimate")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\hat\beta(t)$")
    ax.set_title(title)
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_cv_curve(path, lams, risks, ses, chosen):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    lams = np.asarray(lams)
    ax.errorbar(lams, risks, yerr=ses, fmt="o-", ms=3.5, lw=1.0, capsize=2)
    ax.axvline(chosen, color="tab:red", ls="--", lw=1.2, label=f"selected {chosen:.2e}")
    ax.set_xscale("log")
    ax.set_xlabel("penalty")
    ax.set_ylabel("held-out smoothed loss")
    ax.set_title("cross-validation")
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_quantile_paths(path, table):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    taus = table["tau"]
    ax.plot(taus, table["raw"], "o-", ms=3, lw=1.0, color="0.4", label="raw")
    ax.plot(taus, table["rearranged"], lw=1.2, color="tab:blue", label="rearranged")
    ax.plot(taus, table["isotonic"], lw=1.2, color="tab:green", label="isotonic")
    ax.plot(taus, table["combined"], lw=1.8, color="tab:red", label="combined")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel("conditional quantile")
    ax.set_title("quantile monotonization")
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_mise_report(path, report):
    """Box plots of per-replicate integrated squared errors by method."""
    by_key = {}
    for _, method, tau, metric, value in report.rows:
        if metric == "mise":
            by_key.setdefault((method, tau), []).append(value)
    methods = sorted({k[0] for k in by_key})
    taus = sorted({k[1] for k in by_key})
    fig, axes = plt.subplots(1, len(taus), figsize=(3.2 * len(taus), 4.0), sharey=True)
    axes = np.atleast_1d(axes)
    for ax, tau in zip(axes, taus):
        data = [by_key.get((m, tau), [np.nan]) for m in methods]
        ax.boxplot(data, tick_labels=methods)
        ax.set_yscale("log")
        ax.set_title(f"tau = {tau:g}")
    axes[0].set_ylabel("integrated squared error")
    return _finish(fig, path)


def plot_coverage_report(path, report, level=None):
    """Bar chart of empirical coverage per (tau, metric)."""
    recs = [r for r in report.summary() if r["metric"].startswith(("cover", "scb_cover"))]
    if not recs:
        raise ValueError("report holds no coverage metrics")
    labels = [f"{r['metric']} @ tau={r['tau']:g}" for r in recs]
    values = [r["mean"] for r in recs]
    fig, ax = plt.subplots(figsize=(max(6.4, 0.65 * len(recs)), 4.0))
    ax.bar(range(len(recs)), values, color="tab:blue")
    if level is None:
        level = report.config.get("level", 0.95)
    ax.axhline(level, color="tab:red", ls="--", lw=1.2, label=f"nominal {level:g}")
    ax.set_xticks(range(len(recs)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("empirical coverage")
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_sample_curves(path, sample, count=10):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i in range(min(count, sample.n)):
        ax.plot(sample.grid.points, sample.curves[i], lw=0.9)
    ax.set_xlabel("t")
    ax.set_ylabel("X(t)")
    ax.set_title(f"{min(count, sample.n)} covariate curves")
    return _finish(fig, path)
