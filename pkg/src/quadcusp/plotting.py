"""Matplotlib figures for experiment reports (Agg backend, reproducible PNGs)."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps or version strings in the files
PNG_META = {"Software": None}


def _save(fig, path) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=PNG_META)
    plt.close(fig)
    return str(path)


def counting_plot(path, series: dict) -> str:
    """series: label -> (k values, counts, slope, intercept)."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, (ks, counts, slope, intercept) in series.items():
        ks = np.asarray(ks, float)
        ax.plot(ks + 1, np.log2(counts), "o", label=f"{label} (slope {slope:.3f})")
        ax.plot(ks + 1, slope * (ks + 1) + intercept, "-", lw=1)
    ax.set_xlabel("k + 1")
    ax.set_ylabel("log2 N(k; O)")
    if series:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def trace_law_plot(path, taus, logs, tau_fit, Ds, logs_D, D_fit) -> str:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8))
    ax = axes[0]
    ax.plot(taus, logs, "o")
    ax.plot(taus, tau_fit[0] * np.asarray(taus) + tau_fit[1], "-", lw=1,
            label=f"slope {tau_fit[0]:.4f}")
    ax.plot(taus, -np.asarray(taus) / (2 * math.sqrt(2)) + tau_fit[1] + (tau_fit[0] + 1 / (2 * math.sqrt(2))) * taus[0],
            "--", lw=1, label="slope -1/(2 sqrt 2)")
    ax.set_xlabel("tau")
    ax.set_ylabel("ln measure")
    ax.legend(fontsize=8)
    ax = axes[1]
    ax.plot(Ds, logs_D, "o")
    ax.plot(Ds, D_fit[0] * np.asarray(Ds) + D_fit[1], "-", lw=1, label=f"slope {D_fit[0]:.4f}")
    ax.set_xlabel("D")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def crossover_plot(path, curves: dict) -> str:
    """curves: label -> (s grid, mean ratios, predicted crossover, estimated crossover)."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, (s, r, pred, est) in curves.items():
        line, = ax.plot(s, r, "-", label=label)
        ax.axvline(pred, color=line.get_color(), ls="--", lw=1)
        if est is not None:
            ax.axvline(est, color=line.get_color(), ls=":", lw=1)
    ax.axhline(0.9, color="k", lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("s")
    ax.set_ylabel("mean shell increment ratio")
    ax.legend(fontsize=8)
    return _save(fig, path)


def depth_plot(path, traces: dict, beta: float) -> str:
    """traces: label -> (t, depth)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (t, d) in traces.items():
        ax.plot(t, d, lw=0.8, label=label)
    t = next(iter(traces.values()))[0] if traces else np.array([0, 1])
    ax.plot(t, beta * np.asarray(t), "k--", lw=1, label=f"beta t, beta={beta:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("depth")
    ax.legend(fontsize=7)
    return _save(fig, path)


def histogram_plot(path, values, xlabel: str) -> str:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(values, bins=30)
    ax.set_xlabel(xlabel)
    return _save(fig, path)
