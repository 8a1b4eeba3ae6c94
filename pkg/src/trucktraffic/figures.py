"""Matplotlib rendering of the validation outputs. Every figure lands next to
the CSV that carries the same numbers; plotting is presentation only."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

DPI = 150


def save_residual_figure(rows: Sequence[tuple], path: str | Path, label: str) -> Path:
    """Residuals vs observed AADT with the lowess curve over a zero line."""
    obs = [r[0] for r in rows]
    res = [r[1] for r in rows]
    fit = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.scatter(obs, res, s=6, alpha=0.35, color="#2b6cb0", label="residuals")
    ax.axhline(0.0, color="0.4", lw=0.8)
    ax.plot(obs, fit, color="#c53030", lw=1.8, label="lowess")
    ax.set_xlabel(f"observed {label} AADT (veh/day)")
    ax.set_ylabel("residual (observed - predicted)")
    ax.set_title(f"Residuals vs observed {label} AADT")
    ax.legend(frameon=False)
    return _save(fig, path)


def save_sensitivity_figure(curves: Sequence[tuple], path: str | Path) -> Path:
    """R2 against noise percentage, one line per (label, curve)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, curve in curves:
        xs = [p[0] for p in curve.levels]
        ys = [p[1] for p in curve.levels]
        ax.plot(xs, ys, marker="o", ms=4, label=label)
    ax.set_xlabel("noise level (% of value)")
    ax.set_ylabel("held-out R²")
    ax.set_title("Noise sensitivity")
    ax.legend(frameon=False)
    return _save(fig, path)


def save_county_mape_figure(counties: Sequence, path: str | Path, label: str) -> Path:
    """Distribution of VKT-weighted county MAPEs (the map itself is left to
    GIS tooling fed by the CSV)."""
    vals = [c.mape_pct for c in counties]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if vals:
        ax.hist(vals, bins=min(30, max(5, len(vals))), color="#2f855a", alpha=0.85)
    ax.set_xlabel("county VKT-weighted MAPE (%)")
    ax.set_ylabel("counties")
    ax.set_title(f"County MAPE distribution, {label}")
    return _save(fig, path)


def save_predictor_summary_figure(rows: Sequence, path: str | Path, label: str) -> Path:
    """Observed-vs-predicted quartile boxes per predictor bucket."""
    predictors = []
    for r in rows:
        if r.predictor not in predictors:
            predictors.append(r.predictor)
    fig, axes = plt.subplots(len(predictors), 1,
                             figsize=(8, 3.2 * len(predictors)), squeeze=False)
    for ax, predictor in zip(axes[:, 0], predictors):
        sub = [r for r in rows if r.predictor == predictor]
        buckets = []
        for r in sub:
            if r.bucket not in buckets:
                buckets.append(r.bucket)
        for si, (series, color) in enumerate((("observed", "#c53030"),
                                              ("predicted", "#2b6cb0"))):
            stats = []
            positions = []
            for bi, b in enumerate(buckets):
                match = [r for r in sub if r.bucket == b and r.series == series]
                if not match:
                    continue
                r = match[0]
                stats.append({
                    "med": r.median, "q1": r.q1, "q3": r.q3,
                    "whislo": r.q_min, "whishi": r.q_max, "label": b,
                })
                positions.append(bi + (si - 0.5) * 0.35)
            if stats:
                parts = ax.bxp(stats, positions=positions, widths=0.3,
                               showfliers=False, patch_artist=True)
                for box in parts["boxes"]:
                    box.set(facecolor=color, alpha=0.55)
        ax.set_xticks(range(len(buckets)))
        ax.set_xticklabels(buckets)
        ax.set_title(f"{label}: observed (red) vs predicted (blue) by {predictor}")
        ax.set_yscale("symlog")
    return _save(fig, path)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
