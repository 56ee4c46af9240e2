"""Delimited per-item output and matplotlib figures for evaluation runs.

Figures are rendered straight through the Agg canvas (no pyplot state), with
fixed metadata so identical inputs produce byte-identical PNG files.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .core import SpatialMap
from .metrics import REPORT_PSNR_CAP_DB, EvalItem

__all__ = [
    "write_items_csv",
    "render_score_figure",
    "render_psnr_figure",
    "render_activation_figure",
]

_PNG_METADATA = {"Software": "saukit"}
_DPI = 110


def write_items_csv(path: str | Path, items: list[EvalItem]) -> None:
    """Per-item records as CSV: id, detected flag, score, capped PSNR."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "detected_trigger", "score", "psnr_db"])
        for item in items:
            value = item.psnr_vs_reference
            capped = REPORT_PSNR_CAP_DB if math.isinf(value) else min(value, REPORT_PSNR_CAP_DB)
            writer.writerow([item.id, int(item.detected_trigger), repr(item.score), repr(capped)])


def _save(fig: Figure, path: str | Path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=_DPI, metadata=dict(_PNG_METADATA))


def render_score_figure(
    path: str | Path,
    calibration_scores: list[float],
    item_scores: list[float],
    threshold: float,
) -> None:
    """Histogram of clean calibration scores vs evaluated item scores."""
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    lo = min(min(calibration_scores), min(item_scores), threshold)
    hi = max(max(calibration_scores), max(item_scores), threshold)
    span = (hi - lo) or 1.0
    bins = np.linspace(lo - 0.05 * span, hi + 0.05 * span, 41)
    ax.hist(calibration_scores, bins=bins, alpha=0.6, label="clean calibration")
    ax.hist(item_scores, bins=bins, alpha=0.6, label="evaluated items")
    ax.axvline(threshold, color="k", linestyle="--", linewidth=1, label="threshold")
    ax.set_xlabel("trigger score (mean similarity over region)")
    ax.set_ylabel("count")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def render_psnr_figure(path: str | Path, psnr_values: list[float]) -> None:
    """Per-item PSNR against the clean reference, with the batch mean."""
    capped = [
        REPORT_PSNR_CAP_DB if math.isinf(v) else min(v, REPORT_PSNR_CAP_DB)
        for v in psnr_values
    ]
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    ax.plot(range(len(capped)), capped, ".", markersize=4)
    mean = sum(capped) / len(capped)
    ax.axhline(mean, color="k", linestyle="--", linewidth=1, label=f"mean {mean:.2f} dB")
    ax.set_xlabel("item")
    ax.set_ylabel("PSNR vs reference (dB)")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def render_activation_figure(path: str | Path, activation: SpatialMap) -> None:
    """Heatmap of the profile's activation map (where the trigger acts)."""
    fig = Figure(figsize=(5.0, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    im = ax.imshow(activation.values, interpolation="nearest")
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    fig.colorbar(im, ax=ax, label="channel L2 magnitude")
    fig.tight_layout()
    _save(fig, path)
