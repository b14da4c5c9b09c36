"""Report output: delimited tables (CSV + JSON mirror) and matplotlib figures.

Every report path writes the CSV, a JSON mirror with identical field names
(same stem, .json), and - unless disabled - a PNG figure next to them.
Floats are fixed at 6 decimals so identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .evaluation import NoiseRow, SweepReport, TimingReport
from .sequence import TranslationTrack
from .metric import PERFECT

SWEEP_FIELDS = ["tx", "ty", "ex", "ey", "abs_err_x", "abs_err_y"]
NOISE_FIELDS = ["sigma", "rmse_x", "rmse_y", "trials"]
TIMING_FIELDS = ["dim", "seconds_median", "am_evals"]


def sweep_rows(report: SweepReport) -> list[dict]:
    return [
        {
            "tx": r.tx,
            "ty": r.ty,
            "ex": r.ex,
            "ey": r.ey,
            "abs_err_x": r.abs_err_x,
            "abs_err_y": r.abs_err_y,
        }
        for r in report.rows
    ]


def noise_rows(rows: list[NoiseRow]) -> list[dict]:
    return [
        {"sigma": r.sigma, "rmse_x": r.rmse_x, "rmse_y": r.rmse_y, "trials": r.trials}
        for r in rows
    ]


def timing_rows(report: TimingReport) -> list[dict]:
    return [
        {"dim": r.dim, "seconds_median": r.seconds_median, "am_evals": r.am_evals}
        for r in report.rows
    ]


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _json_cell(value):
    return round(value, 6) if isinstance(value, float) else value


def write_table(rows: list[dict], fieldnames: list[str], csv_path) -> None:
    """CSV with 6-decimal floats plus a JSON mirror at the same stem."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format_cell(row[name]) for name in fieldnames])
    mirror = [{name: _json_cell(row[name]) for name in fieldnames} for row in rows]
    csv_path.with_suffix(".json").write_text(json.dumps(mirror, indent=2) + "\n")


def _save(fig, png_path) -> None:
    fig.tight_layout()
    # drop the version-stamped Software chunk so reruns are byte-identical
    fig.savefig(png_path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def render_sweep_figure(report: SweepReport, png_path) -> None:
    """Per-axis absolute error against the true fraction, one line per row value."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for axis_idx, (ax, label) in enumerate(zip(axes, ("x", "y"))):
        series: dict[float, list[tuple[float, float]]] = {}
        for r in report.rows:
            key = r.ty if axis_idx == 0 else r.tx
            frac = r.tx if axis_idx == 0 else r.ty
            err = r.abs_err_x if axis_idx == 0 else r.abs_err_y
            series.setdefault(key, []).append((frac, err))
        for key in sorted(series):
            pts = sorted(series[key])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", lw=0.8)
        ax.set_xlabel(f"true fraction {label}")
        ax.set_ylabel(f"|error {label}| (px)")
        ax.grid(True, alpha=0.3)
    fig.suptitle("sub-pixel accuracy sweep")
    _save(fig, png_path)


def render_noise_figure(rows: list[NoiseRow], png_path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    sigmas = [r.sigma for r in rows]
    ax.plot(sigmas, [r.rmse_x for r in rows], marker="o", label="rmse x")
    ax.plot(sigmas, [r.rmse_y for r in rows], marker="s", label="rmse y")
    ax.set_xlabel("noise sigma (grey levels)")
    ax.set_ylabel("RMSE (px)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.suptitle("noise robustness")
    _save(fig, png_path)


def render_timing_figure(report: TimingReport, png_path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    dims = [r.dim for r in report.rows]
    ax.loglog(dims, [r.seconds_median for r in report.rows], marker="o")
    ax.set_xlabel("image dimension (px)")
    ax.set_ylabel("median seconds")
    ax.grid(True, which="both", alpha=0.3)
    fig.suptitle("registration timing")
    _save(fig, png_path)


def render_track_figure(track: TranslationTrack, png_path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    frames = [e.frame for e in track.entries]
    ax.plot(frames, [e.shift.dx for e in track.entries], marker=".", label="dx")
    ax.plot(frames, [e.shift.dy for e in track.entries], marker=".", label="dy")
    ax.set_xlabel("frame")
    ax.set_ylabel("shift (px)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.suptitle("sequence translation track")
    _save(fig, png_path)


def format_am(am: float) -> str:
    """Fixed 6-decimal rendering with the PERFECT sentinel spelled out."""
    if am == PERFECT:
        return "perfect"
    if math.isnan(am):
        return ""
    return f"{am:.6f}"
