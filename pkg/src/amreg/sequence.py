"""Frame-sequence alignment: tracks, stabilization, de-flicker restore.

A track entry t holds the translation of frame t relative to frame 0;
negating it and shifting aligns frame t onto frame 0.  Two alignment modes:
"first" registers every frame directly against frame 0, "previous" registers
each frame against its predecessor and accumulates the per-step shifts.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    LengthMismatch,
    RegistrationError,
    TooFewFrames,
    TrackMismatch,
)
from .image import RealShift, load_pgm, quantize, save_pgm, shift_bilinear
from .metric import PERFECT
from .subpixel import full_register

log = logging.getLogger(__name__)

MODES = ("first", "previous")
FRAME_PATTERN = "frame_{:06d}.pgm"


@dataclass(frozen=True)
class TrackEntry:
    frame: int
    shift: RealShift
    am: float
    flag: str | None = None


@dataclass(frozen=True)
class TranslationTrack:
    entries: list[TrackEntry]

    def __post_init__(self) -> None:
        if not self.entries:
            raise TooFewFrames("a track needs at least one entry")
        first = self.entries[0]
        if first.shift.dx != 0.0 or first.shift.dy != 0.0:
            raise ValueError("track entry 0 must be the zero shift")
        for k, entry in enumerate(self.entries):
            if entry.frame != k:
                raise TrackMismatch(f"entry {k} carries frame index {entry.frame}")

    def __len__(self) -> int:
        return len(self.entries)

    def shifts(self) -> list[RealShift]:
        return [e.shift for e in self.entries]


@dataclass(frozen=True)
class JitterReport:
    variance_dx: float  # population variance of the dx series (px^2)
    variance_dy: float


def align_sequence(
    frames,
    mode: str = "first",
    *,
    max_shift: int = 16,
    refine_radius: int = 3,
) -> TranslationTrack:
    """Register a frame list into a TranslationTrack.

    A frame whose registration raises a RegistrationError degrades to the
    previous frame's shift and carries a "degraded: ..." flag instead of
    aborting the whole sequence.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    frames = list(frames)
    if len(frames) < 2:
        raise TooFewFrames(f"alignment needs at least 2 frames, got {len(frames)}")

    entries = [TrackEntry(frame=0, shift=RealShift(0.0, 0.0), am=PERFECT)]
    accumulated = RealShift(0.0, 0.0)
    for t in range(1, len(frames)):
        reference = frames[0] if mode == "first" else frames[t - 1]
        try:
            result = full_register(
                reference, frames[t], max_shift=max_shift, refine_radius=refine_radius
            )
            if mode == "first":
                accumulated = result.total
            else:
                accumulated = accumulated + result.total
            entries.append(
                TrackEntry(frame=t, shift=accumulated, am=result.am, flag=result.flag)
            )
        except RegistrationError as exc:
            log.warning("frame %d failed to register (%s); reusing previous shift", t, exc)
            entries.append(
                TrackEntry(frame=t, shift=accumulated, am=math.nan, flag=f"degraded: {exc}")
            )
    return TranslationTrack(entries=entries)


def _apply_track(frames, track: TranslationTrack, sign: float) -> list[np.ndarray]:
    frames = list(frames)
    if len(frames) != len(track):
        raise TrackMismatch(f"{len(frames)} frames vs {len(track)} track entries")
    out = []
    for frame, entry in zip(frames, track.entries):
        s = entry.shift
        if s.dx == 0.0 and s.dy == 0.0:
            out.append(np.asarray(frame, dtype=np.uint8).copy())
        else:
            shifted = shift_bilinear(frame, RealShift(sign * s.dx, sign * s.dy))
            out.append(quantize(shifted))
    return out


def stabilize(frames, track: TranslationTrack) -> list[np.ndarray]:
    """Cancel each frame's tracked shift (re-quantized to 8-bit)."""
    return _apply_track(frames, track, sign=-1.0)


def restore(frames, track: TranslationTrack) -> list[np.ndarray]:
    """Re-apply the tracked shifts, undoing stabilize up to interpolation."""
    return _apply_track(frames, track, sign=+1.0)


def jitter_variance(dxs, dys) -> JitterReport:
    """Per-axis population variance of a shift series."""
    dxs = np.asarray(dxs, dtype=np.float64)
    dys = np.asarray(dys, dtype=np.float64)
    if dxs.shape != dys.shape:
        raise LengthMismatch(f"{dxs.shape} dx values vs {dys.shape} dy values")
    if dxs.size < 2:
        raise TooFewFrames("jitter variance needs at least 2 samples")
    return JitterReport(variance_dx=float(dxs.var()), variance_dy=float(dys.var()))


def track_jitter(track: TranslationTrack) -> JitterReport:
    return jitter_variance(
        [e.shift.dx for e in track.entries], [e.shift.dy for e in track.entries]
    )


def offset_series(points, truth) -> np.ndarray:
    """Euclidean distance of each estimated shift from its ground truth."""
    points = list(points)
    truth = list(truth)
    if len(points) != len(truth):
        raise LengthMismatch(f"{len(points)} estimates vs {len(truth)} truths")
    return np.array(
        [math.hypot(p.dx - t.dx, p.dy - t.dy) for p, t in zip(points, truth)]
    )


# --------------------------------------------------------------------------
# track files and frame directories
# --------------------------------------------------------------------------

def _am_to_json(am: float):
    if am == PERFECT:
        return "perfect"
    if math.isnan(am):
        return None
    return round(am, 6)


def save_track(track: TranslationTrack, json_path) -> None:
    """Write a track as JSON plus a CSV mirror next to it (same stem)."""
    json_path = Path(json_path)
    rows = [
        {
            "frame": e.frame,
            "dx": round(e.shift.dx, 6),
            "dy": round(e.shift.dy, 6),
            "am": _am_to_json(e.am),
            "flag": e.flag,
        }
        for e in track.entries
    ]
    json_path.write_text(json.dumps(rows, indent=2) + "\n")
    with open(json_path.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "dx", "dy", "am", "flag"])
        for e in track.entries:
            am = "perfect" if e.am == PERFECT else ("" if math.isnan(e.am) else f"{e.am:.6f}")
            writer.writerow(
                [e.frame, f"{e.shift.dx:.6f}", f"{e.shift.dy:.6f}", am, e.flag or ""]
            )


def load_track(json_path) -> TranslationTrack:
    rows = json.loads(Path(json_path).read_text())
    entries = []
    for row in rows:
        am = row.get("am")
        if am == "perfect":
            am_val = PERFECT
        elif am is None:
            am_val = math.nan
        else:
            am_val = float(am)
        entries.append(
            TrackEntry(
                frame=int(row["frame"]),
                shift=RealShift(float(row["dx"]), float(row["dy"])),
                am=am_val,
                flag=row.get("flag"),
            )
        )
    return TranslationTrack(entries=entries)


_FRAME_RE = re.compile(r"frame_(\d+)\.pgm$")


def read_frame_dir(directory) -> list[np.ndarray]:
    """Load frame_NNNNNN.pgm files in frame-number order."""
    directory = Path(directory)
    found = []
    for path in directory.iterdir():
        match = _FRAME_RE.fullmatch(path.name)
        if match:
            found.append((int(match.group(1)), path))
    if len(found) < 2:
        raise TooFewFrames(f"{directory} holds {len(found)} frame files, need at least 2")
    return [load_pgm(path) for _, path in sorted(found)]


def write_frame_dir(frames, directory) -> list[Path]:
    """Write frames as zero-padded frame_NNNNNN.pgm files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, frame in enumerate(frames):
        path = directory / FRAME_PATTERN.format(k)
        save_pgm(frame, path)
        paths.append(path)
    return paths
