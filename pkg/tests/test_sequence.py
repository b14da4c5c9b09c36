"""Sequence alignment, stabilization, restore, tracks and frame directories."""

import math

import numpy as np
import pytest

from amreg import (
    LengthMismatch,
    PERFECT,
    RealShift,
    TooFewFrames,
    TrackMismatch,
    align_sequence,
    jitter_variance,
    load_track,
    offset_series,
    psnr,
    quantize,
    restore,
    save_pgm,
    save_track,
    shift_bilinear,
    stabilize,
    track_jitter,
)
from amreg.sequence import TrackEntry, TranslationTrack, read_frame_dir, write_frame_dir


def _frames_from_scene(scene, shifts, margin=8):
    """Crop a fixed window out of shifted copies: frame t is displaced by
    shifts[t] relative to frame 0, with no border-clamp artifacts inside."""
    frames = []
    for s in shifts:
        moved = scene if s.dx == s.dy == 0.0 else quantize(shift_bilinear(scene, s))
        frames.append(np.asarray(moved)[margin:-margin, margin:-margin].copy())
    return frames


def _track(shifts, am=50.0):
    entries = [
        TrackEntry(frame=k, shift=s, am=(PERFECT if k == 0 else am))
        for k, s in enumerate(shifts)
    ]
    return TranslationTrack(entries=entries)


# --------------------------------------------------------------------------
# track container
# --------------------------------------------------------------------------

def test_track_validation():
    with pytest.raises(TooFewFrames):
        TranslationTrack(entries=[])
    with pytest.raises(ValueError):
        TranslationTrack(entries=[TrackEntry(0, RealShift(1, 0), 1.0)])
    with pytest.raises(TrackMismatch):
        TranslationTrack(
            entries=[TrackEntry(0, RealShift(0, 0), PERFECT), TrackEntry(2, RealShift(1, 0), 1.0)]
        )
    track = _track([RealShift(0, 0), RealShift(1, 2)])
    assert len(track) == 2
    assert track.shifts()[1].as_tuple() == (1.0, 2.0)


# --------------------------------------------------------------------------
# alignment
# --------------------------------------------------------------------------

TRUE_SHIFTS = [
    RealShift(0.0, 0.0),
    RealShift(1.3, -0.6),
    RealShift(-0.8, 0.9),
    RealShift(2.1, 1.2),
    RealShift(-1.4, -2.3),
]


def test_align_sequence_first_mode(texture):
    scene = texture(180, seed=41)
    frames = _frames_from_scene(scene, TRUE_SHIFTS)
    track = align_sequence(frames, mode="first", max_shift=6)
    assert track.entries[0].shift.as_tuple() == (0.0, 0.0)
    assert track.entries[0].am == PERFECT
    for entry, truth in zip(track.entries[1:], TRUE_SHIFTS[1:]):
        assert entry.shift.dx == pytest.approx(truth.dx, abs=0.08)
        assert entry.shift.dy == pytest.approx(truth.dy, abs=0.08)


def test_align_sequence_previous_mode_accumulates(texture):
    scene = texture(180, seed=43)
    frames = _frames_from_scene(scene, TRUE_SHIFTS)
    track = align_sequence(frames, mode="previous", max_shift=6)
    for entry, truth in zip(track.entries[1:], TRUE_SHIFTS[1:]):
        assert entry.shift.dx == pytest.approx(truth.dx, abs=0.15)
        assert entry.shift.dy == pytest.approx(truth.dy, abs=0.15)


def test_align_sequence_degrades_bad_frames(texture):
    scene = texture(140, seed=45)
    frames = _frames_from_scene(scene, TRUE_SHIFTS[:4])
    frames[2] = np.full_like(frames[2], 128)  # unregistrable
    track = align_sequence(frames, mode="first", max_shift=6)
    bad = track.entries[2]
    assert bad.shift.as_tuple() == track.entries[1].shift.as_tuple()
    assert math.isnan(bad.am)
    assert bad.flag.startswith("degraded:")
    # the sequence keeps going; frame 3 still registers against frame 0
    assert track.entries[3].shift.dx == pytest.approx(2.1, abs=0.08)


def test_align_sequence_validation(texture):
    frames = [texture(40, seed=1)]
    with pytest.raises(TooFewFrames):
        align_sequence(frames)
    with pytest.raises(ValueError):
        align_sequence(frames * 2, mode="middle")


# --------------------------------------------------------------------------
# stabilize / restore
# --------------------------------------------------------------------------

def test_stabilize_integer_track_is_exact(texture):
    scene = texture(100, seed=47)
    shifts = [RealShift(0, 0), RealShift(2, -3), RealShift(-1, 1)]
    frames = _frames_from_scene(scene, shifts, margin=5)
    out = stabilize(frames, _track(shifts))
    inner = (slice(4, -4), slice(4, -4))
    for frame in out:
        assert np.array_equal(frame[inner], frames[0][inner])


def test_stabilize_zero_entries_copy(texture):
    frames = [texture(24, seed=1), texture(24, seed=1)]
    out = stabilize(frames, _track([RealShift(0, 0), RealShift(0, 0)]))
    assert np.array_equal(out[1], frames[1])
    assert out[1] is not frames[1]
    assert not np.shares_memory(out[1], frames[1])


def test_restore_undoes_stabilize(texture):
    scene = texture(140, seed=49, octaves=3)
    shifts = [RealShift(0, 0), RealShift(0.4, -0.3), RealShift(-1.2, 0.7)]
    frames = _frames_from_scene(scene, shifts)
    track = _track(shifts)
    roundtrip = restore(stabilize(frames, track), track)
    inner = (slice(6, -6), slice(6, -6))
    for original, back in zip(frames[1:], roundtrip[1:]):
        assert psnr(original[inner], back[inner]) >= 30.0


def test_apply_track_length_mismatch(texture):
    frames = [texture(24, seed=1)] * 3
    with pytest.raises(TrackMismatch):
        stabilize(frames, _track([RealShift(0, 0), RealShift(1, 0)]))


# --------------------------------------------------------------------------
# jitter and offsets
# --------------------------------------------------------------------------

def test_jitter_variance_values():
    report = jitter_variance([0, 1, 0, 1], [0, 0, 0, 0])
    assert report.variance_dx == pytest.approx(0.25)
    assert report.variance_dy == 0.0
    with pytest.raises(LengthMismatch):
        jitter_variance([0, 1], [0])
    with pytest.raises(TooFewFrames):
        jitter_variance([0], [0])


def test_track_jitter_reads_the_track():
    track = _track([RealShift(0, 0), RealShift(1, 0), RealShift(0, 0), RealShift(1, 0)])
    assert track_jitter(track).variance_dx == pytest.approx(0.25)


def test_offset_series():
    points = [RealShift(3, 4), RealShift(1, 1)]
    truth = [RealShift(0, 0), RealShift(1, 1)]
    np.testing.assert_allclose(offset_series(points, truth), [5.0, 0.0])
    with pytest.raises(LengthMismatch):
        offset_series(points, truth[:1])


# --------------------------------------------------------------------------
# track files and frame directories
# --------------------------------------------------------------------------

def test_track_round_trip(tmp_path):
    entries = [
        TrackEntry(0, RealShift(0.0, 0.0), PERFECT, None),
        TrackEntry(1, RealShift(1.25, -0.5), 123.456789, None),
        TrackEntry(2, RealShift(1.25, -0.5), math.nan, "degraded: no overlap"),
    ]
    path = tmp_path / "track.json"
    save_track(TranslationTrack(entries=entries), path)
    back = load_track(path)
    assert back.entries[0].am == PERFECT
    assert back.entries[1].shift.as_tuple() == (1.25, -0.5)
    assert back.entries[1].am == pytest.approx(123.456789)
    assert math.isnan(back.entries[2].am)
    assert back.entries[2].flag == "degraded: no overlap"


def test_track_csv_mirror(tmp_path):
    path = tmp_path / "track.json"
    save_track(_track([RealShift(0, 0), RealShift(0.5, 1.0)]), path)
    lines = (tmp_path / "track.csv").read_text().splitlines()
    assert lines[0] == "frame,dx,dy,am,flag"
    assert lines[1] == "0,0.000000,0.000000,perfect,"
    assert lines[2] == "1,0.500000,1.000000,50.000000,"


def test_frame_dir_round_trip(tmp_path, texture):
    frames = [texture(20, seed=s) for s in range(3)]
    paths = write_frame_dir(frames, tmp_path / "seq")
    assert [p.name for p in paths] == ["frame_000000.pgm", "frame_000001.pgm", "frame_000002.pgm"]
    back = read_frame_dir(tmp_path / "seq")
    for a, b in zip(frames, back):
        assert np.array_equal(a, b)


def test_frame_dir_sorts_numerically(tmp_path, texture):
    # frame_2 must come before frame_10 despite the lexicographic order
    d = tmp_path / "seq"
    d.mkdir()
    first = texture(12, seed=1)
    second = texture(12, seed=2)
    save_pgm(second, d / "frame_10.pgm")
    save_pgm(first, d / "frame_2.pgm")
    frames = read_frame_dir(d)
    assert np.array_equal(frames[0], first)
    assert np.array_equal(frames[1], second)


def test_frame_dir_needs_two_frames(tmp_path, texture):
    d = tmp_path / "seq"
    d.mkdir()
    save_pgm(texture(12, seed=1), d / "frame_000000.pgm")
    with pytest.raises(TooFewFrames):
        read_frame_dir(d)
