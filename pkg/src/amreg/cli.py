"""Command-line interface.

Subcommands: register, stabilize, restore, synth, sweep, noise, bench.
Exit codes: 0 success, 2 usage error, 3 I/O error, 4 computation error.
All floating-point output is fixed at 6 decimals; report subcommands write
CSV + JSON mirrors and, unless --no-plot is given, a PNG figure alongside.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import (
    BadMagic,
    RegistrationError,
    TruncatedData,
    UnsupportedMaxval,
    ZeroVariance,
)
from .evaluation import (
    DEFAULT_BENCH_SIZES,
    DEFAULT_FRACTIONS,
    DEFAULT_SIGMAS,
    SynthCase,
    accuracy_sweep,
    make_shifted_pair,
    noise_sweep,
    timing_bench,
    value_noise_texture,
)
from .image import RealShift, load_pgm, save_pgm
from .metric import PERFECT
from .reports import (
    NOISE_FIELDS,
    SWEEP_FIELDS,
    TIMING_FIELDS,
    format_am,
    noise_rows,
    render_noise_figure,
    render_sweep_figure,
    render_timing_figure,
    render_track_figure,
    sweep_rows,
    timing_rows,
    write_table,
)
from .sequence import (
    align_sequence,
    load_track,
    read_frame_dir,
    restore,
    save_track,
    stabilize,
    track_jitter,
    write_frame_dir,
)
from .subpixel import full_register

DEFAULT_TEXTURE_SIZE = 396
DEFAULT_MAX_SHIFT = 16

_MODE_NAMES = {"direct": "direct-bilinear", "supersample": "supersample-decimate"}


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _load_base(args):
    if args.base is not None:
        return load_pgm(args.base)
    return value_noise_texture(args.size, args.size, args.texture_seed)


def _add_base_options(sub) -> None:
    sub.add_argument("--base", type=Path, default=None,
                     help="base PGM image (default: procedural value-noise texture)")
    sub.add_argument("--size", type=int, default=DEFAULT_TEXTURE_SIZE,
                     help="procedural texture size when --base is omitted")
    sub.add_argument("--texture-seed", type=int, default=1,
                     help="seed of the procedural texture")


def _cmd_register(args) -> int:
    reference = load_pgm(args.ref)
    moving = load_pgm(args.mov)
    result = full_register(
        reference, moving, max_shift=args.max_shift, refine_radius=args.refine_radius
    )
    am_text = "perfect" if result.am == PERFECT else round(result.am, 6)
    if args.json:
        payload = {
            "dx": round(result.total.dx, 6),
            "dy": round(result.total.dy, 6),
            "am": am_text,
            "flag": result.flag,
        }
        print(json.dumps(payload))
    else:
        print(f"dx {result.total.dx:.6f}")
        print(f"dy {result.total.dy:.6f}")
        print(f"am {format_am(result.am)}")
        if result.flag:
            print(f"flag {result.flag}")
    return 0


def _cmd_stabilize(args) -> int:
    frames = read_frame_dir(args.frames)
    track = align_sequence(
        frames, mode=args.mode, max_shift=args.max_shift, refine_radius=args.refine_radius
    )
    save_track(track, args.track)
    if not args.no_plot:
        render_track_figure(track, Path(args.track).with_suffix(".png"))
    write_frame_dir(stabilize(frames, track), args.out)
    jitter = track_jitter(track)
    print(f"frames {len(track)}")
    print(f"jitter_variance_dx {jitter.variance_dx:.6f}")
    print(f"jitter_variance_dy {jitter.variance_dy:.6f}")
    return 0


def _cmd_restore(args) -> int:
    frames = read_frame_dir(args.frames)
    track = load_track(args.track)
    write_frame_dir(restore(frames, track), args.out)
    print(f"frames {len(track)}")
    return 0


def _cmd_synth(args) -> int:
    base = _load_base(args)
    case = SynthCase(
        shift=RealShift(args.dx, args.dy),
        sigma=args.noise,
        seed=args.seed,
        mode=_MODE_NAMES[args.mode],
    )
    reference, moving, truth = make_shifted_pair(base, case)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_pgm(reference, out / "reference.pgm")
    save_pgm(moving, out / "moving.pgm")
    payload = {
        "dx": round(truth.dx, 6),
        "dy": round(truth.dy, 6),
        "sigma": round(case.sigma, 6),
        "seed": case.seed,
        "mode": case.mode,
    }
    (out / "truth.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"reference {out / 'reference.pgm'}")
    print(f"moving {out / 'moving.pgm'}")
    print(f"dx {truth.dx:.6f}")
    print(f"dy {truth.dy:.6f}")
    return 0


def _cmd_sweep(args) -> int:
    base = _load_base(args)
    report = accuracy_sweep(
        base, args.fractions, mode=_MODE_NAMES[args.mode], seed=args.seed
    )
    write_table(sweep_rows(report), SWEEP_FIELDS, args.out)
    if not args.no_plot:
        render_sweep_figure(report, Path(args.out).with_suffix(".png"))
    print(f"cases {len(report.rows)}")
    print(f"max_abs_err_x {report.max_abs_err_x:.6f}")
    print(f"max_abs_err_y {report.max_abs_err_y:.6f}")
    print(f"seconds {report.seconds:.6f}")
    return 0


def _cmd_noise(args) -> int:
    base = _load_base(args)
    rows = noise_sweep(base, args.sigmas, args.trials, seed0=args.seed)
    write_table(noise_rows(rows), NOISE_FIELDS, args.out)
    if not args.no_plot:
        render_noise_figure(rows, Path(args.out).with_suffix(".png"))
    for row in rows:
        print(f"sigma {row.sigma:.6f} rmse_x {row.rmse_x:.6f} rmse_y {row.rmse_y:.6f}")
    return 0


def _cmd_bench(args) -> int:
    report = timing_bench(args.sizes, runs=args.runs, seed=args.seed)
    write_table(timing_rows(report), TIMING_FIELDS, args.out)
    if not args.no_plot:
        render_timing_figure(report, Path(args.out).with_suffix(".png"))
    for row in report.rows:
        print(f"dim {row.dim} seconds_median {row.seconds_median:.6f} am_evals {row.am_evals}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amreg",
        description="Translation-only image registration via the alignment metric",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("register", help="register one image pair")
    p.add_argument("--ref", type=Path, required=True, help="reference PGM")
    p.add_argument("--mov", type=Path, required=True, help="moving PGM")
    p.add_argument("--json", action="store_true", help="emit a JSON object")
    p.add_argument("--max-shift", type=int, default=DEFAULT_MAX_SHIFT,
                   help="largest whole-pixel displacement searched")
    p.add_argument("--refine-radius", type=int, default=3,
                   help="per-level refinement box half-width")
    p.set_defaults(func=_cmd_register)

    p = subs.add_parser("stabilize", help="align a frame directory and cancel its jitter")
    p.add_argument("--frames", type=Path, required=True, help="directory of frame_NNNNNN.pgm")
    p.add_argument("--out", type=Path, required=True, help="output frame directory")
    p.add_argument("--mode", choices=("first", "previous"), default="first")
    p.add_argument("--track", type=Path, required=True, help="track JSON path (CSV mirror beside it)")
    p.add_argument("--max-shift", type=int, default=DEFAULT_MAX_SHIFT)
    p.add_argument("--refine-radius", type=int, default=3)
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=_cmd_stabilize)

    p = subs.add_parser("restore", help="re-apply a saved track to stabilized frames")
    p.add_argument("--frames", type=Path, required=True)
    p.add_argument("--track", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_restore)

    p = subs.add_parser("synth", help="generate a synthetic shifted pair with known truth")
    _add_base_options(p)
    p.add_argument("--dx", type=float, required=True)
    p.add_argument("--dy", type=float, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian sigma in grey levels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=tuple(_MODE_NAMES), default="direct")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = subs.add_parser("sweep", help="accuracy sweep over fractional shifts")
    _add_base_options(p)
    p.add_argument("--fractions", type=_float_list, default=list(DEFAULT_FRACTIONS),
                   help="comma-separated fractions in [0, 1)")
    p.add_argument("--mode", choices=tuple(_MODE_NAMES), default="supersample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="CSV path (JSON/PNG beside it)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("noise", help="noise-robustness sweep at a fixed 0.5-pixel shift")
    _add_base_options(p)
    p.add_argument("--sigmas", type=_float_list, default=list(DEFAULT_SIGMAS),
                   help="comma-separated Gaussian sigmas")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_noise)

    p = subs.add_parser("bench", help="median registration wall time per image size")
    p.add_argument("--sizes", type=_int_list, default=list(DEFAULT_BENCH_SIZES),
                   help="comma-separated square image sizes")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, BadMagic, UnsupportedMaxval, TruncatedData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ZeroVariance as exc:
        print(f"error: zero-variance input ({exc})", file=sys.stderr)
        return 4
    except RegistrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
