"""Synthetic ground-truth evaluation: textures, shifted pairs, oracles,
accuracy/noise sweeps and a timing bench.

Ground truth comes from construction, never from the solver: pairs are made
by shifting a known texture, and the reference minimizer (`grid_oracle`) is
a dense scan of explicitly interpolated cross-variance values that shares
only the raster core and the metric with the solver, none of its polynomial
machinery.
"""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, TooSmall, ZeroVariance
from .image import (
    RealShift,
    add_gaussian_noise,
    as_gray,
    quantize,
    shift_bilinear,
)
from .metric import interactive_variance
from .search import SearchStats
from .subpixel import full_register

PAIR_MODES = ("direct-bilinear", "supersample-decimate")
DEFAULT_FRACTIONS = tuple(round(0.1 * k, 10) for k in range(1, 10))
DEFAULT_BENCH_SIZES = (100, 200, 400, 800, 1000)
DEFAULT_SIGMAS = (0.0, 1.0, 2.0, 3.0)
MAX_SYNTH_SHIFT = 8.0


# --------------------------------------------------------------------------
# procedural texture
# --------------------------------------------------------------------------

def _fade(t: np.ndarray) -> np.ndarray:
    # smoothstep with zero first/second derivative at the lattice points
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def value_noise_texture(
    height: int,
    width: int,
    seed: int,
    *,
    octaves: int = 5,
    base_cells: int = 4,
    decay: float = 0.55,
) -> np.ndarray:
    """Seeded multi-octave value noise, normalized to the full grey range.

    Each octave interpolates a random lattice (PCG64-seeded) with a smooth
    fade; octave lattices double in resolution while their amplitude decays.
    Deterministic in (dims, seed, knobs); needs no binary fixture assets.
    """
    if height < 2 or width < 2:
        raise TooSmall(f"texture must be at least 2x2, got {height}x{width}")
    rng = np.random.Generator(np.random.PCG64(seed))
    acc = np.zeros((height, width))
    amplitude = 1.0
    cells = base_cells
    for _ in range(octaves):
        lattice = rng.random((cells + 1, cells + 1))
        ys = np.linspace(0.0, cells, height)
        xs = np.linspace(0.0, cells, width)
        yi = np.minimum(ys.astype(np.intp), cells - 1)
        xi = np.minimum(xs.astype(np.intp), cells - 1)
        fy = _fade(ys - yi)[:, None]
        fx = _fade(xs - xi)[None, :]
        tl = lattice[np.ix_(yi, xi)]
        tr = lattice[np.ix_(yi, xi + 1)]
        bl = lattice[np.ix_(yi + 1, xi)]
        br = lattice[np.ix_(yi + 1, xi + 1)]
        top = tl * (1.0 - fx) + tr * fx
        bottom = bl * (1.0 - fx) + br * fx
        acc += amplitude * (top * (1.0 - fy) + bottom * fy)
        amplitude *= decay
        cells *= 2
    lo, hi = float(acc.min()), float(acc.max())
    if hi <= lo:
        raise ZeroVariance("degenerate texture (constant noise field)")
    return quantize((acc - lo) / (hi - lo) * 255.0)


# --------------------------------------------------------------------------
# synthetic shifted pairs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthCase:
    """Recipe for one synthetic pair: shift, noise level, seed, generation mode."""

    shift: RealShift
    sigma: float = 0.0
    seed: int = 0
    mode: str = "direct-bilinear"
    base_id: str = ""

    def __post_init__(self) -> None:
        if max(abs(self.shift.dx), abs(self.shift.dy)) >= MAX_SYNTH_SHIFT:
            raise ValueError(f"|shift| components must stay below {MAX_SYNTH_SHIFT}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.mode not in PAIR_MODES:
            raise ValueError(f"mode must be one of {PAIR_MODES}, got {self.mode!r}")


def make_shifted_pair(base, case: SynthCase) -> tuple[np.ndarray, np.ndarray, RealShift]:
    """Build (reference, moving, truth) with moving = reference shifted by truth.

    direct-bilinear shifts the base with shift_bilinear and re-quantizes;
    supersample-decimate shifts a 2x nearest-neighbor upsampled raster by
    twice the shift and decimates by averaging each 2x2 block, which halves
    the interpolation blur radius in original-pixel units and so reduces
    generation bias.  (Keep-even decimation would double the effective
    shift: the fractional mix then straddles nearest-neighbor block
    boundaries.)  Both
    crop a common interior (margin ceil(max |component|) + 2) so edge-clamp
    artifacts never enter the pair.  Noise, when requested, is added to both
    images independently (seeds 2*seed and 2*seed + 1).
    """
    img = as_gray(base)
    m, n = img.shape
    margin = math.ceil(max(abs(case.shift.dx), abs(case.shift.dy))) + 2
    if m - 2 * margin < 8 or n - 2 * margin < 8:
        raise TooSmall(
            f"{m}x{n} base cannot spare a {margin}-pixel margin on every side"
        )
    if case.mode == "direct-bilinear":
        moved = shift_bilinear(img, case.shift)
    else:
        up = np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)
        doubled = RealShift(2.0 * case.shift.dx, 2.0 * case.shift.dy)
        s = shift_bilinear(up, doubled)
        moved = (s[0::2, 0::2] + s[1::2, 0::2] + s[0::2, 1::2] + s[1::2, 1::2]) / 4.0
    window = (slice(margin, m - margin), slice(margin, n - margin))
    reference = img[window].copy()
    moving = quantize(moved[window])
    if case.sigma > 0:
        reference = add_gaussian_noise(reference, case.sigma, 2 * case.seed)
        moving = add_gaussian_noise(moving, case.sigma, 2 * case.seed + 1)
    return reference, moving, case.shift


# --------------------------------------------------------------------------
# dense grid oracle
# --------------------------------------------------------------------------

def _grid_offsets(step: float) -> np.ndarray:
    if not (0.0 < step <= 0.1):
        raise ValueError(f"grid step must lie in (0, 0.1], got {step}")
    k = int(math.floor((1.0 - step) / step + 1e-9))
    return (np.arange(-k, k + 1)) * step


def _iv_map_fast(const: np.ndarray, vary: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Interactive variance of `vary`, bilinearly sampled at every grid
    offset, grouped by `const`, over the 1-pixel-inset interior.

    Entry [iy, ix] corresponds to sampling vary at (i - dy, j - dx) with
    dy = offsets[iy], dx = offsets[ix].  Row interpolations are shared per
    dy, and the per-level group sums recombine linearly across dx because
    the column mix is linear; the result is bit-for-bit the same bilinear
    evaluation a per-candidate loop would produce.
    """
    m, n = const.shape
    rows = np.arange(1, m - 1)
    cols = np.arange(1, n - 1)
    levels = const[1 : m - 1, 1 : n - 1].ravel()
    counts = np.bincount(levels, minlength=256)
    occ = counts > 0
    cnt = counts[occ].astype(np.float64)
    v = np.asarray(vary, dtype=np.float64)
    dsize = float(levels.size)

    # column sampling offsets: ox = -dx in (-1, 1); base -1 or 0
    ox = -offsets
    bx = np.floor(ox).astype(np.intp)
    tx = ox - bx
    sel_a = bx + 1  # which of the three column slices is the left neighbor
    w0 = 1.0 - tx
    w1 = tx

    out = np.empty((offsets.size, offsets.size))
    for iy, dy in enumerate(offsets):
        oy = -dy
        by = math.floor(oy)
        ty = oy - by
        r = v[rows + by, :] * (1.0 - ty) + v[rows + by + 1, :] * ty
        slabs = [r[:, cols - 1].ravel(), r[:, cols].ravel(), r[:, cols + 1].ravel()]
        group_sums = np.stack(
            [np.bincount(levels, weights=s, minlength=256)[occ] for s in slabs]
        )
        dots = np.array(
            [
                [float(np.dot(slabs[i], slabs[j])) for j in range(3)]
                for i in range(3)
            ]
        )
        sa = group_sums[sel_a]          # (noff, nlevels)
        sb = group_sums[sel_a + 1]
        sv = w0[:, None] * sa + w1[:, None] * sb
        grouped = np.einsum("kc,kc,c->k", sv, sv, 1.0 / cnt)
        total_sq = (
            w0 * w0 * dots[sel_a, sel_a]
            + 2.0 * w0 * w1 * dots[sel_a, sel_a + 1]
            + w1 * w1 * dots[sel_a + 1, sel_a + 1]
        )
        out[iy, :] = (total_sq - grouped) / dsize
    return out


def _iv_at_offset(const: np.ndarray, vary: np.ndarray, f: RealShift) -> float:
    """One candidate of the naive path: explicit shift, then the metric."""
    shifted = shift_bilinear(vary, f)
    m, n = const.shape
    win = (slice(1, m - 1), slice(1, n - 1))
    return interactive_variance(const[win], shifted[win])


def grid_oracle(i1, i2, step: float = 0.005, *, method: str = "fast") -> RealShift:
    """Dense-scan minimizer of the explicitly interpolated cross variance.

    Evaluates ci(f) = iv(i1, shift(i2, f))/var2 + iv(i2, shift(i1, -f))/var1
    on the grid {-1+step, ..., 1-step}^2 and returns the argmin, in the same
    sign convention as subpixel_register (f is i1's displacement relative to
    i2).  Variances are held fixed from the unshifted interiors.  Ties break
    to the first candidate in (dy, dx) scan order.

    This oracle is deliberately independent of the sub-pixel solver: it uses
    only bilinear sampling and grouped variances.  method="naive" evaluates
    every candidate with a literal shift_bilinear call; the default "fast"
    path shares row interpolations across the grid but computes the exact
    same quantities (asserted against "naive" in the test suite).
    """
    a1 = as_gray(i1)
    a2 = as_gray(i2)
    if a1.shape != a2.shape:
        raise DimensionMismatch(f"shapes differ: {a1.shape} vs {a2.shape}")
    m, n = a1.shape
    if m < 4 or n < 4:
        raise TooSmall(f"grid oracle needs at least 4x4 images, got {m}x{n}")
    offsets = _grid_offsets(step)
    win = (slice(1, m - 1), slice(1, n - 1))
    var1 = float(a1[win].astype(np.float64).var())
    var2 = float(a2[win].astype(np.float64).var())
    if var1 == 0.0 or var2 == 0.0:
        raise ZeroVariance("grid oracle needs non-constant interiors")

    if method == "fast":
        term1 = _iv_map_fast(a1, a2, offsets)          # [dy, dx] of f
        term2 = _iv_map_fast(a2, a1, offsets)          # [dy, dx] of -f
        ci = term1 / var2 + term2[::-1, ::-1] / var1
    elif method == "naive":
        ci = np.empty((offsets.size, offsets.size))
        for iy, dy in enumerate(offsets):
            for ix, dx in enumerate(offsets):
                f = RealShift(dx, dy)
                ci[iy, ix] = (
                    _iv_at_offset(a1, a2, f) / var2
                    + _iv_at_offset(a2, a1, -f) / var1
                )
    else:
        raise ValueError(f"unknown grid_oracle method {method!r}")

    iy, ix = np.unravel_index(int(np.argmin(ci)), ci.shape)
    return RealShift(dx=float(offsets[ix]), dy=float(offsets[iy]))


# --------------------------------------------------------------------------
# sweeps and bench
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    tx: float
    ty: float
    ex: float
    ey: float

    @property
    def abs_err_x(self) -> float:
        return abs(self.ex - self.tx)

    @property
    def abs_err_y(self) -> float:
        return abs(self.ey - self.ty)


@dataclass(frozen=True)
class SweepReport:
    rows: list[SweepRow]
    seconds: float

    @property
    def max_abs_err_x(self) -> float:
        return max(r.abs_err_x for r in self.rows)

    @property
    def max_abs_err_y(self) -> float:
        return max(r.abs_err_y for r in self.rows)


def accuracy_sweep(
    base,
    fractions=DEFAULT_FRACTIONS,
    *,
    mode: str = "supersample-decimate",
    seed: int = 0,
) -> SweepReport:
    """Register synthetic pairs over the Cartesian grid of fractional shifts.

    Each (fx, fy) pair becomes a make_shifted_pair case with that exact
    truth; the report rows carry truth, estimate, and per-axis absolute
    errors.  Fractions must lie in [0, 1).
    """
    fractions = list(fractions)
    if any(not (0.0 <= f < 1.0) for f in fractions):
        raise ValueError(f"fractions must lie in [0, 1), got {fractions}")
    t0 = time.perf_counter()
    rows = []
    for ty in fractions:
        for tx in fractions:
            case = SynthCase(shift=RealShift(tx, ty), mode=mode, seed=seed)
            reference, moving, truth = make_shifted_pair(base, case)
            result = full_register(reference, moving, max_shift=2)
            rows.append(
                SweepRow(tx=truth.dx, ty=truth.dy, ex=result.total.dx, ey=result.total.dy)
            )
    return SweepReport(rows=rows, seconds=time.perf_counter() - t0)


@dataclass(frozen=True)
class NoiseRow:
    sigma: float
    rmse_x: float
    rmse_y: float
    trials: int


def noise_sweep(
    base,
    sigmas=DEFAULT_SIGMAS,
    trials: int = 10,
    *,
    shift: RealShift = RealShift(0.5, 0.5),
    mode: str = "supersample-decimate",
    seed0: int = 0,
) -> list[NoiseRow]:
    """Per-sigma RMSE of the recovered shift at a fixed fractional truth.

    The protocol holds the shift at 0.5 per axis and varies only the noise
    realization across trials; RMSE against the constructed truth stands in
    for an estimator-efficiency readout.
    """
    if trials < 1:
        raise ValueError(f"need at least 1 trial, got {trials}")
    rows = []
    for sigma in sigmas:
        errs_x, errs_y = [], []
        for t in range(trials):
            case = SynthCase(shift=shift, sigma=float(sigma), seed=seed0 + t, mode=mode)
            reference, moving, truth = make_shifted_pair(base, case)
            result = full_register(reference, moving, max_shift=2)
            errs_x.append(result.total.dx - truth.dx)
            errs_y.append(result.total.dy - truth.dy)
        rows.append(
            NoiseRow(
                sigma=float(sigma),
                rmse_x=float(np.sqrt(np.mean(np.square(errs_x)))),
                rmse_y=float(np.sqrt(np.mean(np.square(errs_y)))),
                trials=trials,
            )
        )
    return rows


@dataclass(frozen=True)
class TimingRow:
    dim: int
    seconds_median: float
    am_evals: int


@dataclass(frozen=True)
class TimingReport:
    rows: list[TimingRow] = field(default_factory=list)


def timing_bench(
    sizes=DEFAULT_BENCH_SIZES,
    *,
    runs: int = 5,
    seed: int = 7,
    shift: RealShift = RealShift(2.3, 1.6),
) -> TimingReport:
    """Median full_register wall time per square image size.

    Pairs are generated so the registered images are exactly dim x dim;
    am_evals counts every coarse-search placement visited in one run.
    """
    if runs < 1:
        raise ValueError(f"need at least 1 run, got {runs}")
    margin = math.ceil(max(abs(shift.dx), abs(shift.dy))) + 2
    rows = []
    for dim in sizes:
        base = value_noise_texture(dim + 2 * margin, dim + 2 * margin, seed + dim)
        case = SynthCase(shift=shift, mode="direct-bilinear", seed=seed)
        reference, moving, _ = make_shifted_pair(base, case)
        times = []
        stats = SearchStats()
        for _ in range(runs):
            stats = SearchStats()
            t0 = time.perf_counter()
            full_register(reference, moving, max_shift=8, stats=stats)
            times.append(time.perf_counter() - t0)
        rows.append(
            TimingRow(
                dim=dim,
                seconds_median=float(statistics.median(times)),
                am_evals=stats.am_evaluations,
            )
        )
    return TimingReport(rows=rows)
