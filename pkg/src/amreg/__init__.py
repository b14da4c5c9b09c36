"""amreg: translation-only image registration via an alignment metric.

Integer-pixel motion is found with a coarse-to-fine pyramid search over an
alignment-metric similarity map; the sub-pixel remainder is solved in closed
form from the stationarity system of a bivariate cross-variance polynomial.
Includes sequence stabilization, a synthetic-ground-truth evaluation harness
and a CLI (``amreg``).
"""

__version__ = "0.1.0"

from .errors import (
    BadMagic,
    DegenerateSystem,
    DimensionMismatch,
    LengthMismatch,
    NoValidOffset,
    OutOfBounds,
    RegistrationError,
    TooFewFrames,
    TooSmall,
    TrackMismatch,
    TruncatedData,
    UnsupportedMaxval,
    ZeroPolynomial,
    ZeroVariance,
)
from .image import (
    Histogram,
    ImageStats,
    RealShift,
    add_gaussian_noise,
    crop,
    downsample,
    histogram,
    image_stats,
    load_pgm,
    psnr,
    quantize,
    save_pgm,
    shift_bilinear,
)
from .metric import (
    PERFECT,
    CiAmScore,
    ConditionalStats,
    alignment_metric,
    conditional_stats,
    cross_variance,
    interactive_variance,
)
from .search import (
    AmMatrix,
    IntegerShift,
    Pyramid,
    SearchStats,
    SearchWindow,
    am_map,
    build_pyramid,
    coarse_register,
    pyramid_depth,
)
from .subpixel import (
    BilinearCoeffGrid,
    DerivativeSystem,
    FractionalShift,
    PolyXY,
    Quadrant,
    QuinticPoly,
    RegistrationResult,
    bilinear_coeff_grid,
    centered_objective,
    ci_poly,
    derivative_system,
    full_register,
    reduce_to_quintic,
    solve_quintic,
    subpixel_register,
)
from .sequence import (
    JitterReport,
    TrackEntry,
    TranslationTrack,
    align_sequence,
    jitter_variance,
    load_track,
    offset_series,
    restore,
    save_track,
    stabilize,
    track_jitter,
)
from .evaluation import (
    SynthCase,
    SweepReport,
    TimingReport,
    accuracy_sweep,
    grid_oracle,
    make_shifted_pair,
    noise_sweep,
    timing_bench,
    value_noise_texture,
)

__all__ = [name for name in dir() if not name.startswith("_")]
