"""8-bit grayscale raster core: PGM I/O, statistics, decimation, sub-pixel
shifting, synthetic noise.

Conventions used throughout the package:

* a *grey image* is a 2-D uint8 numpy array (levels 0..255);
* a *raster* is a 2-D float64 array, produced whenever interpolation makes
  values leave the integer grid; re-quantization happens only at explicit
  ``quantize``/``save_pgm`` boundaries;
* ``RealShift(dx, dy)``: positive dx moves content toward larger column
  indices, positive dy toward larger row indices.  ``shift_bilinear(I, d)``
  therefore samples the input at (i - dy, j - dx).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    OutOfBounds,
    TooSmall,
    TruncatedData,
    UnsupportedMaxval,
)

GREY_LEVELS = 256


@dataclass(frozen=True)
class RealShift:
    """A translation in pixels, possibly fractional."""

    dx: float
    dy: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError(f"shift components must be finite, got ({self.dx}, {self.dy})")

    def __add__(self, other: "RealShift") -> "RealShift":
        return RealShift(self.dx + other.dx, self.dy + other.dy)

    def __sub__(self, other: "RealShift") -> "RealShift":
        return RealShift(self.dx - other.dx, self.dy - other.dy)

    def __neg__(self) -> "RealShift":
        # 0.0 - x keeps plain zeros instead of -0.0
        return RealShift(0.0 - self.dx, 0.0 - self.dy)

    def as_tuple(self) -> tuple[float, float]:
        return (self.dx, self.dy)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class ImageStats:
    mean: float
    variance: float  # population variance (divides by the pixel count)


@dataclass(frozen=True)
class Histogram:
    counts: np.ndarray         # shape (256,), int64
    probabilities: np.ndarray  # counts / total, sums to 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def as_gray(image) -> np.ndarray:
    """Validate/convert an array-like into a 2-D uint8 grey image."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise DimensionMismatch(f"grey image must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise TooSmall("grey image must be non-empty")
    if arr.dtype == np.uint8:
        return arr
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"grey image must have integer dtype, got {arr.dtype}")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("grey levels must lie in [0, 255]")
    return arr.astype(np.uint8)


def as_raster(image) -> np.ndarray:
    """Validate/convert an array-like into a 2-D float64 raster."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"raster must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise TooSmall("raster must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("raster values must be finite")
    return arr


def quantize(raster) -> np.ndarray:
    """Round a real-valued raster to the nearest grey level and clamp to [0, 255]."""
    arr = np.asarray(raster, dtype=np.float64)
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# PGM (binary, P5) I/O
# --------------------------------------------------------------------------

def _parse_pgm(data: bytes) -> np.ndarray:
    if data[:2] != b"P5":
        raise BadMagic("not a binary PGM file (magic 'P5' missing)")
    pos = 2
    tokens: list[int] = []
    # header tokens: width, height, maxval; '#' starts a comment to end of line
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise TruncatedData("PGM header ended before width/height/maxval")
        if data[pos : pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise TruncatedData("PGM comment runs past end of file")
            pos = eol + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tok = data[start:pos]
        if not tok.isdigit():
            raise TruncatedData(f"malformed PGM header token {tok!r}")
        tokens.append(int(tok))
    width, height, maxval = tokens
    if maxval != 255:
        raise UnsupportedMaxval(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise TruncatedData(f"bad PGM dimensions {width}x{height}")
    pos += 1  # exactly one whitespace byte separates maxval from the payload
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise TruncatedData(
            f"PGM payload has {len(payload)} bytes, needs {width * height}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def load_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5, maxval 255) file into a grey image."""
    with open(path, "rb") as fh:
        return _parse_pgm(fh.read())


def save_pgm(image, path) -> None:
    """Write a grey image as binary PGM with the fixed header 'P5\\n{w} {h}\\n255\\n'."""
    img = as_gray(image)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------

def histogram(image) -> Histogram:
    """256-bin grey level histogram with empirical probabilities."""
    img = as_gray(image)
    counts = np.bincount(img.ravel(), minlength=GREY_LEVELS).astype(np.int64)
    return Histogram(counts=counts, probabilities=counts / img.size)


def image_stats(raster) -> ImageStats:
    """Population mean/variance of a grey image or real raster."""
    arr = np.asarray(raster, dtype=np.float64)
    if arr.size == 0:
        raise TooSmall("cannot take statistics of an empty raster")
    return ImageStats(mean=float(arr.mean()), variance=float(arr.var()))


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------

def crop(image, top: int, left: int, height: int, width: int) -> np.ndarray:
    """Copy out the window [top, top+height) x [left, left+width)."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise DimensionMismatch("crop expects a 2-D array")
    if height < 1 or width < 1:
        raise TooSmall(f"crop window must be at least 1x1, got {height}x{width}")
    m, n = arr.shape
    if top < 0 or left < 0 or top + height > m or left + width > n:
        raise OutOfBounds(
            f"crop [{top}:{top + height}, {left}:{left + width}] exceeds {m}x{n}"
        )
    return arr[top : top + height, left : left + width].copy()


def downsample(image) -> np.ndarray:
    """Decimate by 2: keep even rows/columns, no prefiltering.

    Output dims are ceil(M/2) x ceil(N/2); output(i, j) == input(2i, 2j).
    """
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise DimensionMismatch("downsample expects a 2-D array")
    if min(arr.shape) < 2:
        raise TooSmall(f"cannot decimate a {arr.shape[0]}x{arr.shape[1]} image")
    return arr[::2, ::2].copy()


def shift_bilinear(image, shift: RealShift) -> np.ndarray:
    """Translate an image by a real-valued shift with bilinear interpolation.

    Output pixel (i, j) samples the input at (i - dy, j - dx); coordinates
    outside the grid clamp to the nearest edge pixel.  The translation is
    separable, so rows are interpolated first, then columns.  Returns a
    float64 raster (no re-quantization).
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch("shift_bilinear expects a 2-D array")
    m, n = arr.shape
    if max(abs(shift.dx), abs(shift.dy)) >= min(m, n):
        raise OutOfBounds(
            f"|shift| {shift.as_tuple()} must stay below the minimum dimension {min(m, n)}"
        )
    rows = np.clip(np.arange(m, dtype=np.float64) - shift.dy, 0.0, m - 1.0)
    cols = np.clip(np.arange(n, dtype=np.float64) - shift.dx, 0.0, n - 1.0)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, m - 1)
    c1 = np.minimum(c0 + 1, n - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    g = arr[r0, :] * (1.0 - fr) + arr[r1, :] * fr
    return g[:, c0] * (1.0 - fc) + g[:, c1] * fc


def add_gaussian_noise(image, sigma: float, seed: int) -> np.ndarray:
    """Add per-pixel i.i.d. N(0, sigma^2) noise, round, clamp, re-quantize.

    Uses the PCG64 generator so identical (image, sigma, seed) triples give
    identical output on every platform.  sigma == 0 returns the input values
    unchanged.
    """
    img = as_gray(image)
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return img.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, size=img.shape)
    return quantize(noisy)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio (dB) between two equal-size rasters, peak 255."""
    aa = np.asarray(a, dtype=np.float64)
    bb = np.asarray(b, dtype=np.float64)
    if aa.shape != bb.shape:
        raise DimensionMismatch(f"psnr needs equal shapes, got {aa.shape} vs {bb.shape}")
    mse = float(np.mean((aa - bb) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 * 255.0 / mse)
