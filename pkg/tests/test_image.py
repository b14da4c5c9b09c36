"""Raster core: PGM I/O, quantization, decimation, bilinear shifting."""

import math

import numpy as np
import pytest

from amreg import (
    BadMagic,
    DimensionMismatch,
    OutOfBounds,
    RealShift,
    TooSmall,
    TruncatedData,
    UnsupportedMaxval,
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
from amreg.image import _parse_pgm, as_gray


# --------------------------------------------------------------------------
# RealShift
# --------------------------------------------------------------------------

def test_realshift_arithmetic():
    a = RealShift(1.5, -2.0)
    b = RealShift(0.5, 3.0)
    assert (a + b).as_tuple() == (2.0, 1.0)
    assert (a - b).as_tuple() == (1.0, -5.0)
    assert (-a).as_tuple() == (-1.5, 2.0)
    assert RealShift(3, 4).magnitude == 5.0


def test_realshift_neg_avoids_signed_zero():
    z = -RealShift(0.0, 0.0)
    assert math.copysign(1.0, z.dx) == 1.0
    assert math.copysign(1.0, z.dy) == 1.0


def test_realshift_coerces_to_float():
    s = RealShift(1, 2)
    assert isinstance(s.dx, float) and isinstance(s.dy, float)


@pytest.mark.parametrize("bad", [(math.nan, 0), (0, math.inf), (-math.inf, 1)])
def test_realshift_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        RealShift(*bad)


# --------------------------------------------------------------------------
# conversions and quantization
# --------------------------------------------------------------------------

def test_as_gray_accepts_int_lists():
    img = as_gray([[0, 255], [128, 7]])
    assert img.dtype == np.uint8
    assert img.tolist() == [[0, 255], [128, 7]]


def test_as_gray_rejects_bad_inputs():
    with pytest.raises(DimensionMismatch):
        as_gray([1, 2, 3])
    with pytest.raises(ValueError):
        as_gray([[0, 256]])
    with pytest.raises(ValueError):
        as_gray([[-1, 0]])
    with pytest.raises(ValueError):
        as_gray(np.zeros((2, 2), dtype=np.float64))


def test_quantize_rounds_and_clamps():
    out = quantize([[0.4, 0.6, 300.0], [-3.0, 254.5, 255.6]])
    assert out.dtype == np.uint8
    assert out.tolist() == [[0, 1, 255], [0, 254, 255]]


def test_quantize_rounds_half_to_even():
    assert quantize([[0.5, 1.5, 2.5]]).tolist() == [[0, 2, 2]]


# --------------------------------------------------------------------------
# PGM
# --------------------------------------------------------------------------

def test_save_pgm_exact_bytes(tmp_path):
    path = tmp_path / "one.pgm"
    save_pgm(np.array([[42]], dtype=np.uint8), path)
    assert path.read_bytes() == b"P5\n1 1\n255\n\x2a"


def test_parse_pgm_tolerates_comments():
    data = b"P5\n# made by hand\n2 2\n# again\n255\n\x01\x02\x03\x04"
    assert _parse_pgm(data).tolist() == [[1, 2], [3, 4]]


def test_pgm_round_trip(tmp_path, rng):
    path = tmp_path / "rt.pgm"
    for _ in range(20):
        h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        img = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
        save_pgm(img, path)
        assert np.array_equal(load_pgm(path), img)


def test_pgm_errors():
    with pytest.raises(BadMagic):
        _parse_pgm(b"P2\n1 1\n255\n\x00")
    with pytest.raises(UnsupportedMaxval):
        _parse_pgm(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(TruncatedData):
        _parse_pgm(b"P5\n2 2\n255\n\x01\x02")  # payload short
    with pytest.raises(TruncatedData):
        _parse_pgm(b"P5\n2 ")  # header ends early
    with pytest.raises(TruncatedData):
        _parse_pgm(b"P5\nab 2\n255\n")  # non-numeric token


def test_load_pgm_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_pgm(tmp_path / "nope.pgm")


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------

def test_histogram_counts():
    h = histogram([[0, 0, 7], [7, 7, 255]])
    assert h.total == 6
    assert h.counts[0] == 2 and h.counts[7] == 3 and h.counts[255] == 1
    assert h.probabilities.sum() == pytest.approx(1.0)


def test_image_stats_population():
    # mean (10+20+30+30)/4 = 22.5; var = mean of squares - 22.5^2 = 68.75
    stats = image_stats(np.array([[10, 20], [30, 30]], dtype=np.uint8))
    assert stats.mean == pytest.approx(22.5)
    assert stats.variance == pytest.approx(68.75)


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------

def test_crop_contents_and_bounds():
    arr = np.arange(30, dtype=np.uint8).reshape(5, 6)
    win = crop(arr, 1, 2, 3, 2)
    assert win.tolist() == [[8, 9], [14, 15], [20, 21]]
    with pytest.raises(OutOfBounds):
        crop(arr, 3, 0, 3, 2)
    with pytest.raises(TooSmall):
        crop(arr, 0, 0, 0, 2)


def test_downsample_keeps_even_indices():
    arr = np.arange(25).reshape(5, 5)
    assert downsample(arr).tolist() == [[0, 2, 4], [10, 12, 14], [20, 22, 24]]
    assert downsample(np.zeros((4, 4))).shape == (2, 2)
    with pytest.raises(TooSmall):
        downsample(np.zeros((1, 5)))


def test_shift_bilinear_hand_value():
    img = np.array([[0, 10], [20, 40]], dtype=np.uint8)
    out = shift_bilinear(img, RealShift(dx=0.25, dy=0.5))
    # out(1,1) samples (0.5, 0.75): 0.125*0 + 0.375*10 + 0.125*20 + 0.375*40
    assert out.dtype == np.float64
    assert out[1, 1] == pytest.approx(21.25)
    assert out[0, 0] == pytest.approx(0.0)  # clamped corner


def test_shift_bilinear_integer_is_exact():
    arr = np.arange(30, dtype=np.uint8).reshape(5, 6)
    out = shift_bilinear(arr, RealShift(dx=1, dy=2))
    assert np.array_equal(out[2:, 1:], arr[:-2, :-1].astype(np.float64))


def _naive_shift(arr: np.ndarray, shift: RealShift) -> np.ndarray:
    m, n = arr.shape
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            y = min(max(i - shift.dy, 0.0), m - 1.0)
            x = min(max(j - shift.dx, 0.0), n - 1.0)
            r0, c0 = int(math.floor(y)), int(math.floor(x))
            r1, c1 = min(r0 + 1, m - 1), min(c0 + 1, n - 1)
            fr, fc = y - r0, x - c0
            out[i, j] = (
                arr[r0, c0] * (1 - fr) * (1 - fc)
                + arr[r0, c1] * (1 - fr) * fc
                + arr[r1, c0] * fr * (1 - fc)
                + arr[r1, c1] * fr * fc
            )
    return out


def test_shift_bilinear_matches_naive(rng):
    for _ in range(30):
        arr = rng.integers(0, 256, size=(9, 7)).astype(np.float64)
        s = RealShift(*rng.uniform(-4, 4, 2))
        np.testing.assert_allclose(shift_bilinear(arr, s), _naive_shift(arr, s), atol=1e-10)


def test_shift_bilinear_out_of_bounds():
    with pytest.raises(OutOfBounds):
        shift_bilinear(np.zeros((5, 7)), RealShift(dx=7, dy=0))


# --------------------------------------------------------------------------
# noise and psnr
# --------------------------------------------------------------------------

def test_noise_sigma_zero_is_copy(texture):
    img = texture(16, seed=3)
    out = add_gaussian_noise(img, 0.0, seed=5)
    assert np.array_equal(out, img)
    assert out is not img


def test_noise_deterministic_by_seed(texture):
    img = texture(16, seed=3)
    a = add_gaussian_noise(img, 2.0, seed=9)
    b = add_gaussian_noise(img, 2.0, seed=9)
    c = add_gaussian_noise(img, 2.0, seed=10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        add_gaussian_noise(img, -1.0, seed=0)


def test_psnr_values():
    assert psnr(np.zeros((4, 4)), np.zeros((4, 4))) == math.inf
    # constant error 10 -> mse 100
    assert psnr(np.zeros((4, 4)), np.full((4, 4), 10.0)) == pytest.approx(
        10 * math.log10(255**2 / 100)
    )
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((2, 2)), np.zeros((3, 3)))
