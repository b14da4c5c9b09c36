"""Closed-form sub-pixel refinement of a translation already within 1 pixel.

The cross variance of two images, with one reconstructed bilinearly at a
fractional offset (x, y) into one quadrant and the other at the opposite
offset, is exactly a bivariate polynomial with monomials x^i y^j, i, j <= 2:
every reconstructed pixel value is (a*xy + b*x + c*y + d) for per-pixel
coefficients read off the four surrounding samples, and the grouped,
mean-centered sum of squares expands into nine monomial coefficients.
Setting both partial derivatives to zero gives two bivariate equations; the
first is linear in x, so x = -P(y)/Q(y) back-substitutes into the second and
clearing Q(y)^2 leaves a single-variable quintic.  Real roots inside the
open unit square, across all four quadrant pairings, are scored by the true
alignment metric and the best candidate (never worse than the zero shift)
wins.

Conventions: x is the fractional offset along rows, y along columns;
quadrant sign patterns follow (x, y) in {I: (+,+), II: (-,+), III: (-,-),
IV: (+,-)}, and a pairing always reconstructs the second image in the
quadrant opposite the first (I<->III, II<->IV).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import (
    DegenerateSystem,
    DimensionMismatch,
    TooSmall,
    ZeroPolynomial,
    ZeroVariance,
)
from .image import RealShift, quantize, shift_bilinear
from .metric import cross_variance
from .search import DEFAULT_REFINE_RADIUS, IntegerShift, SearchStats, coarse_register

log = logging.getLogger(__name__)

# canonical roots must land strictly inside the unit square
ROOT_BAND = 1e-6
# |Q(y)| below this (relative to max |alpha|) invalidates back-substitution
Q_GUARD = 1e-12
# stationarity residual bound, relative to the system's coefficient scale
SYSTEM_RTOL = 1e-8
# quintic residual bound relative to max |A_k|, and imaginary-part cutoff
QUINTIC_RTOL = 1e-9
IMAG_TOL = 1e-7

# crops with population variance below this are too flat to solve on
LOW_TEXTURE_VARIANCE = 1.0


class Quadrant(Enum):
    """Sign pattern of the fractional offset (x: rows, y: columns)."""

    I = (1, 1)
    II = (-1, 1)
    III = (-1, -1)
    IV = (1, -1)

    @property
    def sx(self) -> int:
        return self.value[0]

    @property
    def sy(self) -> int:
        return self.value[1]

    @property
    def opposite(self) -> "Quadrant":
        return Quadrant((-self.sx, -self.sy))


@dataclass(frozen=True)
class FractionalShift:
    """Sub-pixel displacement of i1 relative to i2 (see subpixel_register)."""

    dx: float
    dy: float
    am: float
    flag: str | None = None

    def __post_init__(self) -> None:
        if not (abs(self.dx) < 1.0 and abs(self.dy) < 1.0):
            raise ValueError(f"fractional shift must lie in (-1, 1), got ({self.dx}, {self.dy})")

    def as_shift(self) -> RealShift:
        return RealShift(self.dx, self.dy)


@dataclass(frozen=True)
class RegistrationResult:
    """Integer + fractional decomposition of a recovered translation."""

    integer: IntegerShift         # placement rows/cols: (dr, dc) = (dy, dx)
    fractional: FractionalShift
    total: RealShift              # (dc + fractional.dx, dr + fractional.dy), exactly
    am: float
    flag: str | None = None


@dataclass(frozen=True)
class BilinearCoeffGrid:
    """Per-pixel coefficients (a, b, c, d) of value = a*xy + b*x + c*y + d.

    Arrays have shape (M-1, N-1); entry (i, j) belongs to image pixel
    (i + row0, j + col0), covering exactly the pixels whose quadrant
    neighbors exist.
    """

    quadrant: Quadrant
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    row0: int
    col0: int

    def value_at(self, i: int, j: int, x: float, y: float) -> float:
        """Reconstructed value at image pixel (i, j), offsets in [0, 1)."""
        gi, gj = i - self.row0, j - self.col0
        return float(
            self.a[gi, gj] * x * y + self.b[gi, gj] * x + self.c[gi, gj] * y + self.d[gi, gj]
        )


def bilinear_coeff_grid(image, quadrant: Quadrant) -> BilinearCoeffGrid:
    """Bilinear reconstruction coefficients of `image` toward `quadrant`.

    For sign pattern (sx, sy) and canonical offsets x, y in [0, 1):
    I(i + sx*x, j + sy*y) = a*xy + b*x + c*y + d with a, b, c read from the
    neighbors at (i+sx, j+sy), (i+sx, j), (i, j+sy) and d = I(i, j).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionMismatch("bilinear_coeff_grid expects a 2-D array")
    m, n = img.shape
    if m < 2 or n < 2:
        raise TooSmall(f"need at least 2x2 to form coefficient grids, got {m}x{n}")
    row0 = 1 if quadrant.sx < 0 else 0
    col0 = 1 if quadrant.sy < 0 else 0
    base = img[row0 : row0 + m - 1, col0 : col0 + n - 1]
    row_n = img[row0 + quadrant.sx : row0 + quadrant.sx + m - 1, col0 : col0 + n - 1]
    col_n = img[row0 : row0 + m - 1, col0 + quadrant.sy : col0 + quadrant.sy + n - 1]
    diag = img[
        row0 + quadrant.sx : row0 + quadrant.sx + m - 1,
        col0 + quadrant.sy : col0 + quadrant.sy + n - 1,
    ]
    return BilinearCoeffGrid(
        quadrant=quadrant,
        a=diag - col_n - row_n + base,
        b=row_n - base,
        c=col_n - base,
        d=base.copy(),
        row0=row0,
        col0=col0,
    )


@dataclass(frozen=True)
class PolyXY:
    """Bivariate polynomial sum c[i, j] * x^i * y^j with i, j in {0, 1, 2}."""

    c: np.ndarray  # shape (3, 3), float64

    def __call__(self, x: float, y: float) -> float:
        xs = np.array([1.0, x, x * x])
        ys = np.array([1.0, y, y * y])
        return float(xs @ self.c @ ys)

    def scaled(self, factor: float) -> "PolyXY":
        return PolyXY(self.c * factor)

    def plus(self, other: "PolyXY") -> "PolyXY":
        return PolyXY(self.c + other.c)


def _interior(shape: tuple[int, int]) -> tuple[slice, slice]:
    """The 1-pixel-inset domain every quadrant's grid covers."""
    m, n = shape
    if m < 4 or n < 4:
        raise TooSmall(f"need at least 4x4 for the interior sum domain, got {m}x{n}")
    return slice(1, m - 1), slice(1, n - 1)


def interior_crop(image) -> np.ndarray:
    """Image restricted to the solver's sum domain (outermost row/col dropped)."""
    arr = np.asarray(image)
    rs, cs = _interior(arr.shape)
    return arr[rs, cs]


def centered_objective(constant, grid: BilinearCoeffGrid) -> PolyXY:
    """Grouped, centered sum of squared reconstruction forms as a PolyXY.

    Pixels are partitioned by the grey level of `constant`; within each level
    the per-pixel (a, b, c, d) coefficients are centered by their level mean,
    and sum_pixels (a'xy + b'x + c'y + d')^2 is expanded over the nine
    monomials.  Sums run over the 1-pixel-inset interior, the common domain
    of all four quadrant grids.  Evaluated at (0, 0) this is the pixel count
    times the interactive variance of the grid's image under `constant`.
    """
    cimg = np.asarray(constant)
    if cimg.dtype != np.uint8:
        raise DimensionMismatch("grouping image must be uint8")
    m, n = cimg.shape
    rs, cs = _interior((m, n))
    levels = cimg[rs, cs].ravel()

    def dom(arr: np.ndarray, off_r: int, off_c: int) -> np.ndarray:
        return arr[
            rs.start - off_r : rs.stop - off_r, cs.start - off_c : cs.stop - off_c
        ].ravel()

    A = dom(grid.a, grid.row0, grid.col0)
    B = dom(grid.b, grid.row0, grid.col0)
    C = dom(grid.c, grid.row0, grid.col0)
    D = dom(grid.d, grid.row0, grid.col0)

    counts = np.bincount(levels, minlength=256)
    occ = counts > 0
    nocc = counts[occ].astype(np.float64)
    sums = {
        name: np.bincount(levels, weights=arr, minlength=256)[occ]
        for name, arr in (("a", A), ("b", B), ("c", C), ("d", D))
    }

    def centered_product(u: np.ndarray, v: np.ndarray, su: np.ndarray, sv: np.ndarray) -> float:
        # sum of (u - mean_level(u)) * (v - mean_level(v)) over all pixels
        return float(np.dot(u, v) - np.dot(su * sv, 1.0 / nocc))

    paa = centered_product(A, A, sums["a"], sums["a"])
    pbb = centered_product(B, B, sums["b"], sums["b"])
    pcc = centered_product(C, C, sums["c"], sums["c"])
    pdd = centered_product(D, D, sums["d"], sums["d"])
    pab = centered_product(A, B, sums["a"], sums["b"])
    pac = centered_product(A, C, sums["a"], sums["c"])
    pad = centered_product(A, D, sums["a"], sums["d"])
    pbc = centered_product(B, C, sums["b"], sums["c"])
    pbd = centered_product(B, D, sums["b"], sums["d"])
    pcd = centered_product(C, D, sums["c"], sums["d"])

    coeffs = np.zeros((3, 3))
    coeffs[2, 2] = paa
    coeffs[2, 1] = 2.0 * pab
    coeffs[2, 0] = pbb
    coeffs[1, 2] = 2.0 * pac
    coeffs[1, 1] = 2.0 * (pad + pbc)
    coeffs[1, 0] = 2.0 * pbd
    coeffs[0, 2] = pcc
    coeffs[0, 1] = 2.0 * pcd
    coeffs[0, 0] = pdd
    return PolyXY(coeffs)


def ci_poly(f: PolyXY, g: PolyXY, sigma1_sq: float, sigma2_sq: float, mn: int) -> PolyXY:
    """Cross variance as a polynomial: f/(mn*sigma2^2) + g/(mn*sigma1^2).

    `f` groups by the first image and carries the second image's forms;
    `g` is the mirror term.  The variances are those of the unshifted
    images over the same interior domain, held constant.
    """
    if sigma1_sq <= 0.0 or sigma2_sq <= 0.0:
        raise ZeroVariance("ci_poly needs positive image variances")
    if mn < 1:
        raise TooSmall("ci_poly needs a positive pixel count")
    return f.scaled(1.0 / (mn * sigma2_sq)).plus(g.scaled(1.0 / (mn * sigma1_sq)))


@dataclass(frozen=True)
class DerivativeSystem:
    """Stationarity system of a PolyXY: both partial derivatives set to zero.

    Row 1 (d/dx): alpha . (xy^2, xy, y^2, y, x, 1) = 0
    Row 2 (d/dy): beta  . (x^2y, xy, x^2, x, y, 1) = 0
    """

    alpha: np.ndarray  # shape (6,)
    beta: np.ndarray   # shape (6,)

    def residual(self, x: float, y: float) -> tuple[float, float]:
        a, b = self.alpha, self.beta
        r1 = a[0] * x * y * y + a[1] * x * y + a[2] * y * y + a[3] * y + a[4] * x + a[5]
        r2 = b[0] * x * x * y + b[1] * x * y + b[2] * x * x + b[3] * x + b[4] * y + b[5]
        return r1, r2

    @property
    def scale(self) -> float:
        return float(max(np.max(np.abs(self.alpha)), np.max(np.abs(self.beta))))


def derivative_system(ci: PolyXY) -> DerivativeSystem:
    """Differentiate a ci polynomial and collect both rows' coefficients."""
    c = ci.c
    alpha = np.array([2 * c[2, 2], 2 * c[2, 1], c[1, 2], c[1, 1], 2 * c[2, 0], c[1, 0]])
    beta = np.array([2 * c[2, 2], 2 * c[1, 2], c[2, 1], c[1, 1], 2 * c[0, 2], c[0, 1]])
    return DerivativeSystem(alpha=alpha, beta=beta)


@dataclass(frozen=True)
class QuinticPoly:
    """Single-variable polynomial A1*y^5 + ... + A6, coefficients descending."""

    coeffs: np.ndarray  # shape (6,)

    def __call__(self, y: float) -> float:
        return float(np.polyval(self.coeffs, y))

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


def reduce_to_quintic(system: DerivativeSystem) -> tuple[QuinticPoly, Callable[[float], float]]:
    """Eliminate x from the stationarity system.

    Row 1 is linear in x: x*Q(y) + P(y) = 0 with Q = a1*y^2 + a2*y + a5 and
    P = a3*y^2 + a4*y + a6, so x(y) = -P(y)/Q(y) wherever Q does not vanish.
    Substituting into row 2 and multiplying by Q(y)^2 yields

        (b1*y + b3) * P^2 - (b2*y + b4) * P*Q + (b5*y + b6) * Q^2 = 0,

    a quintic in y.  Returns the quintic and the back-substitution closure.
    Raises DegenerateSystem when Q is identically zero (x cannot be
    eliminated) or the whole system vanishes.
    """
    a, b = system.alpha, system.beta
    scale = system.scale
    if scale == 0.0:
        raise DegenerateSystem("stationarity system is identically zero")
    P = np.array([a[2], a[3], a[5]])
    Q = np.array([a[0], a[1], a[4]])
    if np.max(np.abs(Q)) <= Q_GUARD * scale:
        raise DegenerateSystem("row 1 has no x dependence; cannot eliminate x")

    p2 = np.polymul(P, P)
    pq = np.polymul(P, Q)
    q2 = np.polymul(Q, Q)
    quintic = (
        np.polymul(np.array([b[0], b[2]]), p2)
        - np.polymul(np.array([b[1], b[3]]), pq)
        + np.polymul(np.array([b[4], b[5]]), q2)
    )
    coeffs = np.zeros(6)
    coeffs[6 - len(quintic) :] = quintic

    def x_of_y(y: float) -> float:
        q = float(np.polyval(Q, y))
        if abs(q) <= Q_GUARD * scale:
            raise DegenerateSystem(f"Q({y}) vanishes; back-substitution undefined")
        return -float(np.polyval(P, y)) / q

    return QuinticPoly(coeffs=coeffs), x_of_y


def solve_quintic(poly: QuinticPoly) -> list[float]:
    """All real roots of a degree <= 5 polynomial, Newton-polished.

    Leading coefficients that vanish (relative to the largest coefficient)
    are stripped first, so genuinely lower-degree inputs are solved at their
    true degree.  Companion-matrix eigenvalues provide the candidates; roots
    with |imag| > 1e-7 are discarded, the rest are polished and must satisfy
    |p(root)| < 1e-9 * max|A_k|.  Returned sorted ascending.
    """
    coeffs = np.asarray(poly.coeffs, dtype=np.float64)
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0.0:
        raise ZeroPolynomial("all quintic coefficients vanish")
    nz = np.abs(coeffs) > 1e-14 * scale
    first = int(np.argmax(nz))
    reduced = coeffs[first:]
    if len(reduced) == 1:
        return []  # nonzero constant: no roots
    deriv = np.polyder(reduced)
    roots: list[float] = []
    for r in np.roots(reduced):
        if abs(r.imag) > IMAG_TOL:
            continue
        y = float(r.real)
        for _ in range(3):
            dp = float(np.polyval(deriv, y))
            if dp == 0.0:
                break
            y -= float(np.polyval(reduced, y)) / dp
        if abs(float(np.polyval(reduced, y))) < QUINTIC_RTOL * scale:
            if not any(abs(y - prev) < 1e-10 for prev in roots):
                roots.append(y)
    return sorted(roots)


# --------------------------------------------------------------------------
# registration drivers
# --------------------------------------------------------------------------

def _stationary_candidates(i1: np.ndarray, i2: np.ndarray) -> list[RealShift]:
    """Canonical stationary points of all four quadrant pairings, mapped to
    the correcting shift c with shift_bilinear(i1, c) ~ i2."""
    rs, cs = _interior(i1.shape)
    crop1 = i1[rs, cs].astype(np.float64)
    crop2 = i2[rs, cs].astype(np.float64)
    sigma1_sq = float(crop1.var())
    sigma2_sq = float(crop2.var())
    if sigma1_sq == 0.0 or sigma2_sq == 0.0:
        raise ZeroVariance("sub-pixel refinement needs non-constant interiors")
    mn = crop1.size

    candidates: list[RealShift] = []
    for quadrant in Quadrant:
        grid1 = bilinear_coeff_grid(i1, quadrant)
        grid2 = bilinear_coeff_grid(i2, quadrant.opposite)
        f = centered_objective(i1, grid2)
        g = centered_objective(i2, grid1)
        ci = ci_poly(f, g, sigma1_sq, sigma2_sq, mn)
        system = derivative_system(ci)
        try:
            quintic, x_of_y = reduce_to_quintic(system)
            ys = solve_quintic(quintic)
        except (DegenerateSystem, ZeroPolynomial) as exc:
            log.debug("quadrant %s degenerate: %s", quadrant.name, exc)
            continue
        for y in ys:
            if not (ROOT_BAND < y < 1.0 - ROOT_BAND):
                continue
            try:
                x = x_of_y(y)
            except DegenerateSystem:
                continue
            if not (ROOT_BAND < x < 1.0 - ROOT_BAND):
                continue
            r1, r2 = system.residual(x, y)
            if max(abs(r1), abs(r2)) > SYSTEM_RTOL * max(system.scale, 1.0):
                log.debug("quadrant %s root (%g, %g) fails residual", quadrant.name, x, y)
                continue
            # i1 sampled at (i + sx*x, j + sy*y) matches i2: the correcting
            # shift moves i1 content by (-sx*x) rows and (-sy*y) columns
            candidates.append(RealShift(dx=-quadrant.sy * y, dy=-quadrant.sx * x))
    return candidates


def _arbitrate(i1: np.ndarray, i2: np.ndarray, candidates: list[RealShift]) -> tuple[RealShift, float]:
    """Score each correcting shift by the true alignment metric of the
    shifted (and re-quantized) i1 against i2 on a clamp-free interior."""
    m, n = i1.shape
    margin = 2  # bilinear samples of |shift| < 1 never clamp this far in
    rs, cs = slice(margin, m - margin), slice(margin, n - margin)
    ref = i2[rs, cs]
    best: tuple[RealShift, float] | None = None
    for cand in candidates + [RealShift(0.0, 0.0)]:
        moved = quantize(shift_bilinear(i1, cand)) if (cand.dx or cand.dy) else i1
        try:
            am = cross_variance(moved[rs, cs], ref).am
        except ZeroVariance:
            continue
        if best is None or am > best[1]:
            best = (cand, am)
    if best is None:
        raise ZeroVariance("no candidate produced a scorable overlap")
    return best


def subpixel_register(i1, i2) -> FractionalShift:
    """Fractional displacement of i1 relative to i2 (|components| < 1).

    The returned shift f satisfies shift_bilinear(i2, f) ~ i1; equivalently
    shift_bilinear(i1, -f) aligns i1 onto i2.  Both images must already agree
    to within one integer pixel.  Inputs too flat to carry the metric
    (interior population variance < 1 grey^2) return the zero shift with a
    "low-texture" flag instead of solving; pairs where no sign configuration
    yields a stationary point fall back to the zero shift with a
    "degenerate" flag.
    """
    a1 = np.asarray(i1)
    a2 = np.asarray(i2)
    if a1.shape != a2.shape:
        raise DimensionMismatch(f"shapes differ: {a1.shape} vs {a2.shape}")
    if a1.dtype != np.uint8 or a2.dtype != np.uint8:
        raise DimensionMismatch("subpixel_register expects uint8 grey images")
    rs, cs = _interior(a1.shape)
    v1 = float(a1[rs, cs].astype(np.float64).var())
    v2 = float(a2[rs, cs].astype(np.float64).var())
    if v1 == 0.0 or v2 == 0.0:
        raise ZeroVariance("sub-pixel refinement needs non-constant interiors")
    if v1 < LOW_TEXTURE_VARIANCE or v2 < LOW_TEXTURE_VARIANCE:
        log.debug("low-texture pair (variances %g, %g); returning zero shift", v1, v2)
        return FractionalShift(dx=0.0, dy=0.0, am=cross_variance(a1, a2).am, flag="low-texture")

    candidates = _stationary_candidates(a1, a2)
    # an empty list means every sign configuration was degenerate or rootless
    # (typical when the true offset sits on a quadrant boundary); the zero
    # fallback still wins arbitration but the caller should know
    flag = None if candidates else "degenerate"
    correction, am = _arbitrate(a1, a2, candidates)
    # negate: the result is i1's displacement, not the correction applied to it
    return FractionalShift(dx=0.0 - correction.dx, dy=0.0 - correction.dy, am=am, flag=flag)


def full_register(
    reference,
    moving,
    *,
    max_shift: int = 16,
    refine_radius: int = DEFAULT_REFINE_RADIUS,
    stats: SearchStats | None = None,
) -> RegistrationResult:
    """Recover the full translation of `moving` relative to `reference`.

    Coarse stage: a central crop of `reference`, inset by the search margin,
    is located inside `moving` with the pyramid search.  Both images are then
    cropped to the integer-aligned overlap and the sub-pixel stage refines
    the remainder.  total = integer + fractional exactly, and applying
    shift_bilinear(moving, -total) aligns `moving` onto `reference`.
    """
    ref = np.asarray(reference)
    mov = np.asarray(moving)
    if ref.dtype != np.uint8 or mov.dtype != np.uint8:
        raise DimensionMismatch("full_register expects uint8 grey images")
    if ref.shape != mov.shape:
        raise DimensionMismatch(f"shapes differ: {ref.shape} vs {mov.shape}")
    m, n = ref.shape
    if max_shift < 0:
        raise ValueError(f"max_shift must be >= 0, got {max_shift}")
    margin = min(max_shift, (m - 32) // 2, (n - 32) // 2)
    if margin < 0:
        raise TooSmall(f"{m}x{n} leaves no 32x32 textured overlap to register on")

    if margin == 0:
        integer = IntegerShift(dr=0, dc=0, am=cross_variance(ref, mov).am)
    else:
        template = ref[margin : m - margin, margin : n - margin]
        placement = coarse_register(template, mov, refine_radius=refine_radius, stats=stats)
        integer = IntegerShift(
            dr=placement.dr - margin, dc=placement.dc - margin, am=placement.am
        )

    # overlap in reference coordinates; moving(i, j) sits over reference(i-dr, j-dc)
    dr, dc = integer.dr, integer.dc
    r0, r1 = max(0, -dr), m - max(0, dr)
    c0, c1 = max(0, -dc), n - max(0, dc)
    ref_crop = ref[r0:r1, c0:c1]
    mov_crop = mov[r0 + dr : r1 + dr, c0 + dc : c1 + dc]

    frac = subpixel_register(mov_crop, ref_crop)
    total = RealShift(dx=dc + frac.dx, dy=dr + frac.dy)
    return RegistrationResult(
        integer=integer,
        fractional=frac,
        total=total,
        am=frac.am,
        flag=frac.flag,
    )
