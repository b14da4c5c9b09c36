"""Integer-pixel registration: exhaustive AM maps and coarse-to-fine search.

A *placement* (dr, dc) compares template pixel (i, j) against search pixel
(i + dr, j + dc).  The pyramid decimates both images (keep even rows/cols)
until the template's minimum dimension would drop below 8, runs an
exhaustive AM map at the top, then refines each finer level inside a small
box around the doubled coarser peak.  All AM evaluations exclude a 1-pixel
border of the template so scores stay comparable with the sub-pixel stage,
whose sums exclude the same border.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NoValidOffset, TooSmall
from .image import downsample
from .metric import PERFECT

log = logging.getLogger(__name__)

MIN_TOP_DIM = 8  # smallest allowed template dimension at the pyramid top
DEFAULT_REFINE_RADIUS = 3  # half-width of the per-level refinement box


@dataclass
class SearchStats:
    """Mutable counters threaded through a search (evaluated incl. skipped)."""

    am_evaluations: int = 0


@dataclass(frozen=True)
class SearchWindow:
    """Inclusive placement range dr in [r0, r1], dc in [c0, c1]."""

    r0: int
    r1: int
    c0: int
    c1: int

    def __post_init__(self) -> None:
        if self.r0 > self.r1 or self.c0 > self.c1:
            raise ValueError(f"empty search window {self}")

    def placements(self):
        for dr in range(self.r0, self.r1 + 1):
            for dc in range(self.c0, self.c1 + 1):
                yield dr, dc

    @property
    def size(self) -> int:
        return (self.r1 - self.r0 + 1) * (self.c1 - self.c0 + 1)


@dataclass
class AmMatrix:
    """Sparse AM map over a search window, plus skipped placements with reasons."""

    window: SearchWindow
    scores: dict[tuple[int, int], float] = field(default_factory=dict)
    skipped: list[tuple[tuple[int, int], str]] = field(default_factory=list)

    @property
    def evaluations(self) -> int:
        return len(self.scores) + len(self.skipped)

    def best(self) -> tuple[tuple[int, int], float]:
        """Argmax placement; ties go to the lexicographically smallest (dr, dc)."""
        if not self.scores:
            raise NoValidOffset(
                f"all {len(self.skipped)} placements in {self.window} were skipped"
            )
        best_pos, best_am = None, -np.inf
        for pos in sorted(self.scores):
            am = self.scores[pos]
            if am > best_am:
                best_pos, best_am = pos, am
        return best_pos, best_am


@dataclass(frozen=True)
class IntegerShift:
    """Whole-pixel placement of a template inside a search image."""

    dr: int
    dc: int
    am: float


@dataclass(frozen=True)
class Pyramid:
    levels: list[np.ndarray]  # levels[0] is full resolution

    @property
    def depth(self) -> int:
        return len(self.levels)


def pyramid_depth(template_dims: tuple[int, int]) -> int:
    """Largest L with floor(min(template dims) / 2**(L-1)) >= MIN_TOP_DIM, at least 1."""
    smallest = min(template_dims)
    if smallest < 2:
        raise TooSmall(f"template dims {template_dims} are degenerate")
    depth = 1
    while smallest // (2 ** depth) >= MIN_TOP_DIM:
        depth += 1
    return depth


def build_pyramid(image, template_dims: tuple[int, int]) -> Pyramid:
    """Decimate `image` to the depth dictated by the template dimensions.

    Level k has dims ceil(M / 2**k) x ceil(N / 2**k) and level_k(i, j) ==
    image(i * 2**k, j * 2**k).  Templates smaller than 2x2 are rejected;
    templates under 8 pixels in a dimension simply get a single-level
    (exhaustive) pyramid.
    """
    img = np.asarray(image)
    depth = pyramid_depth(template_dims)
    levels = [img]
    for _ in range(depth - 1):
        levels.append(downsample(levels[-1]))
    return Pyramid(levels=levels)


_LEVELS = np.arange(256, dtype=np.float64)
_LEVELS_SQ = _LEVELS * _LEVELS


class _PreparedTemplate:
    """Template-side precomputation for evaluating many placements.

    Both operands are uint8, so one 256x256 joint histogram per placement
    yields the grouped moments in both directions: every sum involved is an
    exact integer far below 2**53, which makes the histogram route
    bit-identical to per-pixel accumulation while costing a single bincount
    pass instead of five.
    """

    def __init__(self, template: np.ndarray, margin: int):
        self.margin = margin
        core = template[margin : template.shape[0] - margin,
                        margin : template.shape[1] - margin]
        self.shape = core.shape
        self.levels = core.ravel()  # uint8 grouping indices
        self.joint_base = self.levels.astype(np.intp) * 256
        self.counts = np.bincount(self.levels, minlength=256)
        self.occ = self.counts > 0
        n = core.size
        self.size = n
        s1 = float(self.counts @ _LEVELS)
        s2 = float(self.counts @ _LEVELS_SQ)
        self.variance = s2 / n - (s1 / n) ** 2

    def am_against(self, sub: np.ndarray) -> tuple[float | None, str | None]:
        """(am, None) for a scored placement, (None, reason) for a skipped one."""
        if self.variance <= 0.0:
            return None, "constant template"
        joint = np.bincount(self.joint_base + sub.ravel(), minlength=65536)
        joint = joint.reshape(256, 256)  # [template level, sub level]
        n = self.size
        cnt_s = joint.sum(axis=0)
        s1 = float(cnt_s @ _LEVELS)
        s2 = float(cnt_s @ _LEVELS_SQ)
        var_sub = s2 / n - (s1 / n) ** 2
        if var_sub <= 0.0:
            return None, "constant sub-image"
        # varying = sub, grouped by template levels
        g1 = joint @ _LEVELS
        g2 = joint @ _LEVELS_SQ
        occ = self.occ
        ss_a = float((g2[occ] - g1[occ] * g1[occ] / self.counts[occ]).sum())
        # varying = template, grouped by sub levels
        h1 = _LEVELS @ joint
        h2 = _LEVELS_SQ @ joint
        occ_s = cnt_s > 0
        ss_b = float((h2[occ_s] - h1[occ_s] * h1[occ_s] / cnt_s[occ_s]).sum())
        ci = max(ss_a, 0.0) / (n * var_sub) + max(ss_b, 0.0) / (n * self.variance)
        return (PERFECT if ci <= 0.0 else 1.0 / ci), None


def _am_margin(template_shape: tuple[int, int]) -> int:
    # the 1-pixel border is excluded whenever the template can afford it
    return 1 if min(template_shape) >= 4 else 0


def am_map(template, search, window: SearchWindow, *, stats: SearchStats | None = None) -> AmMatrix:
    """Evaluate the alignment metric at every placement of `window`.

    Placements where either operand is constant are recorded as skipped with
    a reason rather than raising; a window with no scorable placement at all
    surfaces later as NoValidOffset from AmMatrix.best().
    """
    tpl = np.asarray(template)
    srch = np.asarray(search)
    if tpl.dtype != np.uint8 or srch.dtype != np.uint8:
        raise DimensionMismatch("am_map expects uint8 grey images")
    th, tw = tpl.shape
    sh, sw = srch.shape
    if th > sh or tw > sw:
        raise TooSmall(f"template {tpl.shape} exceeds search image {srch.shape}")
    if window.r0 < 0 or window.c0 < 0 or window.r1 > sh - th or window.c1 > sw - tw:
        raise ValueError(f"{window} exceeds valid placements of {tpl.shape} in {srch.shape}")

    margin = _am_margin((th, tw))
    prepared = _PreparedTemplate(tpl, margin)
    ih, iw = prepared.shape
    result = AmMatrix(window=window)
    for dr, dc in window.placements():
        sub = srch[dr + margin : dr + margin + ih, dc + margin : dc + margin + iw]
        am, reason = prepared.am_against(sub)
        if stats is not None:
            stats.am_evaluations += 1
        if am is None:
            result.skipped.append(((dr, dc), reason))
        else:
            result.scores[(dr, dc)] = am
    return result


def exhaustive_placements(template_shape, search_shape) -> int:
    """Number of placements a full-resolution exhaustive scan would need."""
    return (search_shape[0] - template_shape[0] + 1) * (
        search_shape[1] - template_shape[1] + 1
    )


def coarse_register(
    template,
    search,
    *,
    refine_radius: int = DEFAULT_REFINE_RADIUS,
    stats: SearchStats | None = None,
) -> IntegerShift:
    """Locate the whole-pixel placement of `template` inside `search`.

    Exhaustive AM map at the pyramid top, then at each finer level an AM map
    over the box of `refine_radius` around the doubled coarser peak, clipped
    to valid placements.  Ties break to the lexicographically smallest
    placement, so the result is deterministic.
    """
    tpl = np.asarray(template)
    srch = np.asarray(search)
    if refine_radius < 1:
        raise ValueError(f"refine radius must be >= 1, got {refine_radius}")
    tpl_pyr = build_pyramid(tpl, tpl.shape)
    srch_pyr = build_pyramid(srch, tpl.shape)  # depth follows the template dims
    top = tpl_pyr.depth - 1

    t_top, s_top = tpl_pyr.levels[top], srch_pyr.levels[top]
    window = SearchWindow(0, s_top.shape[0] - t_top.shape[0], 0, s_top.shape[1] - t_top.shape[1])
    (dr, dc), am = am_map(t_top, s_top, window, stats=stats).best()

    for level in range(top - 1, -1, -1):
        t_lvl, s_lvl = tpl_pyr.levels[level], srch_pyr.levels[level]
        max_r = s_lvl.shape[0] - t_lvl.shape[0]
        max_c = s_lvl.shape[1] - t_lvl.shape[1]
        center_r = min(max(2 * dr, 0), max_r)
        center_c = min(max(2 * dc, 0), max_c)
        window = SearchWindow(
            max(0, center_r - refine_radius),
            min(max_r, center_r + refine_radius),
            max(0, center_c - refine_radius),
            min(max_c, center_c + refine_radius),
        )
        (dr, dc), am = am_map(t_lvl, s_lvl, window, stats=stats).best()

    return IntegerShift(dr=dr, dc=dc, am=am)
