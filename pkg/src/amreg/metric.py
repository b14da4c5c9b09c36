"""Alignment-metric image similarity.

The cross variance of a pair (i1, i2) is

    ci = iv(i1, i2) / var(i2) + iv(i2, i1) / var(i1)

where ``iv(constant, varying)`` is the *interactive variance*: partition the
pixels by the grey level of ``constant``, take the population variance of
``varying`` inside each cell, and average the cells weighted by the level
probabilities of ``constant``.  The alignment metric is am = 1/ci; two
perfectly dependent images have ci == 0 and am == inf (the PERFECT score).

ci is minimized (am maximized) during registration.  Both terms are
grouped sums, so everything below reduces to histogram-indexed moment
accumulation (np.bincount); no pixel loops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroVariance

PERFECT = math.inf  # am score of a perfectly dependent pair (ci == 0)


@dataclass(frozen=True)
class CiAmScore:
    """Cross variance and its reciprocal alignment metric."""

    ci: float
    am: float

    @classmethod
    def from_ci(cls, ci: float) -> "CiAmScore":
        ci = float(ci)
        if ci < 0:
            # numerically ci is a sum of scaled within-group variances; tiny
            # negatives can only come from cancellation noise
            ci = 0.0
        return cls(ci=ci, am=PERFECT if ci == 0.0 else 1.0 / ci)

    @property
    def is_perfect(self) -> bool:
        return self.am == PERFECT


@dataclass(frozen=True)
class ConditionalStats:
    """Per-grey-level statistics of `varying` grouped by `constant`'s levels."""

    levels: np.ndarray      # occupied grey levels (or unique values) of `constant`
    counts: np.ndarray      # pixels per level
    means: np.ndarray       # conditional mean of `varying` per level
    variances: np.ndarray   # conditional population variance per level
    grouped_by: str = "constant"  # which operand supplied the grouping levels


def _group_indices(constant: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Return (flat group index per pixel, level values, number of groups).

    uint8 images index directly by grey level; anything else (e.g. an affine
    remap applied in real arithmetic) groups by exact unique value, which
    preserves the partition under any injective relabeling.
    """
    flat = constant.ravel()
    if constant.dtype == np.uint8:
        return flat, np.arange(256), 256
    values, idx = np.unique(flat, return_inverse=True)
    return idx, values, len(values)


def _grouped_moments(idx: np.ndarray, ngroups: int, values: np.ndarray):
    counts = np.bincount(idx, minlength=ngroups)
    s1 = np.bincount(idx, weights=values, minlength=ngroups)
    s2 = np.bincount(idx, weights=values * values, minlength=ngroups)
    return counts, s1, s2


def conditional_stats(constant, varying) -> ConditionalStats:
    """Group `varying` by the levels of `constant`; means/variances per level.

    Variances are population variances (divide by the cell count).  Levels
    absent from `constant` do not appear in the output.
    """
    c = np.asarray(constant)
    v = np.asarray(varying, dtype=np.float64)
    if c.shape != v.shape:
        raise DimensionMismatch(f"shapes differ: {c.shape} vs {v.shape}")
    idx, levels, ngroups = _group_indices(c)
    counts, s1, s2 = _grouped_moments(idx, ngroups, v.ravel())
    occ = counts > 0
    n = counts[occ].astype(np.float64)
    means = s1[occ] / n
    # s2/n - mean^2 can go a hair negative for constant cells; clamp
    variances = np.maximum(s2[occ] / n - means * means, 0.0)
    return ConditionalStats(
        levels=levels[occ],
        counts=counts[occ],
        means=means,
        variances=variances,
    )


def _within_group_ss(constant: np.ndarray, varying: np.ndarray) -> float:
    """Total within-group sum of squares of `varying` under `constant`'s partition."""
    idx, _, ngroups = _group_indices(constant)
    counts, s1, s2 = _grouped_moments(idx, ngroups, varying.ravel())
    occ = counts > 0
    ss = s2[occ] - s1[occ] * s1[occ] / counts[occ]
    total = float(ss.sum())
    return total if total > 0.0 else 0.0


def interactive_variance(constant, varying) -> float:
    """Probability-weighted mean of the conditional variances.

    Equals sum_n p(n) * var(varying | constant == n) with p taken from
    `constant`'s level probabilities; equivalently the total within-group
    sum of squares divided by the pixel count.
    """
    c = np.asarray(constant)
    v = np.asarray(varying, dtype=np.float64)
    if c.shape != v.shape:
        raise DimensionMismatch(f"shapes differ: {c.shape} vs {v.shape}")
    return _within_group_ss(c, v) / c.size


def cross_variance(i1, i2) -> CiAmScore:
    """Symmetric cross variance ci >= 0 of two equal-size images.

    Raises ZeroVariance if either operand is constant.
    """
    a = np.asarray(i1)
    b = np.asarray(i2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    af = a.astype(np.float64)
    bf = b.astype(np.float64)
    var1 = float(af.var())
    var2 = float(bf.var())
    if var1 == 0.0 or var2 == 0.0:
        raise ZeroVariance("cross variance needs two non-constant images")
    ci = (
        _within_group_ss(a, bf) / (a.size * var2)
        + _within_group_ss(b, af) / (a.size * var1)
    )
    return CiAmScore.from_ci(ci)


def alignment_metric(i1, i2) -> CiAmScore:
    """Alignment metric am = 1/ci (PERFECT sentinel when ci == 0)."""
    return cross_variance(i1, i2)
