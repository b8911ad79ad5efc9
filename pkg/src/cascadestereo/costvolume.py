"""Matching-cost volumes over explicit per-pixel disparity hypotheses.

Costs are group-wise feature correlations mapped so that lower is better:
for each channel group g the normalized correlation corr_g lies in [-1, 1]
(for +/-1 census channels) and the per-hypothesis cost is the mean over
groups of (1 - corr_g) / 2, giving 0 for a perfect match and 1 for exactly
complementary features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .features import FeatureMap
from .gridops import bilinear_resize


@dataclass(eq=False)
class HypothesisSet:
    """Per-pixel sorted disparity candidates, (height, width, planes)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[2] < 1:
            raise ValueError("hypotheses must be (height, width, planes)")
        if not np.all(np.isfinite(values)):
            raise ValueError("hypotheses must be finite")
        if values.min() < 0.0:
            raise ValueError("hypotheses must be non-negative")
        if np.any(np.diff(values, axis=2) < 0.0):
            raise ValueError("per-pixel hypotheses must be sorted non-decreasing")
        self.values = values

    @classmethod
    def dense(cls, height: int, width: int, planes: int) -> "HypothesisSet":
        """The dense set: integer hypotheses {0 .. planes-1} at every pixel."""
        base = np.arange(planes, dtype=np.float64)
        return cls(np.broadcast_to(base, (height, width, planes)).copy())

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def planes_per_pixel(self) -> int:
        return self.values.shape[2]

    def is_dense(self) -> bool:
        base = np.arange(self.planes_per_pixel, dtype=np.float64)
        return bool(np.all(self.values == base))


@dataclass(eq=False)
class CostVolume:
    """Per-pixel, per-plane matching cost (lower = better match)."""

    costs: np.ndarray
    hypotheses: HypothesisSet

    def __post_init__(self):
        if self.costs.shape != self.hypotheses.values.shape:
            raise ValueError("cost shape must match hypothesis shape")
        if not np.all(np.isfinite(self.costs)):
            raise ValueError("costs must be finite")
        if self.costs.min() < 0.0:
            raise ValueError("costs must be non-negative")

    @property
    def planes(self) -> int:
        return self.costs.shape[2]


@dataclass(eq=False)
class ProbabilityVolume:
    """Per-pixel categorical distribution over hypothesis planes."""

    probabilities: np.ndarray
    hypotheses: HypothesisSet

    def __post_init__(self):
        if self.probabilities.shape != self.hypotheses.values.shape:
            raise ValueError("probability shape must match hypothesis shape")
        p = self.probabilities
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        sums = p.sum(axis=2)
        if np.abs(sums - 1.0).max() > 1e-6:
            raise ValueError("per-pixel probabilities must sum to 1")


@dataclass(frozen=True)
class AggregationConfig:
    """Spatial cost aggregation plus the softmin temperature.

    method "box": per-plane box filter of the given radius.
    method "sgm": 4-path semi-global recurrence with penalties p1
    (plane-index step of 1) and p2 (larger step), path costs averaged.
    """

    method: str = "sgm"
    radius: int = 1
    p1: float = 0.1
    p2: float = 0.5
    tau: float = 0.25

    def __post_init__(self):
        if self.method not in ("box", "sgm"):
            raise ValueError(f"unknown aggregation method {self.method!r}")
        if self.radius < 0:
            raise ValueError("box radius must be >= 0")
        if not (0.0 <= self.p1 <= self.p2):
            raise ValueError("penalties must satisfy 0 <= p1 <= p2")
        if not self.tau > 0:
            raise ValueError("softmin temperature must be positive")


def build_cost_volume(
    f_left: FeatureMap, f_right: FeatureMap, hypotheses: HypothesisSet
) -> CostVolume:
    """Group-wise correlation cost over the given hypothesis set.

    Fractional hypotheses sample the right feature map by linear
    interpolation along x; hypotheses reaching outside the image clamp the
    sample coordinate to the border (documented bias, no special casing).
    """
    if (f_left.height, f_left.width) != (f_right.height, f_right.width):
        raise ValueError("feature maps must share dimensions")
    if f_left.channels != f_right.channels or f_left.group_count != f_right.group_count:
        raise ValueError("mismatched grouping between feature maps")
    if (hypotheses.height, hypotheses.width) != (f_left.height, f_left.width):
        raise ValueError("hypothesis set dimensions must match feature maps")

    h, w, n = hypotheses.values.shape
    groups = f_left.group_count
    per_group = f_left.channels // groups
    fl = f_left.data.reshape(h, w, groups, per_group)
    fr = f_right.data
    xs = np.arange(w, dtype=np.float64)[None, :]
    rows = np.arange(h)[:, None]

    costs = np.empty((h, w, n), dtype=np.float64)
    for plane in range(n):
        xr = np.clip(xs - hypotheses.values[:, :, plane], 0.0, w - 1.0)
        x0 = np.floor(xr).astype(np.intp)
        x1 = np.minimum(x0 + 1, w - 1)
        frac = (xr - x0)[:, :, None]
        sampled = (1.0 - frac) * fr[rows, x0] + frac * fr[rows, x1]
        corr = np.einsum(
            "hwgk,hwgk->hwg", fl, sampled.reshape(h, w, groups, per_group)
        ) / per_group
        costs[:, :, plane] = np.mean((1.0 - corr) * 0.5, axis=2)
    np.clip(costs, 0.0, None, out=costs)
    return CostVolume(costs, hypotheses)


def _sgm_scan(costs: np.ndarray, p1: float, p2: float) -> np.ndarray:
    """One directional pass over (lines, steps, planes), scanning axis 1."""
    lines, steps, planes = costs.shape
    out = np.empty_like(costs)
    out[:, 0] = costs[:, 0]
    for t in range(1, steps):
        prev = out[:, t - 1]
        floor = prev.min(axis=1, keepdims=True)
        step_one = np.full_like(prev, np.inf)
        step_one[:, :-1] = prev[:, 1:]
        step_one[:, 1:] = np.minimum(step_one[:, 1:], prev[:, :-1])
        best = np.minimum(prev, np.minimum(step_one + p1, floor + p2))
        out[:, t] = costs[:, t] + best - floor
    return out


def aggregate(volume: CostVolume, config: AggregationConfig) -> CostVolume:
    """Spatially aggregate matching costs (box filter or 4-path SGM)."""
    costs = volume.costs
    if config.method == "box":
        if config.radius == 0:
            return CostVolume(costs.copy(), volume.hypotheses)
        size = 2 * config.radius + 1
        smoothed = ndimage.uniform_filter(costs, size=(size, size, 1), mode="nearest")
        return CostVolume(np.clip(smoothed, 0.0, None), volume.hypotheses)

    total = np.zeros_like(costs)
    # horizontal passes
    total += _sgm_scan(costs, config.p1, config.p2)
    total += _sgm_scan(costs[:, ::-1], config.p1, config.p2)[:, ::-1]
    # vertical passes operate on the transposed volume
    swapped = costs.transpose(1, 0, 2)
    total += _sgm_scan(swapped, config.p1, config.p2).transpose(1, 0, 2)
    total += _sgm_scan(swapped[:, ::-1], config.p1, config.p2)[:, ::-1].transpose(1, 0, 2)
    return CostVolume(total / 4.0, volume.hypotheses)


def _expand_planes_once(costs: np.ndarray) -> np.ndarray:
    """Double the plane count: coarse plane k feeds fine planes 2k and 2k+1
    by linear interpolation, clamped at the top."""
    h, w, n = costs.shape
    out = np.empty((h, w, 2 * n), dtype=costs.dtype)
    out[:, :, 0::2] = costs
    out[:, :, 1:-1:2] = 0.5 * (costs[:, :, :-1] + costs[:, :, 1:])
    out[:, :, -1] = costs[:, :, -1]
    return out


def fuse_dense_volumes(volumes: list[CostVolume]) -> CostVolume:
    """Average a fine-to-coarse chain of dense volumes on the finest grid.

    Each coarser volume must halve the spatial dimensions (ceil) and the
    plane count of its predecessor.  Coarse volumes are expanded along
    planes (factor 2 per scale step, linear interpolation) and upsampled
    spatially (bilinear), then all are averaged with equal weights.
    """
    if not volumes:
        raise ValueError("need at least one volume to fuse")
    for i, vol in enumerate(volumes):
        if not vol.hypotheses.is_dense():
            raise ValueError(f"fusion input {i} is not a dense volume")
    base = volumes[0]
    bh, bw, bn = base.costs.shape
    eh, ew, en = bh, bw, bn
    total = base.costs.copy()
    for i, vol in enumerate(volumes[1:], start=1):
        eh, ew, en = (eh + 1) // 2, (ew + 1) // 2, en // 2
        if vol.costs.shape != (eh, ew, en) or en < 1:
            raise ValueError(
                f"inconsistent scale chain at input {i}: expected "
                f"{(eh, ew, en)}, got {vol.costs.shape}"
            )
        expanded = vol.costs
        for _ in range(i):
            expanded = _expand_planes_once(expanded)
        resized = np.empty((bh, bw, bn), dtype=np.float64)
        for plane in range(bn):
            resized[:, :, plane] = bilinear_resize(expanded[:, :, plane], bh, bw)
        total += resized
    return CostVolume(total / len(volumes), base.hypotheses)


def softmin_probabilities(volume: CostVolume, tau: float) -> ProbabilityVolume:
    """Temperature-scaled softmin: p(n) = exp(-c_n / tau) / sum_m exp(-c_m / tau)."""
    if not tau > 0:
        raise ValueError("softmin temperature must be positive")
    z = -volume.costs / tau
    z -= z.max(axis=2, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=2, keepdims=True)
    return ProbabilityVolume(p, volume.hypotheses)
