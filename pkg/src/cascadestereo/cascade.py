"""Coarse-to-fine disparity estimation driven by per-pixel uncertainty.

Stage i works at 1/2**i of the input resolution.  Dense volumes at scales
3-5 are fused into the stage-3 estimate; stages 2 and 1 re-match inside
per-pixel search ranges derived from the previous stage's disparity and
uncertainty; the stage-0 output is a bilinear upsample of stage 1.

The per-pixel quantities are the probability-weighted disparity mean
(soft argmin) and its variance (uncertainty): a point-mass distribution has
zero uncertainty, multi-modal distributions have large uncertainty.  The
search range at the next stage is d_hat +/- ((alpha + 1) * sqrt(U) + beta),
upsampled bilinearly, doubled to convert disparity units, and clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .costvolume import (
    AggregationConfig,
    CostVolume,
    HypothesisSet,
    ProbabilityVolume,
    aggregate,
    build_cost_volume,
    fuse_dense_volumes,
    softmin_probabilities,
)
from .features import FeatureConfig, FeatureMap, build_pyramid, census_transform
from .gridops import bilinear_resize
from .raster_io import RasterImage

MIN_IMAGE_SIDE = 32  # below this the scale-5 pyramid level degenerates


@dataclass(eq=False)
class DisparityField:
    """Disparity estimate at stage resolution (values in stage pixel units)."""

    values: np.ndarray
    stage: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("disparity field must be 2-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("disparity field must be finite")
        if values.min() < 0.0:
            raise ValueError("disparity field must be non-negative")
        self.values = values


@dataclass(eq=False)
class UncertaintyField:
    """Disparity variance in squared stage pixels; 0 only for point masses."""

    values: np.ndarray
    stage: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("uncertainty field must be 2-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("uncertainty field must be finite")
        if values.min() < 0.0:
            raise ValueError("uncertainty must be non-negative")
        self.values = values


@dataclass(eq=False)
class RangeField:
    """Per-pixel search interval [d_min, d_max] at the stage it feeds."""

    d_min: np.ndarray
    d_max: np.ndarray
    stage: int

    def __post_init__(self):
        if self.d_min.shape != self.d_max.shape:
            raise ValueError("range bounds must share a shape")
        if np.any(self.d_min > self.d_max):
            raise ValueError("range must satisfy d_min <= d_max")
        if self.d_min.min() < 0.0:
            raise ValueError("range bounds must be non-negative")


@dataclass(frozen=True)
class CascadeParams:
    """Pipeline knobs; defaults follow the reference operating point."""

    d_max: int = 256
    planes_stage2: int = 16
    planes_stage1: int = 12
    alpha_stage3: float = 0.0
    alpha_stage2: float = 0.0
    beta_stage3: float = 0.0
    beta_stage2: float = 0.0
    fused_scales: tuple[int, ...] = (3, 4, 5)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)

    def __post_init__(self):
        if self.d_max < 32 or self.d_max % 32 != 0:
            raise ValueError("d_max must be a positive multiple of 32")
        if self.planes_stage2 < 2 or self.planes_stage1 < 2:
            raise ValueError("plane counts must be >= 2")
        for a in (self.alpha_stage3, self.alpha_stage2):
            if a < -1.0:
                raise ValueError("alpha must be >= -1 (non-negative range width)")
        for b in (self.beta_stage3, self.beta_stage2):
            if b < 0.0:
                raise ValueError("beta must be >= 0")
        scales = tuple(self.fused_scales)
        if scales != tuple(range(3, 3 + len(scales))) or not 1 <= len(scales) <= 3:
            raise ValueError("fused_scales must be (3,), (3, 4) or (3, 4, 5)")
        object.__setattr__(self, "fused_scales", scales)

    @property
    def tau(self) -> float:
        return self.aggregation.tau

    def alpha(self, stage: int) -> float:
        return {3: self.alpha_stage3, 2: self.alpha_stage2}[stage]

    def beta(self, stage: int) -> float:
        return {3: self.beta_stage3, 2: self.beta_stage2}[stage]


@dataclass(eq=False)
class StageResult:
    stage: int
    disparity: DisparityField
    uncertainty: UncertaintyField
    search_range: RangeField | None
    probabilities: ProbabilityVolume
    hypotheses: HypothesisSet


@dataclass(eq=False)
class StageTrace:
    """Results for stages 3, 2, 1 plus the upsampled stage-0 output."""

    stages: list[StageResult]
    disparity: DisparityField  # stage 0
    uncertainty: UncertaintyField  # stage 0

    def stage(self, index: int) -> StageResult:
        for result in self.stages:
            if result.stage == index:
                return result
        raise KeyError(f"no stage {index} in trace")


def soft_argmin(prob: ProbabilityVolume, hyp: HypothesisSet, stage: int = 0) -> DisparityField:
    """Probability-weighted mean disparity: d_hat = sum_n d_n * p_n."""
    if prob.probabilities.shape != hyp.values.shape:
        raise ValueError("probability and hypothesis shapes must match")
    values = np.sum(hyp.values * prob.probabilities, axis=2)
    return DisparityField(np.clip(values, 0.0, None), stage)


def pixel_uncertainty(
    prob: ProbabilityVolume, hyp: HypothesisSet, disp: DisparityField
) -> UncertaintyField:
    """Distribution variance: U = sum_n (d_n - d_hat)**2 * p_n."""
    if prob.probabilities.shape != hyp.values.shape:
        raise ValueError("probability and hypothesis shapes must match")
    delta = hyp.values - disp.values[:, :, None]
    values = np.sum(delta * delta * prob.probabilities, axis=2)
    return UncertaintyField(values, disp.stage)


def next_stage_range(
    disp: DisparityField,
    unc: UncertaintyField,
    params: CascadeParams,
    stage: int,
    out_shape: tuple[int, int] | None = None,
) -> RangeField:
    """Per-pixel search interval for stage-1 refinement of ``stage``.

    Bounds d_hat +/- ((alpha + 1) * sqrt(U) + beta) are formed at the current
    stage, bilinearly upsampled, then doubled to convert disparity units to
    the next (finer) stage, and finally clamped to [0, d_max / 2**(stage-1)).
    """
    spread = (params.alpha(stage) + 1.0) * np.sqrt(unc.values) + params.beta(stage)
    lo = disp.values - spread
    hi = disp.values + spread
    if out_shape is None:
        out_shape = (2 * lo.shape[0], 2 * lo.shape[1])
    limit = np.nextafter(params.d_max / 2 ** (stage - 1), 0.0)
    lo = np.clip(2.0 * bilinear_resize(lo, *out_shape), 0.0, limit)
    hi = np.clip(2.0 * bilinear_resize(hi, *out_shape), 0.0, limit)
    return RangeField(lo, hi, stage - 1)


def sample_hypotheses(search_range: RangeField, planes: int) -> HypothesisSet:
    """Uniform sampling d_n = d_min + n * (d_max - d_min) / (planes - 1)."""
    if planes < 2:
        raise ValueError("need at least 2 hypothesis planes")
    steps = np.arange(planes, dtype=np.float64) / (planes - 1)
    span = (search_range.d_max - search_range.d_min)[:, :, None]
    values = search_range.d_min[:, :, None] + steps * span
    return HypothesisSet(values)


def _stage_estimate(
    volume: CostVolume, params: CascadeParams, stage: int
) -> tuple[ProbabilityVolume, DisparityField, UncertaintyField]:
    agg = aggregate(volume, params.aggregation)
    prob = softmin_probabilities(agg, params.tau)
    disp = soft_argmin(prob, volume.hypotheses, stage)
    unc = pixel_uncertainty(prob, volume.hypotheses, disp)
    return prob, disp, unc


def run_cascade(
    left: RasterImage,
    right: RasterImage,
    feature_config: FeatureConfig,
    params: CascadeParams,
) -> StageTrace:
    """Full pipeline: fused dense stage 3, refined stages 2 and 1, upsampled
    stage 0.  Deterministic; the trace is immutable once returned."""
    if (left.height, left.width) != (right.height, right.width):
        raise ValueError("stereo pair dimensions must match")
    if min(left.height, left.width) < MIN_IMAGE_SIDE:
        raise ValueError(
            f"image must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE} "
            "(the scale-5 pyramid level vanishes)"
        )
    pyr_left = build_pyramid(left, 6)
    pyr_right = build_pyramid(right, 6)

    def feats(scale: int) -> tuple[FeatureMap, FeatureMap]:
        return (
            census_transform(pyr_left[scale], feature_config),
            census_transform(pyr_right[scale], feature_config),
        )

    dense = []
    for scale in params.fused_scales:
        fl, fr = feats(scale)
        planes = params.d_max // 2**scale
        hyp = HypothesisSet.dense(fl.height, fl.width, planes)
        dense.append(build_cost_volume(fl, fr, hyp))
    fused = fuse_dense_volumes(dense)

    prob, disp, unc = _stage_estimate(fused, params, stage=3)
    stages = [StageResult(3, disp, unc, None, prob, fused.hypotheses)]

    for stage, planes in ((3, params.planes_stage2), (2, params.planes_stage1)):
        fl, fr = feats(stage - 1)
        search = next_stage_range(
            disp, unc, params, stage, out_shape=(fl.height, fl.width)
        )
        hyp = sample_hypotheses(search, planes)
        volume = build_cost_volume(fl, fr, hyp)
        prob, disp, unc = _stage_estimate(volume, params, stage - 1)
        stages.append(StageResult(stage - 1, disp, unc, search, prob, hyp))

    d0 = 2.0 * bilinear_resize(disp.values, left.height, left.width)
    u0 = 4.0 * bilinear_resize(unc.values, left.height, left.width)
    return StageTrace(
        stages,
        DisparityField(d0, 0),
        UncertaintyField(u0, 0),
    )


def match_dense(
    left: RasterImage,
    right: RasterImage,
    feature_config: FeatureConfig,
    d_max: int,
    aggregation: AggregationConfig,
) -> tuple[DisparityField, UncertaintyField, ProbabilityVolume]:
    """Single-scale dense matcher over all integer disparities in [0, d_max).

    Reference path for cascade/dense equivalence checks; runs at the input
    resolution with no pyramid, fusion, or range pruning.
    """
    fl = census_transform(left, feature_config)
    fr = census_transform(right, feature_config)
    hyp = HypothesisSet.dense(fl.height, fl.width, d_max)
    volume = build_cost_volume(fl, fr, hyp)
    agg = aggregate(volume, aggregation)
    prob = softmin_probabilities(agg, aggregation.tau)
    disp = soft_argmin(prob, hyp, stage=0)
    unc = pixel_uncertainty(prob, hyp, disp)
    return disp, unc, prob


def refine_disparity(disp: DisparityField) -> DisparityField:
    """3x3 median followed by edge-preserving bilateral smoothing.

    The bilateral pass adds the weighted mean of neighbor differences to the
    center value, so constant fields pass through exactly and values stay
    inside the field's original range.
    """
    med = ndimage.median_filter(disp.values, size=3, mode="nearest")
    radius = 2
    sigma_spatial = 1.5
    sigma_value = 1.0
    h, w = med.shape
    num = np.zeros_like(med)
    den = np.ones_like(med)  # center weight
    inv_s = -0.5 / sigma_spatial**2
    inv_v = -0.5 / sigma_value**2
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx == 0:
                continue
            src_y = slice(max(0, dy), h + min(0, dy))
            src_x = slice(max(0, dx), w + min(0, dx))
            dst_y = slice(max(0, -dy), h + min(0, -dy))
            dst_x = slice(max(0, -dx), w + min(0, -dx))
            diff = med[src_y, src_x] - med[dst_y, dst_x]
            weight = np.exp((dy * dy + dx * dx) * inv_s + diff * diff * inv_v)
            num[dst_y, dst_x] += weight * diff
            den[dst_y, dst_x] += weight
    out = med + num / den
    return DisparityField(np.clip(out, 0.0, None), disp.stage)
