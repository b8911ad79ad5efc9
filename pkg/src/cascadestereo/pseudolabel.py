"""Sparse, reliable pseudo-labels from disparity + uncertainty.

Pixel-level filtering keeps pixels whose uncertainty passes sqrt(U) < t.
Area-level filtering first aggregates sqrt(U) over a window with
cross-bilateral weights (similar intensity AND similar disparity imply a
high weight), squashes the result through a logistic into (0, 1) — higher
means more likely wrong — and keeps pixels below the threshold.  This is a
deterministic stand-in for a learned neighborhood-aware estimator with the
same inputs (left image, disparity, pixel uncertainty) and output contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .cascade import DisparityField, UncertaintyField
from .evaluation import d1_fraction
from .raster_io import DisparityRaster, RasterImage

_UNIT_EPS = 1e-9  # keeps the area uncertainty strictly inside (0, 1)


@dataclass(eq=False)
class SparseLabelMap:
    """Disparity values plus a validity mask; invalid pixels hold NaN."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.valid.shape or self.values.ndim != 2:
            raise ValueError("label values and mask must be 2-D and share a shape")
        if self.valid.dtype != np.bool_:
            raise ValueError("validity mask must be boolean")
        if np.any(np.isnan(self.values[self.valid])):
            raise ValueError("valid pixels must carry finite disparities")

    @property
    def density(self) -> float:
        return float(self.valid.mean())

    def to_raster(self) -> DisparityRaster:
        return DisparityRaster(np.where(self.valid, self.values, np.nan))

    @classmethod
    def from_raster(cls, raster: DisparityRaster) -> "SparseLabelMap":
        return cls(raster.data.copy(), raster.valid_mask)


@dataclass(frozen=True)
class AreaFilterConfig:
    radius: int = 7
    sigma_color: float = 0.1
    sigma_disp: float = 3.0
    midpoint: float = 1.0
    slope: float = 2.0

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("window radius must be >= 1")
        if self.sigma_color <= 0 or self.sigma_disp <= 0:
            raise ValueError("sigmas must be positive")


@dataclass(eq=False)
class AreaUncertaintyField:
    """Neighborhood-refined uncertainty, strictly inside (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("area uncertainty must be 2-D")
        if self.values.min() <= 0.0 or self.values.max() >= 1.0:
            raise ValueError("area uncertainty must lie strictly inside (0, 1)")


@dataclass(eq=False)
class BinaryMask:
    """0/1 values, meaningful only where ``defined`` is True."""

    values: np.ndarray
    defined: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.defined.shape:
            raise ValueError("mask values and defined flags must share a shape")
        on = self.values[self.defined]
        if on.size and not np.all((on == 0) | (on == 1)):
            raise ValueError("mask values must be 0 or 1")


def filter_by_pixel_uncertainty(
    disp: DisparityField, unc: UncertaintyField, threshold: float
) -> SparseLabelMap:
    """Keep pixels with sqrt(U) < threshold (strict)."""
    if disp.values.shape != unc.values.shape:
        raise ValueError("disparity and uncertainty shapes must match")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    # strict comparison: t = 0 keeps nothing
    valid = np.sqrt(unc.values) < threshold
    return SparseLabelMap(np.where(valid, disp.values, np.nan), valid)


def area_uncertainty(
    disp: DisparityField,
    unc_pixel: UncertaintyField,
    left_image: RasterImage,
    config: AreaFilterConfig = AreaFilterConfig(),
) -> AreaUncertaintyField:
    """Cross-guided aggregation of sqrt(U) followed by a logistic squash.

    Neighbor q of pixel p contributes sqrt(U_q) with weight
    exp(-dI^2 / 2 sigma_c^2) * exp(-dd^2 / 2 sigma_d^2); the window is a
    square of the configured radius and out-of-image neighbors are skipped.
    The output is logistic(slope * (aggregate - midpoint)), clamped to stay
    strictly inside (0, 1).
    """
    if disp.values.shape != unc_pixel.values.shape or disp.values.shape != (
        left_image.height,
        left_image.width,
    ):
        raise ValueError("disparity, uncertainty, and image shapes must match")
    sqrt_u = np.sqrt(unc_pixel.values)
    intensity = left_image.data
    disparity = disp.values
    h, w = sqrt_u.shape
    num = sqrt_u.copy()  # self weight is exactly 1
    den = np.ones_like(sqrt_u)
    inv_c = -0.5 / config.sigma_color**2
    inv_d = -0.5 / config.sigma_disp**2
    r = config.radius
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            src_y = slice(max(0, dy), h + min(0, dy))
            src_x = slice(max(0, dx), w + min(0, dx))
            dst_y = slice(max(0, -dy), h + min(0, -dy))
            dst_x = slice(max(0, -dx), w + min(0, -dx))
            di = intensity[src_y, src_x] - intensity[dst_y, dst_x]
            dd = disparity[src_y, src_x] - disparity[dst_y, dst_x]
            weight = np.exp(di * di * inv_c + dd * dd * inv_d)
            num[dst_y, dst_x] += weight * sqrt_u[src_y, src_x]
            den[dst_y, dst_x] += weight
    aggregated = num / den
    squashed = expit(config.slope * (aggregated - config.midpoint))
    return AreaUncertaintyField(np.clip(squashed, _UNIT_EPS, 1.0 - _UNIT_EPS))


def filter_by_area_uncertainty(
    disp: DisparityField, u_area: AreaUncertaintyField, threshold: float
) -> SparseLabelMap:
    """Keep pixels with area uncertainty < threshold (strict), t in (0, 1)."""
    if disp.values.shape != u_area.values.shape:
        raise ValueError("disparity and area uncertainty shapes must match")
    if not 0.0 < threshold < 1.0:
        raise ValueError("area threshold must lie in (0, 1)")
    valid = u_area.values < threshold
    return SparseLabelMap(np.where(valid, disp.values, np.nan), valid)


def lrc_check(
    disp_left: np.ndarray, disp_right: np.ndarray, tolerance: float
) -> SparseLabelMap:
    """Left-right consistency: pixel (x, y) is valid iff the right-view
    disparity at round(x - d_L) agrees with d_L within the tolerance and
    the lookup lands inside the image."""
    left = np.asarray(getattr(disp_left, "values", disp_left), dtype=np.float64)
    right = np.asarray(getattr(disp_right, "values", disp_right), dtype=np.float64)
    if left.shape != right.shape:
        raise ValueError("disparity maps must share a shape")
    score = lrc_score(disp_left, disp_right)
    with np.errstate(invalid="ignore"):
        valid = score < tolerance
    return SparseLabelMap(np.where(valid, left, np.nan), valid)


def lrc_score(disp_left, disp_right) -> np.ndarray:
    """Absolute left-right disparity disagreement; +inf where the lookup
    leaves the image or hits an invalid pixel.  Usable as an uncertainty
    score for sparsification baselines."""
    left = np.asarray(getattr(disp_left, "values", disp_left), dtype=np.float64)
    right = np.asarray(getattr(disp_right, "values", disp_right), dtype=np.float64)
    h, w = left.shape
    xs = np.arange(w, dtype=np.float64)[None, :]
    lookup = np.floor(xs - left + 0.5)
    in_image = (lookup >= 0) & (lookup < w) & ~np.isnan(left)
    cols = np.clip(lookup, 0, w - 1).astype(np.intp)
    rows = np.arange(h)[:, None]
    diff = np.abs(left - right[rows, cols])
    score = np.where(in_image, diff, np.inf)
    return np.where(np.isnan(score), np.inf, score)


def gt_uncertainty_mask(
    disp: DisparityField, gt: DisparityRaster, threshold: float = 1.0
) -> BinaryMask:
    """1 where |gt - disparity| exceeds the threshold, 0 otherwise;
    undefined wherever the ground truth is invalid."""
    if disp.values.shape != gt.data.shape:
        raise ValueError("disparity and ground truth shapes must match")
    defined = gt.valid_mask
    with np.errstate(invalid="ignore"):
        wrong = np.abs(gt.data - disp.values) > threshold
    values = np.where(defined, wrong, False).astype(np.uint8)
    return BinaryMask(values, defined)


def label_stats(
    label: SparseLabelMap, gt: DisparityRaster
) -> tuple[float, float, float]:
    """(d1, density, overlap): D1 over jointly valid pixels, label density
    over the full frame, and the fraction of GT-valid pixels the label
    covers."""
    if label.values.shape != gt.data.shape:
        raise ValueError("label and ground truth shapes must match")
    gt_valid = gt.valid_mask
    joint = label.valid & gt_valid
    if not joint.any():
        raise ValueError("empty intersection: no jointly valid pixels")
    d1 = d1_fraction(label.values[joint], gt.data[joint])
    density = label.density
    overlap = float(joint.sum() / gt_valid.sum())
    return d1, density, overlap
