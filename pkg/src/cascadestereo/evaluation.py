"""Disparity metrics, sparsification ROC, training losses, triangulation.

D1 follows the KITTI convention: a pixel is an outlier when its absolute
error exceeds 3 px AND 5% of the ground-truth disparity.  Reductions use
fixed row-major summation so results are bit-stable across thread counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .raster_io import CalibrationInfo

if TYPE_CHECKING:  # pragma: no cover - type-only imports
    from .cascade import DisparityField
    from .pseudolabel import AreaUncertaintyField, BinaryMask, SparseLabelMap

D1_ABSOLUTE = 3.0  # px
D1_RELATIVE = 0.05


@dataclass(frozen=True)
class LossConfig:
    silog_lambda: float = 0.85
    bce_epsilon: float = 1e-7

    def __post_init__(self):
        if not 0.0 <= self.silog_lambda <= 1.0:
            raise ValueError("silog_lambda must lie in [0, 1]")
        if not self.bce_epsilon > 0:
            raise ValueError("bce_epsilon must be positive")


@dataclass(eq=False)
class MetricReport:
    epe: float
    d1_all: float
    bad1: float
    bad2: float
    valid_count: int

    CSV_HEADER = "epe,d1_all,bad1,bad2,valid_count"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_HEADER.split(","))
            writer.writerow(
                [repr(self.epe), repr(self.d1_all), repr(self.bad1),
                 repr(self.bad2), self.valid_count]
            )


@dataclass(eq=False)
class RocCurve:
    """Sparsification curve: D1 of the remaining pixels as the most
    uncertain ones are progressively removed."""

    removed_fraction: np.ndarray
    density: np.ndarray
    d1: np.ndarray
    auc: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["removed_fraction", "density", "d1"])
            for r, dens, d in zip(self.removed_fraction, self.density, self.d1):
                writer.writerow([repr(float(r)), repr(float(dens)), repr(float(d))])
            writer.writerow(["auc", repr(float(self.auc)), ""])


def _values(disparity) -> np.ndarray:
    """Accept DisparityField / DisparityRaster / plain arrays."""
    return np.asarray(getattr(disparity, "values", disparity), dtype=np.float64)


def d1_outlier_mask(errors: np.ndarray, gt_values: np.ndarray) -> np.ndarray:
    return (errors > D1_ABSOLUTE) & (errors > D1_RELATIVE * gt_values)


def d1_fraction(pred_values: np.ndarray, gt_values: np.ndarray) -> float:
    err = np.abs(pred_values - gt_values)
    return float(np.mean(d1_outlier_mask(err, gt_values)))


def compute_metrics(disp, gt) -> MetricReport:
    """EPE / D1 / bad-N over pixels valid in both inputs."""
    pred = _values(disp)
    truth = _values(gt)
    if pred.shape != truth.shape:
        raise ValueError("disparity and ground truth shapes must match")
    joint = ~np.isnan(pred) & ~np.isnan(truth)
    if not joint.any():
        raise ValueError("empty intersection: no jointly valid pixels")
    err = np.abs(pred[joint] - truth[joint])
    return MetricReport(
        epe=float(err.mean()),
        d1_all=float(np.mean(d1_outlier_mask(err, truth[joint]))),
        bad1=float(np.mean(err > 1.0)),
        bad2=float(np.mean(err > 2.0)),
        valid_count=int(joint.sum()),
    )


def roc_curve(disp, gt, uncertainty, step: float = 0.05) -> RocCurve:
    """Sparsification protocol: sort valid pixels by decreasing uncertainty
    (ties broken by row-major pixel index), remove them in chunks of
    ``step`` of the original count, and record D1 of the remainder.

    The curve spans removed fractions 0, step, ..., 1; the empty final
    point reports D1 = 0 by convention.  AUC is the trapezoidal area over
    the removed-fraction axis (domain already [0, 1]).
    """
    if not 0.0 < step <= 0.5:
        raise ValueError("step must lie in (0, 0.5]")
    pred = _values(disp)
    truth = _values(gt)
    unc = np.asarray(getattr(uncertainty, "values", uncertainty), dtype=np.float64)
    if pred.shape != truth.shape or unc.shape != truth.shape:
        raise ValueError("shapes must match")
    joint = ~np.isnan(pred) & ~np.isnan(truth)
    total = int(joint.sum())
    if total == 0:
        raise ValueError("empty ground truth")

    err = np.abs(pred[joint] - truth[joint])
    outlier = d1_outlier_mask(err, truth[joint])
    # stable sort on negated uncertainty = decreasing uncertainty,
    # ties resolved by pixel index
    order = np.argsort(-unc[joint], kind="stable")
    outlier_sorted = outlier[order]

    steps = int(np.floor(1.0 / step + 1e-9))
    removed, density, d1 = [], [], []
    for k in range(steps + 1):
        cut = min(total, int(total * k * step + 0.5))
        keep = total - cut
        removed.append(k * step)
        density.append(keep / total)
        d1.append(float(outlier_sorted[cut:].mean()) if keep else 0.0)
    removed_arr = np.asarray(removed)
    d1_arr = np.asarray(d1)
    auc = float(np.trapezoid(d1_arr, removed_arr))
    return RocCurve(removed_arr, np.asarray(density), d1_arr, auc)


def smooth_l1_loss(pred, labels: SparseLabelMap) -> float:
    """Mean smooth-L1 of (label - prediction) over valid label pixels:
    0.5 x**2 for |x| < 1, |x| - 0.5 otherwise."""
    pred_values = _values(pred)
    if pred_values.shape != labels.values.shape:
        raise ValueError("prediction and label shapes must match")
    if not labels.valid.any():
        raise ValueError("zero valid pixels in labels")
    x = labels.values[labels.valid] - pred_values[labels.valid]
    ax = np.abs(x)
    piecewise = np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)
    return float(piecewise.mean())


def silog_loss(pred, labels: SparseLabelMap, config: LossConfig = LossConfig()) -> float:
    """Scale-invariant log loss sqrt(mean(d**2) - lambda * (sum d)**2 / N**2)
    with d = log(pred) - log(labels) over valid label pixels."""
    pred_values = _values(pred)
    if pred_values.shape != labels.values.shape:
        raise ValueError("prediction and label shapes must match")
    if not labels.valid.any():
        raise ValueError("zero valid pixels in labels")
    p = pred_values[labels.valid]
    t = labels.values[labels.valid]
    if np.any(p <= 0.0) or np.any(t <= 0.0):
        raise ValueError("non-positive disparity among valid pixels")
    d = np.log(p) - np.log(t)
    n = d.size
    inner = float(np.mean(d * d)) - config.silog_lambda * float(d.sum()) ** 2 / n**2
    return float(np.sqrt(max(inner, 0.0)))


def bce_uncertainty_loss(
    u_area: AreaUncertaintyField,
    u_gt_mask: BinaryMask,
    config: LossConfig = LossConfig(),
) -> float:
    """Binary cross entropy between predicted area uncertainty and the
    ground-truth error mask, over pixels where the mask is defined."""
    if u_area.values.shape != u_gt_mask.values.shape:
        raise ValueError("shapes must match")
    defined = u_gt_mask.defined
    if not defined.any():
        raise ValueError("empty mask: no defined pixels")
    u = np.clip(u_area.values[defined], config.bce_epsilon, 1.0 - config.bce_epsilon)
    m = u_gt_mask.values[defined].astype(np.float64)
    return float(-np.mean(m * np.log(u) + (1.0 - m) * np.log(1.0 - u)))


def disparity_to_depth(disp, calib: CalibrationInfo) -> np.ndarray:
    """Triangulation depth = focal_length * baseline / disparity (meters).

    Non-positive or invalid disparities map to the NaN sentinel.
    """
    values = _values(disp)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = calib.focal_length * calib.baseline / values
    depth = np.where(np.isnan(values) | (values <= 0.0), np.nan, depth)
    return depth
