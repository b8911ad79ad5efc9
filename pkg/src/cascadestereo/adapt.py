"""Self-adaptation: tune pipeline knobs against self-generated pseudo-labels.

Each iteration (a) matches the target pairs with the current parameters,
(b) turns the results into uncertainty-filtered pseudo-labels at the
configured thresholds, and (c) runs one coordinate-descent pass over the
search grid, picking the candidate that minimizes the mean smooth-L1 loss
of the re-matched disparity against the labels frozen in step (b).  Labels
regenerate only between iterations, so the per-iteration objective is
stationary.  Ground truth never enters the loop.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from .cascade import DisparityField, UncertaintyField, refine_disparity, run_cascade
from .config import PipelineConfig
from .evaluation import smooth_l1_loss
from .pseudolabel import (
    SparseLabelMap,
    area_uncertainty,
    filter_by_area_uncertainty,
    filter_by_pixel_uncertainty,
)
from .raster_io import RasterImage

MAX_ITERATIONS = 3  # gains saturate; more iterations buy nothing

# coordinate-descent sweep order: matching knobs first, label squash last
_SWEEP_ORDER = (
    "tau",
    "sgm_p1",
    "sgm_p2",
    "alpha_stage3",
    "alpha_stage2",
    "beta_stage3",
    "beta_stage2",
    "area_midpoint",
)
# fields that change the matcher output (and therefore the objective)
_MATCH_FIELDS = tuple(name for name in _SWEEP_ORDER if name != "area_midpoint")


class AdaptError(RuntimeError):
    pass


@dataclass(frozen=True)
class TunableParams:
    alpha_stage3: float = 0.0
    alpha_stage2: float = 0.0
    beta_stage3: float = 0.0
    beta_stage2: float = 0.0
    tau: float = 0.25
    sgm_p1: float = 0.1
    sgm_p2: float = 0.5
    area_midpoint: float = 1.0

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "TunableParams":
        return cls(
            alpha_stage3=config.alpha_stage3,
            alpha_stage2=config.alpha_stage2,
            beta_stage3=config.beta_stage3,
            beta_stage2=config.beta_stage2,
            tau=config.tau,
            sgm_p1=config.sgm_p1,
            sgm_p2=config.sgm_p2,
            area_midpoint=config.area_m,
        )

    def apply_to(self, config: PipelineConfig) -> PipelineConfig:
        return config.replace(
            alpha_stage3=self.alpha_stage3,
            alpha_stage2=self.alpha_stage2,
            beta_stage3=self.beta_stage3,
            beta_stage2=self.beta_stage2,
            tau=self.tau,
            sgm_p1=self.sgm_p1,
            sgm_p2=self.sgm_p2,
            area_m=self.area_midpoint,
        )


@dataclass(eq=False)
class IterationRecord:
    iteration: int
    label_density: float
    label_d1: float | None  # filled only when ground truth is supplied later
    loss: float
    params: TunableParams


@dataclass(eq=False)
class AdaptReport:
    iterations: list[IterationRecord]

    def write_csv(self, path) -> None:
        names = [f.name for f in fields(TunableParams)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "label_density", "label_d1", "loss", *names])
            for rec in self.iterations:
                row = [rec.iteration, repr(rec.label_density),
                       "" if rec.label_d1 is None else repr(rec.label_d1),
                       repr(rec.loss)]
                row += [repr(getattr(rec.params, n)) for n in names]
                writer.writerow(row)


def match_pair(
    left: RasterImage, right: RasterImage, config: PipelineConfig
) -> tuple[DisparityField, UncertaintyField]:
    """Refined full-resolution disparity plus its uncertainty field."""
    trace = run_cascade(left, right, config.feature_config(), config.cascade_params())
    return refine_disparity(trace.disparity), trace.uncertainty


def generate_label(
    left: RasterImage, right: RasterImage, config: PipelineConfig
) -> SparseLabelMap:
    """Pseudo-label: pixel-level and area-level filters intersected."""
    disp, unc = match_pair(left, right, config)
    by_pixel = filter_by_pixel_uncertainty(disp, unc, config.t_pixel)
    u_area = area_uncertainty(disp, unc, left, config.area_config())
    by_area = filter_by_area_uncertainty(disp, u_area, config.t_area)
    valid = by_pixel.valid & by_area.valid
    return SparseLabelMap(np.where(valid, disp.values, np.nan), valid)


def adapt_params(
    pairs: list[tuple[RasterImage, RasterImage]],
    init: TunableParams,
    iterations: int,
    search_grid: dict[str, list[float]],
    config: PipelineConfig = PipelineConfig(),
) -> tuple[TunableParams, AdaptReport]:
    """Coordinate descent over ``search_grid``, iterated with regenerated
    pseudo-labels.  Pairs whose labels come out empty are skipped with a
    warning; if no pair yields supervision the adaptation aborts.

    Ties in the objective break toward the value in ``init``.
    """
    if not pairs:
        raise ValueError("need at least one stereo pair")
    if not 1 <= iterations <= MAX_ITERATIONS:
        raise ValueError(f"iterations must lie in [1, {MAX_ITERATIONS}]")
    unknown = set(search_grid) - set(_SWEEP_ORDER)
    if unknown:
        raise ValueError(f"unknown tunable(s) in search grid: {sorted(unknown)}")

    disp_cache: dict[tuple, DisparityField] = {}

    def matched(pair_idx: int, params: TunableParams) -> DisparityField:
        key = (pair_idx,) + tuple(getattr(params, n) for n in _MATCH_FIELDS)
        if key not in disp_cache:
            left, right = pairs[pair_idx]
            disp, _ = match_pair(left, right, params.apply_to(config))
            disp_cache[key] = disp
        return disp_cache[key]

    current = init
    records = []
    for iteration in range(1, iterations + 1):
        labels = []
        for idx, (left, right) in enumerate(pairs):
            label = generate_label(left, right, current.apply_to(config))
            if label.density == 0.0:
                warnings.warn(
                    f"pair {idx}: pseudo-label has no valid pixels, skipped",
                    stacklevel=2,
                )
                labels.append(None)
            else:
                labels.append(label)
        usable = [i for i, lab in enumerate(labels) if lab is not None]
        if not usable:
            raise AdaptError("no supervision: every pair produced an empty label")

        loss_cache: dict[TunableParams, float] = {}

        def objective(params: TunableParams) -> float:
            if params not in loss_cache:
                total = 0.0
                for i in usable:
                    total += smooth_l1_loss(matched(i, params), labels[i])
                loss_cache[params] = total / len(usable)
            return loss_cache[params]

        for name in _SWEEP_ORDER:
            if name not in search_grid:
                continue
            candidates = list(search_grid[name])
            losses = [
                objective(replace(current, **{name: value})) for value in candidates
            ]
            best = min(losses)
            tied = [v for v, l in zip(candidates, losses) if l == best]
            init_value = getattr(init, name)
            choice = init_value if init_value in tied else tied[0]
            current = replace(current, **{name: choice})

        density = sum(labels[i].density for i in usable) / len(usable)
        records.append(
            IterationRecord(iteration, density, None, objective(current), current)
        )
    return current, AdaptReport(records)
