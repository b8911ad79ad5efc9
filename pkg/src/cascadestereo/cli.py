"""Command-line surface: match, pseudolabel, eval, roc, adapt, synth.

Exit codes: 0 success, 1 usage or I/O error, 2 internal invariant
violation.  Output raster format is chosen by file extension (.pfm or
.png).  Every command is deterministic given its flags, config, and seeds.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .adapt import AdaptError, TunableParams, adapt_params, generate_label, match_pair
from .cascade import MIN_IMAGE_SIDE
from .config import ConfigError, PipelineConfig, read_config_file, write_config_file
from .evaluation import compute_metrics, roc_curve
from .raster_io import (
    ConstantDisparity,
    DisparityRaster,
    RasterFormatError,
    RasterImage,
    SlantedPlaneDisparity,
    StereogramSpec,
    TwoLayerDisparity,
    generate_stereogram,
    read_image,
    read_kitti_png,
    read_pfm,
    write_image,
    write_kitti_png,
    write_pfm,
)

AREA_THRESHOLD_CEILING = 1.0 - 1e-12  # --t-area 1.0 clamps here (pass-through)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise UsageError(message)


def _load_image(path) -> RasterImage:
    try:
        return read_image(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except (OSError, RasterFormatError, ValueError) as exc:
        raise UsageError(f"cannot read image {path}: {exc}") from exc


def _load_disparity(path) -> DisparityRaster:
    path = Path(path)
    try:
        if path.suffix.lower() == ".pfm":
            return read_pfm(path)
        if path.suffix.lower() == ".png":
            return read_kitti_png(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except (OSError, RasterFormatError, ValueError) as exc:
        raise UsageError(f"cannot read disparity {path}: {exc}") from exc
    raise UsageError(f"unsupported disparity extension: {path}")


def _write_disparity(raster: DisparityRaster, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        write_pfm(raster, path)
    elif path.suffix.lower() == ".png":
        write_kitti_png(raster, path)
    else:
        raise UsageError(f"unsupported disparity extension: {path}")


def _load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        return read_config_file(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _check_pair(left: RasterImage, right: RasterImage) -> None:
    if (left.height, left.width) != (right.height, right.width):
        raise UsageError("left and right images must share dimensions")
    if min(left.height, left.width) < MIN_IMAGE_SIDE:
        raise UsageError(
            f"images must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}"
        )


def _cmd_match(args) -> int:
    left = _load_image(args.left)
    right = _load_image(args.right)
    config = _load_config(args.config)
    _check_pair(left, right)
    disp, unc = match_pair(left, right, config)
    _write_disparity(DisparityRaster(disp.values), args.out_disp)
    if args.out_unc:
        _write_disparity(DisparityRaster(np.sqrt(unc.values)), args.out_unc)
    return 0


def _cmd_pseudolabel(args) -> int:
    left = _load_image(args.left)
    right = _load_image(args.right)
    config = _load_config(args.config)
    _check_pair(left, right)
    if args.t_pixel is not None:
        config = config.replace(t_pixel=args.t_pixel)
    if args.t_area is not None:
        config = config.replace(t_area=min(args.t_area, AREA_THRESHOLD_CEILING))
    if not config.t_pixel >= 0:
        raise UsageError("--t-pixel must be non-negative")
    if not 0.0 < config.t_area < 1.0:
        raise UsageError("--t-area must lie in (0, 1]")
    label = generate_label(left, right, config)
    if label.density == 0.0:
        print("warning: pseudo-label is empty (no pixel passed the filters)",
              file=sys.stderr)
    write_kitti_png(label.to_raster(), args.out)
    return 0


def _cmd_eval(args) -> int:
    disp = _load_disparity(args.disp)
    gt = _load_disparity(args.gt)
    if disp.data.shape != gt.data.shape:
        raise UsageError("disparity and ground-truth dimensions differ")
    try:
        report = compute_metrics(disp, gt)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report.write_csv(args.out_csv)
    return 0


def _cmd_roc(args) -> int:
    disp = _load_disparity(args.disp)
    gt = _load_disparity(args.gt)
    unc = _load_disparity(args.unc)
    if disp.data.shape != gt.data.shape or unc.data.shape != gt.data.shape:
        raise UsageError("disparity, ground-truth, and uncertainty dimensions differ")
    # PNG quantization stores tiny uncertainties as 0 (= invalid); they mean
    # "certain", so map them back to zero uncertainty
    unc_values = np.where(np.isnan(unc.data), 0.0, unc.data)
    try:
        curve = roc_curve(disp, gt, unc_values, step=args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    curve.write_csv(args.out_csv)
    return 0


def _cmd_adapt(args) -> int:
    try:
        lines = Path(args.pairs).read_text().splitlines()
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.pairs}") from None
    pairs = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise UsageError(
                f"{args.pairs}:{lineno}: expected 'left right', got {raw!r}"
            )
        left, right = _load_image(parts[0]), _load_image(parts[1])
        _check_pair(left, right)
        pairs.append((left, right))
    if not pairs:
        raise UsageError(f"{args.pairs}: no stereo pairs listed")
    if not 1 <= args.iters <= 3:
        raise UsageError("--iters must lie in [1, 3]")
    config = _load_config(args.config)
    grid = default_search_grid()
    try:
        tuned, report = adapt_params(
            pairs, TunableParams.from_config(config), args.iters, grid, config
        )
    except AdaptError as exc:
        raise UsageError(str(exc)) from exc
    write_config_file(tuned.apply_to(config), args.out_config)
    if args.out_report:
        report.write_csv(args.out_report)
    return 0


def default_search_grid() -> dict[str, list[float]]:
    return {
        "tau": [0.125, 0.25, 0.5],
        "sgm_p1": [0.05, 0.1, 0.2],
        "sgm_p2": [0.3, 0.5, 1.0],
        "beta_stage3": [0.0, 0.5, 1.0],
        "beta_stage2": [0.0, 0.5, 1.0],
    }


def _parse_model(text: str):
    kind, _, rest = text.partition(":")
    values = [float(v) for v in rest.split(",")] if rest else []
    if kind == "constant" and len(values) == 1:
        return ConstantDisparity(values[0])
    if kind == "plane" and len(values) == 3:
        return SlantedPlaneDisparity(*values)
    if kind == "twolayer" and len(values) == 6:
        fg, bg, x0, y0, x1, y1 = values
        return TwoLayerDisparity(fg, bg, (int(x0), int(y0), int(x1), int(y1)))
    raise UsageError(
        f"bad --model {text!r}; expected constant:d, plane:a,b,c, "
        "or twolayer:fg,bg,x0,y0,x1,y1"
    )


def _cmd_synth(args) -> int:
    model = _parse_model(args.model)
    try:
        spec = StereogramSpec(
            width=args.width,
            height=args.height,
            model=model,
            dot_density=args.dot_density,
            noise_sigma=args.noise_sigma,
            brightness_offset_right=args.offset_right,
            seed=args.seed,
            d_max=args.d_max,
        )
        left, right, gt = generate_stereogram(spec)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_image(left, out / "left.png")
    write_image(right, out / "right.png")
    write_pfm(gt, out / "gt.pfm")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="cascadestereo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="estimate disparity for a rectified pair")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--config")
    p.add_argument("--out-disp", required=True)
    p.add_argument("--out-unc")
    p.set_defaults(handler=_cmd_match)

    p = sub.add_parser("pseudolabel", help="write an uncertainty-filtered label")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--config")
    p.add_argument("--t-pixel", type=float)
    p.add_argument("--t-area", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_pseudolabel)

    p = sub.add_parser("eval", help="disparity metrics against ground truth")
    p.add_argument("--disp", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out-csv", required=True)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("roc", help="sparsification curve for a confidence map")
    p.add_argument("--disp", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--unc", required=True)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--out-csv", required=True)
    p.set_defaults(handler=_cmd_roc)

    p = sub.add_parser("adapt", help="self-tune parameters on unlabeled pairs")
    p.add_argument("--pairs", required=True,
                   help="manifest file, one 'left right' pair per line")
    p.add_argument("--iters", type=int, default=2)
    p.add_argument("--config")
    p.add_argument("--out-config", required=True)
    p.add_argument("--out-report")
    p.set_defaults(handler=_cmd_adapt)

    p = sub.add_parser("synth", help="generate a random-dot stereo pair + GT")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--model", required=True)
    p.add_argument("--dot-density", type=float, default=0.5)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--offset-right", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-max", type=float, default=256.0)
    p.set_defaults(handler=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # invariant violated mid-pipeline
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
