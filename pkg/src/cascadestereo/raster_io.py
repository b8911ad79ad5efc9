"""Image / disparity raster I/O and synthetic random-dot stereo pair generation.

File formats:

* PFM ("Pf" grayscale): ASCII header ``Pf\\n<w> <h>\\n<scale>\\n`` followed by
  w*h 4-byte floats, rows stored bottom-to-top, little-endian iff scale < 0.
  Payload is float32, so exactness claims hold for float32-representable
  values.  The invalid sentinel (NaN) is written as +inf and mapped back to
  NaN on read.
* KITTI disparity PNG: 16-bit single-channel, stored value = round(256 * d),
  0 means invalid.  Encoding is lossy below 1/512 px (rounds to 0) and above
  65535/256 px (clips).

Intensity images are single-channel float in [0, 1].  8-bit PNGs are scaled
by 255, 16-bit by 65535, color inputs are reduced by channel-mean luminance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image


class RasterFormatError(ValueError):
    """Raised when an on-disk raster cannot be decoded."""


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Single-channel intensity grid with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("image data must be a non-empty 2-D array")
        if not np.all(np.isfinite(data)):
            raise ValueError("image intensities must be finite")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class DisparityRaster:
    """Per-pixel disparity in pixels; NaN marks invalid pixels."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("disparity data must be a non-empty 2-D array")
        finite = data[~np.isnan(data)]
        if finite.size and not np.all(np.isfinite(finite)):
            raise ValueError("disparities must be finite or NaN")
        if finite.size and finite.min() < 0.0:
            raise ValueError("disparities must be non-negative")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def values(self) -> np.ndarray:
        return self.data

    @property
    def valid_mask(self) -> np.ndarray:
        return ~np.isnan(self.data)


@dataclass(frozen=True)
class CalibrationInfo:
    """Camera intrinsics needed for triangulation."""

    focal_length: float  # pixels
    baseline: float  # meters

    def __post_init__(self):
        if not (self.focal_length > 0 and self.baseline > 0):
            raise ValueError("focal length and baseline must be positive")


# ---------------------------------------------------------------------------
# Synthetic stereogram specs


@dataclass(frozen=True)
class ConstantDisparity:
    value: float


@dataclass(frozen=True)
class SlantedPlaneDisparity:
    """d(x, y) = a*x + b*y + c."""

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class TwoLayerDisparity:
    """Foreground rectangle floating over a constant background.

    ``box`` is (x0, y0, x1, y1), half-open, in image pixels.
    """

    foreground: float
    background: float
    box: tuple[int, int, int, int]


DisparityModel = Union[ConstantDisparity, SlantedPlaneDisparity, TwoLayerDisparity]


@dataclass(frozen=True)
class StereogramSpec:
    width: int
    height: int
    model: DisparityModel
    dot_density: float = 0.5
    noise_sigma: float = 0.0
    brightness_offset_right: float = 0.0
    seed: int = 0
    d_max: float = 256.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("stereogram dimensions must be positive")
        if not (0.0 < self.dot_density <= 1.0):
            raise ValueError("dot_density must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.d_max <= 0:
            raise ValueError("d_max must be positive")


# ---------------------------------------------------------------------------
# PFM


def _read_pfm_token(handle) -> bytes:
    # one whitespace-delimited header token, tolerating any whitespace mix
    token = b""
    while True:
        ch = handle.read(1)
        if ch == b"":
            raise RasterFormatError("truncated PFM header")
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pfm(path) -> DisparityRaster:
    """Read a grayscale PFM file into a disparity raster.

    Rows are returned top-to-bottom regardless of PFM's bottom-to-top
    storage; +/-inf values are mapped to the NaN invalid sentinel.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_pfm_token(fh)
        if magic == b"PF":
            raise RasterFormatError(f"{path}: color PFM not supported (header 'PF')")
        if magic != b"Pf":
            raise RasterFormatError(f"{path}: malformed PFM header {magic!r}")
        try:
            width = int(_read_pfm_token(fh))
            height = int(_read_pfm_token(fh))
            scale = float(_read_pfm_token(fh))
        except ValueError as exc:
            raise RasterFormatError(f"{path}: malformed PFM header: {exc}") from exc
        if width < 1 or height < 1:
            raise RasterFormatError(f"{path}: bad PFM dimensions {width}x{height}")
        if scale == 0.0:
            raise RasterFormatError(f"{path}: PFM scale must be non-zero")
        payload = fh.read()
    expected = width * height * 4
    if len(payload) != expected:
        raise RasterFormatError(
            f"{path}: payload mismatch (expected {expected} bytes, got {len(payload)})"
        )
    endian = "<" if scale < 0 else ">"
    data = np.frombuffer(payload, dtype=np.dtype(endian + "f4")).astype(np.float64)
    data = data.reshape(height, width)[::-1]  # stored bottom-to-top
    data = data.copy()
    data[np.isinf(data)] = np.nan
    return DisparityRaster(data)


def write_pfm(raster: DisparityRaster, path) -> None:
    """Write a disparity raster as little-endian grayscale PFM (scale -1)."""
    data = raster.data.astype(np.float32)
    data = np.where(np.isnan(data), np.float32(np.inf), data)
    header = f"Pf\n{raster.width} {raster.height}\n-1.0\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data[::-1].astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# KITTI 16-bit disparity PNG


def read_kitti_png(path) -> DisparityRaster:
    """Read a 16-bit KITTI disparity PNG; stored 0 decodes to invalid."""
    path = Path(path)
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I;16B", "I"):
            raise RasterFormatError(
                f"{path}: expected 16-bit grayscale PNG, got mode {img.mode!r}"
            )
        stored = np.asarray(img, dtype=np.int64)
    if stored.ndim != 2:
        raise RasterFormatError(f"{path}: expected single-channel PNG")
    if stored.max(initial=0) > 65535 or stored.min(initial=0) < 0:
        raise RasterFormatError(f"{path}: sample values exceed 16-bit range")
    data = stored / 256.0
    data[stored == 0] = np.nan
    return DisparityRaster(data)


def write_kitti_png(raster: DisparityRaster, path) -> None:
    """Write a disparity raster as 16-bit PNG, value = round(256 * d).

    Invalid (NaN) pixels are stored as 0.  Disparities below 1/512 px round
    to 0 and therefore decode as invalid (documented lossy floor); values
    above 65535/256 px clip to the largest representable code.
    """
    data = raster.data
    stored = np.floor(data * 256.0 + 0.5)
    stored = np.where(np.isnan(data), 0.0, stored)
    stored = np.clip(stored, 0, 65535).astype(np.uint16)
    Image.fromarray(stored, mode="I;16").save(path, format="PNG")


# ---------------------------------------------------------------------------
# Generic image reading/writing for the CLI


def read_image(path) -> RasterImage:
    """Load an intensity image; color inputs collapse to channel-mean luminance."""
    path = Path(path)
    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B"):
            arr = np.asarray(img, dtype=np.float64) / 65535.0
        elif img.mode == "I":
            arr = np.asarray(img, dtype=np.float64) / 65535.0
        elif img.mode == "L":
            arr = np.asarray(img, dtype=np.float64) / 255.0
        else:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
            arr = rgb.mean(axis=2)
    return RasterImage(np.clip(arr, 0.0, 1.0))


def write_image(image: RasterImage, path) -> None:
    """Write an intensity image as 16-bit grayscale PNG."""
    stored = np.floor(image.data * 65535.0 + 0.5).astype(np.uint16)
    Image.fromarray(stored, mode="I;16").save(path, format="PNG")


# ---------------------------------------------------------------------------
# Random-dot stereogram generation


def _model_disparities(spec: StereogramSpec) -> np.ndarray:
    xs = np.arange(spec.width, dtype=np.float64)[None, :]
    ys = np.arange(spec.height, dtype=np.float64)[:, None]
    model = spec.model
    if isinstance(model, ConstantDisparity):
        gt = np.full((spec.height, spec.width), float(model.value))
    elif isinstance(model, SlantedPlaneDisparity):
        gt = model.a * xs + model.b * ys + np.full_like(xs * ys, model.c)
    elif isinstance(model, TwoLayerDisparity):
        gt = np.full((spec.height, spec.width), float(model.background))
        x0, y0, x1, y1 = model.box
        gt[y0:y1, x0:x1] = float(model.foreground)
    else:
        raise TypeError(f"unknown disparity model {model!r}")
    if gt.min() < 0.0 or gt.max() >= spec.d_max:
        raise ValueError(
            f"disparity model produces values outside [0, {spec.d_max})"
        )
    return gt


def _random_dots(rng: np.random.Generator, height, width, density) -> np.ndarray:
    mask = rng.random((height, width)) < density
    values = rng.random((height, width))
    return np.where(mask, values, 0.0)


def generate_stereogram(
    spec: StereogramSpec,
) -> tuple[RasterImage, RasterImage, DisparityRaster]:
    """Synthesize a rectified random-dot stereo pair with exact ground truth.

    The right image is the left image forward-warped along scanlines with a
    disparity z-buffer (nearer surface, i.e. larger disparity, wins), so
    left(x, y) == right(x - gt(x, y), y) on every visible pixel.  Pixels
    occluded in or displaced out of the right view get the invalid sentinel
    in the returned ground truth; disoccluded right-image pixels are filled
    with fresh random dots.  All randomness comes from ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    left = _random_dots(rng, h, w, spec.dot_density)
    hole_fill = _random_dots(rng, h, w, spec.dot_density)
    gt = _model_disparities(spec)

    xs = np.arange(w, dtype=np.float64)[None, :]
    targets = np.floor(xs - gt + 0.5).astype(np.int64)  # right-image column
    rows = np.broadcast_to(np.arange(h)[:, None], (h, w))
    in_view = (targets >= 0) & (targets < w)

    # z-buffer: per right pixel keep the largest disparity, then the
    # rightmost source column among ties (deterministic)
    flat_t = (rows * w + targets)[in_view]
    zbuf = np.full(h * w, -np.inf)
    np.maximum.at(zbuf, flat_t, gt[in_view])
    front = in_view & (gt == zbuf.reshape(h, w)[rows, np.clip(targets, 0, w - 1)])
    xbuf = np.full(h * w, -1, dtype=np.int64)
    cols = np.broadcast_to(xs.astype(np.int64), (h, w))
    np.maximum.at(xbuf, (rows * w + targets)[front], cols[front])
    visible = front & (cols == xbuf.reshape(h, w)[rows, np.clip(targets, 0, w - 1)])

    right = hole_fill.copy()
    right[rows[visible], targets[visible]] = left[visible]

    gt_out = np.where(visible, gt, np.nan)

    if spec.brightness_offset_right != 0.0:
        right = right + spec.brightness_offset_right
    if spec.noise_sigma > 0.0:
        left = left + rng.normal(0.0, spec.noise_sigma, (h, w))
        right = right + rng.normal(0.0, spec.noise_sigma, (h, w))
    left = np.clip(left, 0.0, 1.0)
    right = np.clip(right, 0.0, 1.0)
    return RasterImage(left), RasterImage(right), DisparityRaster(gt_out)
