"""Hand-crafted matching features: census transform, gradients, image pyramids.

The census channels are +/-1 indicators ("is this window neighbor brighter
than the center"), which makes the features invariant to any strictly
monotone intensity remapping.  Optional Sobel gradient channels are
normalized to [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster_io import RasterImage


@dataclass(frozen=True)
class FeatureConfig:
    census_radius: int = 2
    include_gradients: bool = False
    group_count: int = 8

    def __post_init__(self):
        if self.census_radius < 1:
            raise ValueError("census_radius must be >= 1")
        if self.group_count < 1:
            raise ValueError("group_count must be >= 1")

    @property
    def channel_count(self) -> int:
        n = (2 * self.census_radius + 1) ** 2 - 1
        if self.include_gradients:
            n += 2
        return n


@dataclass(eq=False)
class FeatureMap:
    """Per-pixel feature vectors, (height, width, channels), float64."""

    data: np.ndarray
    group_count: int

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError("feature data must be (height, width, channels)")
        if self.channels % self.group_count != 0:
            raise ValueError(
                f"channel count {self.channels} not divisible by "
                f"group count {self.group_count}"
            )

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(eq=False)
class ImagePyramid:
    """levels[i] is the input downsampled by 2**i (box average, ceil dims)."""

    levels: list[RasterImage]

    def __getitem__(self, i: int) -> RasterImage:
        return self.levels[i]

    def __len__(self) -> int:
        return len(self.levels)


def census_transform(image: RasterImage, config: FeatureConfig) -> FeatureMap:
    """Census features: channel k is +1 where the k-th window neighbor is
    brighter than the center, else -1 (ties map to -1).  Borders clamp.
    """
    r = config.census_radius
    h, w = image.height, image.width
    if 2 * r + 1 > min(h, w):
        raise ValueError(f"census window {2 * r + 1} exceeds image {h}x{w}")
    data = image.data
    padded = np.pad(data, r, mode="edge")
    channels = np.empty((h, w, config.channel_count), dtype=np.float64)
    k = 0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            neighbor = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            channels[:, :, k] = np.where(neighbor > data, 1.0, -1.0)
            k += 1
    if config.include_gradients:
        # 3x3 Sobel response of a [0,1] image lies in [-4, 4]
        channels[:, :, k] = ndimage.sobel(data, axis=1, mode="nearest") / 4.0
        channels[:, :, k + 1] = ndimage.sobel(data, axis=0, mode="nearest") / 4.0
    return FeatureMap(channels, config.group_count)


def _box_halve(data: np.ndarray) -> np.ndarray:
    h, w = data.shape
    if h % 2 or w % 2:
        data = np.pad(data, ((0, h % 2), (0, w % 2)), mode="edge")
        h, w = data.shape
    return data.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def build_pyramid(image: RasterImage, num_levels: int) -> ImagePyramid:
    """Box-average pyramid; level i has ceil(dims / 2**i) pixels per axis."""
    if num_levels < 1:
        raise ValueError("num_levels must be >= 1")
    levels = [image]
    for _ in range(num_levels - 1):
        levels.append(RasterImage(np.clip(_box_halve(levels[-1].data), 0.0, 1.0)))
    return ImagePyramid(levels)
