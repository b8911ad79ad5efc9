"""Shared resampling helpers (half-pixel-center bilinear interpolation)."""

from __future__ import annotations

import numpy as np


def bilinear_resize(data: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Resize a 2-D array with bilinear interpolation.

    Output pixel centers map to input coordinates via the half-pixel
    convention src = (dst + 0.5) * in/out - 0.5, clamped to the input grid.
    """
    in_h, in_w = data.shape
    if (out_height, out_width) == (in_h, in_w):
        return data.copy()
    ys = np.clip((np.arange(out_height) + 0.5) * (in_h / out_height) - 0.5, 0, in_h - 1)
    xs = np.clip((np.arange(out_width) + 0.5) * (in_w / out_width) - 0.5, 0, in_w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = (1.0 - fx) * data[np.ix_(y0, x0)] + fx * data[np.ix_(y0, x1)]
    bottom = (1.0 - fx) * data[np.ix_(y1, x0)] + fx * data[np.ix_(y1, x1)]
    return (1.0 - fy) * top + fy * bottom
