"""Joint hue/saturation histograms over a grid of cells."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .features import FeatureVector
from .imaging import ImageBuffer, rgb_to_hsv
from .lbp import grid_edges


def hs_bins(h: np.ndarray, s: np.ndarray, bins: int) -> np.ndarray:
    """Joint bin index ``h_bin * bins + s_bin``; S == 1 lands in the last bin."""
    hb = np.minimum((h * bins / 360.0).astype(np.intp), bins - 1)
    sb = np.minimum((s * bins).astype(np.intp), bins - 1)
    return hb * bins + sb


def hc_features(img: ImageBuffer, grid_n: int = 3, bins_per_channel: int = 5,
                skip_background: bool = True) -> FeatureVector:
    """Per-cell 2-D H x S histograms, concatenated row-major.

    With ``skip_background`` set, pixels exactly (0, 0, 0) are not counted.
    """
    if grid_n < 1 or bins_per_channel < 1:
        raise InvalidInputError("grid_n and bins_per_channel must be >= 1")
    h, s, _ = rgb_to_hsv(img)
    idx = hs_bins(h, s, bins_per_channel)
    if skip_background:
        idx = np.where(img.pixels.any(axis=-1), idx, -1)

    nb = bins_per_channel * bins_per_channel
    ys, xs = grid_edges(img.height, grid_n), grid_edges(img.width, grid_n)
    out = np.zeros((grid_n, grid_n, nb), dtype=np.float64)
    for i in range(grid_n):
        for j in range(grid_n):
            cell = idx[ys[i]:ys[i + 1], xs[j]:xs[j + 1]]
            out[i, j] = np.bincount(cell[cell >= 0], minlength=nb)
    return FeatureVector(out.ravel(), "HC")
