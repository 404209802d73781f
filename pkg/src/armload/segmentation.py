"""Arm/background separation by colour clustering."""

from __future__ import annotations

import logging

import numpy as np

from .clustering import kmeans_fit
from .errors import InsufficientDataError
from .imaging import BinaryMask, ImageBuffer, _require_rgb, erode

logger = logging.getLogger(__name__)

# foreground fractions outside this band are flagged for manual review
FOREGROUND_BAND = (0.05, 0.95)
# a single k-means++ start occasionally splits dark detail from everything else
RESTARTS = 4


def blueness(centers: np.ndarray) -> np.ndarray:
    """B - max(R, G) for each RGB center."""
    centers = np.asarray(centers, dtype=np.float64)
    return centers[:, 2] - np.maximum(centers[:, 0], centers[:, 1])


def segment_arm(img: ImageBuffer, k: int = 2, erode_iters: int = 1, seed: int = 0,
                se_radius: int = 1, restarts: int = RESTARTS):
    """Zero the backdrop of ``img``.

    Pixels are clustered on their RGB triples; the cluster whose center is
    the most blue is the background and every other cluster is foreground.
    The foreground mask is eroded ``erode_iters`` times (0 disables erosion).
    Clustering keeps the lowest-inertia of ``restarts`` seeded k-means runs.

    Returns
    -------
    (ImageBuffer, BinaryMask)
        Input image with background pixels set to (0, 0, 0), and the mask.
    """
    rgb = _require_rgb(img)
    h, w = img.height, img.width
    if h * w < k:
        raise InsufficientDataError(f"image has {h * w} pixels, fewer than k={k}")

    model = kmeans_fit(rgb.reshape(-1, 3), k, seed=seed, n_init=restarts)
    bg = int(np.argmax(blueness(model.centers)))
    # label through the fitted centers so the mask is a pure function of them
    d2 = ((rgb.reshape(-1, 1, 3) - model.centers[None]) ** 2).sum(axis=-1)
    labels = np.argmin(d2, axis=1).reshape(h, w)
    mask = BinaryMask(labels != bg)
    if erode_iters > 0:
        mask = erode(mask, se_radius, erode_iters)

    frac = mask.count() / float(h * w)
    if mask.count() == 0:
        logger.warning("segmentation produced an empty foreground")
    elif not FOREGROUND_BAND[0] <= frac <= FOREGROUND_BAND[1]:
        logger.warning("foreground fraction %.3f outside [%.2f, %.2f]; manual review advised",
                       frac, *FOREGROUND_BAND)

    out = img.pixels.copy()
    out[~mask.bits] = 0
    return ImageBuffer(out), mask
