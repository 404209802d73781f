"""Bag-of-keypoints features.

The default detector is a reduced SURF-style pipeline: determinant of
Hessian with box-filter second derivatives from an integral image,
three octaves of four filter sizes, 3x3x3 non-maximum suppression, and an
upright 64-d descriptor of Haar-wavelet sums over a 4x4 grid of
sub-regions. Any callable with the ``Detector`` signature can replace it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .clustering import KMeansModel, kmeans_fit, kmeans_predict
from .errors import InsufficientDataError, InvalidInputError
from .features import FeatureVector
from .imaging import ImageBuffer

DEFAULT_VOCABULARY = 800
DESCRIPTOR_SIZE = 64
MIN_SIDE = 32
# yields ~250 keypoints on a 256x256 checkerboard of 16 px squares
DEFAULT_THRESHOLD = 0.016

# filter side lengths per octave (SURF layout)
OCTAVES = ((9, 15, 21, 27), (15, 27, 39, 51), (27, 51, 75, 99))


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    scale: float
    response: float
    descriptor: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.descriptor, dtype=np.float64).ravel()
        if d.shape[0] != DESCRIPTOR_SIZE:
            raise InvalidInputError(f"descriptor must have {DESCRIPTOR_SIZE} entries")
        object.__setattr__(self, "descriptor", d)


Detector = Callable[[ImageBuffer, float], list]


def integral_image(img: np.ndarray) -> np.ndarray:
    """Summed-area table with a leading zero row and column."""
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    ii[1:, 1:] = img.cumsum(0).cumsum(1)
    return ii


def box_sums(ii, y0, x0, y1, x1):
    """Sum of pixels in rows [y0, y1) and columns [x0, x1); bounds are clipped."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    y0 = np.clip(y0, 0, h)
    y1 = np.clip(y1, 0, h)
    x0 = np.clip(x0, 0, w)
    x1 = np.clip(x1, 0, w)
    return ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]


def hessian_response(ii: np.ndarray, size: int) -> np.ndarray:
    """Scale-normalised det(H) = Dxx*Dyy - (0.9*Dxy)^2 for an odd filter side ``size``.

    Pixels where the filter does not fit inside the image get 0.
    """
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    lobe = size // 3
    half = size // 2
    out = np.zeros((h, w))
    if h <= 2 * half or w <= 2 * half:
        return out
    nh, nw = h - 2 * half, w - 2 * half

    def box(dy0, dx0, dy1, dx1):
        # rows [r+dy0, r+dy1] and columns [c+dx0, c+dx1] for every valid (r, c)
        r0, r1 = half + dy0, half + dy1 + 1
        c0, c1 = half + dx0, half + dx1 + 1
        return (ii[r1:r1 + nh, c1:c1 + nw] - ii[r0:r0 + nh, c1:c1 + nw]
                - ii[r1:r1 + nh, c0:c0 + nw] + ii[r0:r0 + nh, c0:c0 + nw])

    # Dyy: three stacked lobes (+1, -2, +1), each `lobe` rows tall, 2*lobe-1 wide
    bw = lobe - 1
    dyy = box(-half, -bw, half, bw) - 3 * box(-(lobe // 2), -bw, lobe // 2, bw)
    dxx = box(-bw, -half, bw, half) - 3 * box(-bw, -(lobe // 2), bw, lobe // 2)
    dxy = (box(-lobe, -lobe, -1, -1) + box(1, 1, lobe, lobe)
           - box(-lobe, 1, -1, lobe) - box(1, -lobe, lobe, -1))
    area = float(size * size)
    out[half:h - half, half:w - half] = (dxx * dyy - (0.9 * dxy) ** 2) / (area * area)
    return out


def describe_many(ii: np.ndarray, xs, ys, scales) -> np.ndarray:
    """Upright 64-d descriptors: (sum dx, sum dy, sum |dx|, sum |dy|) over 4x4 sub-regions.

    Haar responses are sampled on a 20x20 grid with spacing ``scale``
    around each point and Gaussian-weighted (sigma = 3.3 * scale).
    Descriptors are L2-normalised; all-zero descriptors stay zero.
    """
    xs = np.asarray(xs, dtype=np.float64)[:, None, None]
    ys = np.asarray(ys, dtype=np.float64)[:, None, None]
    sc = np.asarray(scales, dtype=np.float64)[:, None, None]
    if xs.shape[0] == 0:
        return np.empty((0, DESCRIPTOR_SIZE))
    grid = np.arange(20) - 9.5
    gx = grid[None, None, :] * sc
    gy = grid[None, :, None] * sc
    half = np.maximum(1, np.round(sc).astype(np.intp))
    xi = np.floor(xs + gx + 0.5).astype(np.intp)
    yi = np.floor(ys + gy + 0.5).astype(np.intp)
    dx = (box_sums(ii, yi - half, xi, yi + half, xi + half)
          - box_sums(ii, yi - half, xi - half, yi + half, xi))
    dy = (box_sums(ii, yi, xi - half, yi + half, xi + half)
          - box_sums(ii, yi - half, xi - half, yi, xi + half))
    weight = np.exp(-(gx ** 2 + gy ** 2) / (2.0 * (3.3 * sc) ** 2))
    dx = dx * weight
    dy = dy * weight
    n = dx.shape[0]
    parts = [v.reshape(n, 4, 5, 4, 5).sum(axis=(2, 4))
             for v in (dx, dy, np.abs(dx), np.abs(dy))]
    desc = np.stack(parts, axis=-1).reshape(n, DESCRIPTOR_SIZE)
    norm = np.linalg.norm(desc, axis=1, keepdims=True)
    return np.divide(desc, norm, out=np.zeros_like(desc), where=norm > 0)


def _refine(resp, r, c):
    """Sub-pixel offset of a peak along each axis from a parabola through 3 samples."""
    def axis(a, b, cc):
        den = a - 2 * b + cc
        return 0.0 if den == 0 else float(np.clip(0.5 * (a - cc) / den, -0.5, 0.5))
    h, w = resp.shape
    oy = axis(resp[r - 1, c], resp[r, c], resp[r + 1, c]) if 0 < r < h - 1 else 0.0
    ox = axis(resp[r, c - 1], resp[r, c], resp[r, c + 1]) if 0 < c < w - 1 else 0.0
    return ox, oy


def _octave_peaks(stack, threshold):
    """(layer, row, col) of 3x3x3 maxima above threshold, one per plateau."""
    peaks = ndimage.maximum_filter(stack, size=3, mode="constant", cval=-np.inf)
    cand = (stack == peaks) & (stack > threshold)
    cand[0] = cand[-1] = False
    if not cand.any():
        return []
    # equal-valued neighbouring maxima form a plateau; keep its raster-first member
    labels, n = ndimage.label(cand, structure=np.ones((3, 3, 3), dtype=bool))
    flat = labels.ravel()
    _, first = np.unique(flat, return_index=True)
    first = first[flat[first] > 0]
    return [np.unravel_index(i, stack.shape) for i in np.sort(first)]


def detect_and_describe(gray: ImageBuffer, threshold: float = DEFAULT_THRESHOLD) -> list:
    """Hessian blobs with upright descriptors, strongest first."""
    if gray.channels != 1:
        raise InvalidInputError("keypoint detection requires a single-channel image")
    if gray.height < MIN_SIDE or gray.width < MIN_SIDE:
        raise InvalidInputError(
            f"image {gray.width}x{gray.height} smaller than {MIN_SIDE}x{MIN_SIDE}")
    ii = integral_image(gray.pixels.astype(np.float64) / 255.0)
    cache = {}
    found = []
    for sizes in OCTAVES:
        stack = np.stack([cache[s] if s in cache else cache.setdefault(s, hessian_response(ii, s))
                          for s in sizes])
        for layer, r, c in _octave_peaks(stack, threshold):
            ox, oy = _refine(stack[layer], r, c)
            found.append((float(stack[layer, r, c]), 1.2 * sizes[layer] / 9.0,
                          float(r) + oy, float(c) + ox))
    found.sort(key=lambda t: (-t[0], t[1], t[2], t[3]))
    if not found:
        return []
    resp, scales, ys, xs = (np.array(v) for v in zip(*found))
    desc = describe_many(ii, xs, ys, scales)
    return [Keypoint(x=float(x), y=float(y), scale=float(s), response=float(r), descriptor=d)
            for r, s, y, x, d in zip(resp, scales, ys, xs, desc)]


@dataclass
class Codebook:
    """Visual vocabulary: a k-means model over keypoint descriptors."""

    model: KMeansModel

    @property
    def k(self) -> int:
        return self.model.k

    def to_dict(self) -> dict:
        return {"kind": "codebook", "version": 1, "k": self.k,
                "centers": self.model.centers.tolist(), "inertia": self.model.inertia}

    @classmethod
    def from_dict(cls, doc: dict) -> "Codebook":
        centers = np.asarray(doc["centers"], dtype=np.float64)
        if centers.ndim != 2 or centers.shape[0] != int(doc["k"]):
            raise InvalidInputError("codebook centers do not match declared k")
        return cls(KMeansModel(centers=centers, inertia=float(doc.get("inertia", 0.0))))


def build_codebook(descriptor_sets: Sequence, k: int = DEFAULT_VOCABULARY, seed: int = 0,
                   max_iters: int = 100) -> Codebook:
    """Cluster the pooled descriptors of the (training) images into ``k`` visual words."""
    arrays = [np.asarray(d, dtype=np.float64).reshape(-1, DESCRIPTOR_SIZE)
              for d in descriptor_sets]
    pooled = np.vstack(arrays) if arrays else np.empty((0, DESCRIPTOR_SIZE))
    if pooled.shape[0] < k:
        raise InsufficientDataError(
            f"codebook of {k} words needs at least {k} descriptors; got {pooled.shape[0]} "
            f"(short by {k - pooled.shape[0]})")
    return Codebook(kmeans_fit(pooled, k, max_iters=max_iters, seed=seed))


def descriptors_of(keypoints) -> np.ndarray:
    if not keypoints:
        return np.empty((0, DESCRIPTOR_SIZE))
    return np.stack([kp.descriptor for kp in keypoints])


def bkp_features(keypoints, book: Codebook) -> FeatureVector:
    """Codeword occurrence counts; an image without keypoints gives the zero vector."""
    desc = descriptors_of(keypoints)
    if desc.shape[0] and desc.shape[1] != book.model.dim:
        raise InvalidInputError(
            f"descriptor dimension {desc.shape[1]} != codebook dimension {book.model.dim}")
    hist = np.zeros(book.k)
    if desc.shape[0]:
        hist = np.bincount(kmeans_predict(book.model, desc), minlength=book.k).astype(np.float64)
    return FeatureVector(hist, "BKP")
