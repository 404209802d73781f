"""Uniform local binary pattern histograms over a square grid of cells."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, OutOfDomainError
from .features import FeatureVector
from .imaging import ImageBuffer

UNIFORM_BINS = 59

# (dy, dx) clockwise from top-left; the first entry is the most significant bit
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def transitions(code: int) -> int:
    """Number of circular 0/1 changes in the 8-bit pattern."""
    rotated = ((code << 1) | (code >> 7)) & 0xFF
    return bin(code ^ rotated).count("1")


def _build_table() -> np.ndarray:
    table = np.full(256, UNIFORM_BINS - 1, dtype=np.intp)
    next_bin = 0
    for code in range(256):
        if transitions(code) <= 2:
            table[code] = next_bin
            next_bin += 1
    assert next_bin == UNIFORM_BINS - 1
    return table


UNIFORM_TABLE = _build_table()


def uniform_bin(code: int) -> int:
    """Histogram bin of an LBP code: 0..57 for uniform codes in ascending order, 58 otherwise."""
    return int(UNIFORM_TABLE[int(code) & 0xFF])


@dataclass(frozen=True)
class LbpConfig:
    grid_n: int = 3
    bins: int = UNIFORM_BINS

    def __post_init__(self):
        if self.grid_n < 1:
            raise InvalidInputError("grid_n must be >= 1")
        if self.bins != UNIFORM_BINS:
            raise InvalidInputError(f"bins is fixed at {UNIFORM_BINS}")

    @property
    def length(self) -> int:
        return self.grid_n * self.grid_n * self.bins


def _gray_pixels(gray: ImageBuffer) -> np.ndarray:
    if gray.channels != 1:
        raise InvalidInputError("LBP requires a single-channel image")
    return gray.pixels


def lbp_code(gray: ImageBuffer, x: int, y: int) -> int:
    px = _gray_pixels(gray)
    h, w = px.shape
    if not (1 <= x <= w - 2 and 1 <= y <= h - 2):
        raise OutOfDomainError(f"({x}, {y}) is not an interior pixel of a {w}x{h} image")
    center = px[y, x]
    code = 0
    for dy, dx in NEIGHBOR_OFFSETS:
        code = (code << 1) | int(px[y + dy, x + dx] >= center)
    return code


def lbp_code_image(gray: ImageBuffer) -> np.ndarray:
    """Codes for every interior pixel, shape ``(h-2, w-2)``."""
    px = _gray_pixels(gray)
    h, w = px.shape
    center = px[1:h - 1, 1:w - 1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for dy, dx in NEIGHBOR_OFFSETS:
        nb = px[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        codes = (codes << 1) | (nb >= center).astype(np.uint8)
    return codes


def grid_edges(size: int, n: int) -> np.ndarray:
    """Cell boundaries along one axis; the remainder goes to the last cell."""
    step = size // n
    edges = np.arange(n + 1) * step
    edges[-1] = size
    return edges


def lbp_features(gray: ImageBuffer, cfg: LbpConfig = LbpConfig()) -> FeatureVector:
    """Concatenated per-cell histograms of uniform LBP bins (row-major, unnormalised)."""
    px = _gray_pixels(gray)
    h, w = px.shape
    n = cfg.grid_n
    if h < n + 2 or w < n + 2:
        raise InvalidInputError(f"image {w}x{h} too small for a {n}x{n} LBP grid")

    bins = np.full((h, w), -1, dtype=np.intp)
    bins[1:h - 1, 1:w - 1] = UNIFORM_TABLE[lbp_code_image(gray)]
    ys, xs = grid_edges(h, n), grid_edges(w, n)
    out = np.zeros((n, n, cfg.bins), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            cell = bins[ys[i]:ys[i + 1], xs[j]:xs[j + 1]]
            cell = cell[cell >= 0]
            out[i, j] = np.bincount(cell, minlength=cfg.bins)
    return FeatureVector(out.ravel(), "LBP")
