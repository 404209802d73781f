"""Outer contours of a foreground mask and their intensity-weighted moments.

Each contour pixel contributes ``I(x, y) * x**p * y**q`` to ``m_pq``.
Spatial and central moments are accumulated in exact rational arithmetic
and rounded once to double precision, which makes the central,
normalised and Hu values bit-identical under integer translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy import ndimage

from .errors import DegenerateContourError, InvalidInputError, NoContourError
from .features import FeatureVector
from .imaging import BinaryMask, ImageBuffer

SPATIAL_ORDERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))
CENTRAL_ORDERS = ((2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))

# Moore neighbourhood as (dx, dy), clockwise on screen starting at west
_DX = (-1, -1, 0, 1, 1, 1, 0, -1)
_DY = (0, -1, -1, -1, 0, 1, 1, 1)
_DIR = {(dx, dy): i for i, (dx, dy) in enumerate(zip(_DX, _DY))}


@dataclass(frozen=True)
class Contour:
    """Closed 8-connected boundary traced in clockwise order.

    ``points`` is an ``(n, 2)`` int array of (x, y); a pixel on a
    one-pixel-wide part of the shape is visited more than once.
    ``intensities[i]`` is I(x, y) at ``points[i]``.
    """

    points: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)
        inten = np.asarray(self.intensities, dtype=np.float64).ravel()
        if pts.shape[0] < 1:
            raise InvalidInputError("contour needs at least one point")
        if inten.shape[0] != pts.shape[0]:
            raise InvalidInputError("one intensity per contour point is required")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "intensities", inten)

    def __len__(self):
        return self.points.shape[0]

    def pixels(self):
        """Distinct contour pixels in first-visit order, with their intensities."""
        _, first = np.unique(self.points, axis=0, return_index=True)
        first.sort()
        return self.points[first], self.intensities[first]

    @property
    def size(self) -> int:
        return int(np.unique(self.points, axis=0).shape[0])


@dataclass(frozen=True)
class MomentSet:
    spatial: tuple
    central: tuple
    normalized: tuple
    hu: tuple

    def as_vector(self) -> np.ndarray:
        return np.array(self.spatial + self.central + self.normalized + self.hu, dtype=np.float64)


def _trace(fg: np.ndarray, sx: int, sy: int):
    """Moore-neighbour tracing with Jacob's stopping criterion.

    ``fg`` must have a background frame so neighbour lookups never leave
    the array. ``(sx, sy)`` is the raster-first pixel of the component,
    hence its west neighbour is background.
    """
    start_back = 0
    x, y, back = sx, sy, start_back
    path = [(sx, sy)]
    seen = {(sx, sy, start_back)}
    while True:
        for i in range(1, 8):
            d = (back + i) % 8
            nx, ny = x + _DX[d], y + _DY[d]
            if fg[ny, nx]:
                p = (back + i - 1) % 8
                bx, by = x + _DX[p], y + _DY[p]
                x, y, back = nx, ny, _DIR[(bx - nx, by - ny)]
                break
        else:
            return path  # isolated pixel
        state = (x, y, back)
        if state in seen:
            return path
        seen.add(state)
        path.append((x, y))


def extract_contours(mask: BinaryMask, gray: ImageBuffer | None = None) -> list:
    """One outer contour per 8-connected foreground component.

    Contours are ordered by their starting pixel (topmost, then leftmost).
    Intensities come from ``gray``; without it every intensity is 1.
    """
    bits = mask.bits
    if gray is not None:
        if gray.channels != 1:
            raise InvalidInputError("intensity source must be single-channel")
        if gray.pixels.shape != bits.shape:
            raise InvalidInputError("mask and intensity image sizes differ")
    labels, n = ndimage.label(bits, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return []
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    starts = {int(i): int(f) for i, f in zip(ids, first) if i != 0}
    slices = ndimage.find_objects(labels)
    w = bits.shape[1]

    contours = []
    for lab in sorted(starts, key=starts.get):
        sl = slices[lab - 1]
        y0, x0 = sl[0].start, sl[1].start
        comp = np.pad(labels[sl] == lab, 1)
        sy, sx = divmod(starts[lab], w)
        local = _trace(comp, sx - x0 + 1, sy - y0 + 1)
        pts = np.array(local, dtype=np.int64) + np.array([x0 - 1, y0 - 1])
        if gray is None:
            inten = np.ones(pts.shape[0])
        else:
            inten = gray.pixels[pts[:, 1], pts[:, 0]].astype(np.float64)
        contours.append(Contour(pts, inten))
    return contours


def _exact(v: float):
    return int(v) if float(v).is_integer() else Fraction(float(v))


def spatial_moments(c: Contour) -> tuple:
    """m_pq = sum of I * x^p * y^q over the distinct contour pixels."""
    if len(c) == 0:
        raise InvalidInputError("empty contour")
    pts, inten = c.pixels()
    xs = [int(v) for v in pts[:, 0]]
    ys = [int(v) for v in pts[:, 1]]
    ws = [_exact(v) for v in inten]
    out = []
    for p, q in SPATIAL_ORDERS:
        out.append(float(sum(w * x ** p * y ** q for w, x, y in zip(ws, xs, ys))))
    return tuple(out)


def central_moments(m) -> tuple:
    """Central moments mu20..mu03 from the ten spatial moments (binomial expansion)."""
    raw = {pq: Fraction(float(v)) for pq, v in zip(SPATIAL_ORDERS, m)}
    m00 = raw[(0, 0)]
    if m00 == 0:
        raise DegenerateContourError("m00 is zero; centroid undefined")
    xb = raw[(1, 0)] / m00
    yb = raw[(0, 1)] / m00
    out = []
    for p, q in CENTRAL_ORDERS:
        acc = Fraction(0)
        for i in range(p + 1):
            for j in range(q + 1):
                acc += comb(p, i) * comb(q, j) * (-xb) ** (p - i) * (-yb) ** (q - j) * raw[(i, j)]
        out.append(float(acc))
    return tuple(out)


def normalized_moments(mu, m00: float) -> tuple:
    """nu_pq = mu_pq / m00 ** (1 + p + q).

    A contour's mass grows linearly with scale, so this exponent (rather
    than the region-moment ``1 + (p+q)/2``) is what cancels scale.
    """
    if not m00 > 0:
        raise DegenerateContourError(f"m00 must be positive, got {m00}")
    return tuple(float(v) / float(m00) ** (1 + p + q) for v, (p, q) in zip(mu, CENTRAL_ORDERS))


def hu_moments(nu) -> tuple:
    n20, n11, n02, n30, n21, n12, n03 = (float(v) for v in nu)
    a = n30 + n12
    b = n21 + n03
    c = n30 - 3 * n12
    d = 3 * n21 - n03
    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4 * n11 ** 2
    h3 = c ** 2 + d ** 2
    h4 = a ** 2 + b ** 2
    h5 = c * a * (a ** 2 - 3 * b ** 2) + d * b * (3 * a ** 2 - b ** 2)
    h6 = (n20 - n02) * (a ** 2 - b ** 2) + 4 * n11 * a * b
    h7 = d * a * (a ** 2 - 3 * b ** 2) - c * b * (3 * a ** 2 - b ** 2)
    return (h1, h2, h3, h4, h5, h6, h7)


def contour_moments(c: Contour) -> MomentSet:
    m = spatial_moments(c)
    mu = central_moments(m)
    nu = normalized_moments(mu, m[0])
    return MomentSet(m, mu, nu, hu_moments(nu))


def largest_contour(contours) -> Contour:
    if not contours:
        raise NoContourError("mask has no foreground contour")
    best = contours[0]
    for c in contours[1:]:
        if c.size > best.size:
            best = c
    return best


def mc_features(mask: BinaryMask, gray: ImageBuffer | None = None, binary: bool = False) -> FeatureVector:
    """31 moments of the largest outer contour: 10 spatial, 7 central, 7 normalised, 7 Hu.

    ``binary=True`` (or no ``gray``) weights every contour pixel by 1.
    """
    contours = extract_contours(mask, None if binary else gray)
    return FeatureVector(contour_moments(largest_contour(contours)).as_vector(), "MC")
