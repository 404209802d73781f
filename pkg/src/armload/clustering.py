"""Lloyd's k-means with k-means++ seeding.

Used both for pixel-colour segmentation and for building the visual
vocabulary of the bag-of-keypoints extractor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidInputError

__all__ = ["KMeansModel", "kmeans_fit", "kmeans_assign", "kmeans_predict"]

# upper bound on the (rows x k x d) temporary used for distance blocks
_BLOCK_ELEMS = 1 << 22


@dataclass
class KMeansModel:
    """Fitted clustering.

    Attributes
    ----------
    centers : ndarray, shape (k, d)
    inertia : float
        Sum of squared distances from each point to its assigned center.
    n_iter : int
        Lloyd iterations performed.
    history : list of float
        Inertia measured after every assignment step, in order.
    """

    centers: np.ndarray
    inertia: float
    n_iter: int = 0
    history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def _sq_dists(points, centers):
    """Exact squared Euclidean distances, computed block-wise as sum((x-c)^2)."""
    n, d = points.shape
    k = centers.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    step = max(1, _BLOCK_ELEMS // max(1, k * d))
    for start in range(0, n, step):
        blk = points[start:start + step]
        diff = blk[:, None, :] - centers[None, :, :]
        out[start:start + step] = np.einsum("ikd,ikd->ik", diff, diff)
    return out


def _plus_plus(points, k, rng):
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen[0]][None])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen center
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(remaining[rng.integers(remaining.size)])
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(points, points[idx][None])[:, 0])
    return points[chosen].copy()


def _update_centers(points, labels, centers, dist_to_own):
    k, d = centers.shape
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, d), dtype=np.float64)
    np.add.at(sums, labels, points)
    new = centers.copy()
    filled = counts > 0
    new[filled] = sums[filled] / counts[filled, None]
    empty = np.flatnonzero(~filled)
    if empty.size:
        # re-seed each empty cluster at the point currently farthest from its center
        far = dist_to_own.copy()
        for j in empty:
            idx = int(np.argmax(far))
            new[j] = points[idx]
            far[idx] = -1.0
    return new


def _lloyd(pts, k, max_iters, rng) -> KMeansModel:
    centers = _plus_plus(pts, k, rng)
    labels = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        d2 = _sq_dists(pts, centers)
        new_labels = np.argmin(d2, axis=1)
        own = d2[np.arange(pts.shape[0]), new_labels]
        history.append(float(own.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = _update_centers(pts, labels, centers, own)

    d2 = _sq_dists(pts, centers)
    inertia = float(d2.min(axis=1).sum())
    return KMeansModel(centers=centers, inertia=inertia, n_iter=n_iter, history=history)


def kmeans_fit(points, k: int, max_iters: int = 100, seed: int = 0, n_init: int = 1) -> KMeansModel:
    """Cluster ``points`` (shape ``(n, d)``) into ``k`` groups.

    Iterates until assignments stop changing or ``max_iters`` is reached.
    With ``n_init > 1`` the k-means++ seeding and Lloyd iterations are
    repeated, drawing from one seeded stream, and the run with the lowest
    inertia is kept (the earliest on ties). Deterministic for a fixed
    (points order, k, seed, n_init).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise InvalidInputError("points must be a 2-D array of d-vectors")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if pts.shape[0] < k:
        raise InsufficientDataError(
            f"k-means needs at least k={k} points, got {pts.shape[0]} "
            f"(short by {k - pts.shape[0]})")
    if max_iters < 1 or n_init < 1:
        raise InvalidInputError("max_iters and n_init must be >= 1")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        model = _lloyd(pts, k, max_iters, rng)
        if best is None or model.inertia < best.inertia:
            best = model
    return best


def kmeans_predict(model: KMeansModel, points) -> np.ndarray:
    """Nearest-center index for every row of ``points``; ties go to the lowest index."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and model.dim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != model.dim:
        raise InvalidInputError(
            f"point dimension {pts.shape[-1]} does not match model dimension {model.dim}")
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=np.intp)
    return np.argmin(_sq_dists(pts, model.centers), axis=1)


def kmeans_assign(model: KMeansModel, point) -> int:
    p = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if p.ndim != 1 or p.shape[0] != model.dim:
        raise InvalidInputError(
            f"point dimension {p.shape} does not match model dimension {model.dim}")
    return int(np.argmin(_sq_dists(p[None, :], model.centers)[0]))
