"""Labelled corpora: directory ingestion, random splits, CSV persistence, synthetic fixtures."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ArmloadError, InvalidInputError, ParseError
from .features import FeatureVector
from .imaging import ImageBuffer, _sniff

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")
MASK_SUFFIX = ".mask.png"
FIXTURE_KINDS = ("texture", "color", "shape", "blob")


def label_key(label: str):
    """Numeric labels sort by value, others lexicographically after them."""
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def sort_labels(labels) -> tuple:
    return tuple(sorted(set(labels), key=label_key))


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with one label per row.

    ``features`` has shape ``(n, d)``; ``alphabet`` is the ordered set of
    class labels (it may include classes with no rows).
    """

    features: np.ndarray
    labels: tuple
    alphabet: tuple = ()
    method: str | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise InvalidInputError("features must be a 2-D array")
        labels = tuple(str(l) for l in self.labels)
        if len(labels) != x.shape[0]:
            raise InvalidInputError(f"{x.shape[0]} feature rows but {len(labels)} labels")
        alphabet = tuple(str(a) for a in self.alphabet) or sort_labels(labels)
        unknown = set(labels) - set(alphabet)
        if unknown:
            raise InvalidInputError(f"labels not in alphabet: {sorted(unknown)}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "alphabet", alphabet)

    @classmethod
    def from_vectors(cls, vectors, labels, alphabet=()):
        vectors = list(vectors)
        methods = {v.method for v in vectors}
        if len(methods) > 1:
            raise InvalidInputError(f"mixed feature methods {sorted(methods)}")
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise InvalidInputError(f"inconsistent feature dimensions {sorted(dims)}")
        x = np.stack([v.values for v in vectors]) if vectors else np.empty((0, 0))
        return cls(x, tuple(labels), tuple(alphabet), methods.pop() if methods else None)

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def rows(self):
        method = self.method or "LBP"
        return [(FeatureVector(x, method), l) for x, l in zip(self.features, self.labels)]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.features[idx], tuple(self.labels[i] for i in idx),
                              self.alphabet, self.method)

    def class_counts(self) -> dict:
        return {a: self.labels.count(a) for a in self.alphabet}


def _readable(path: Path) -> bool:
    try:
        _sniff(path)
        with Image.open(path) as im:
            im.verify()
        return True
    except (OSError, ArmloadError, SyntaxError) as exc:
        logger.warning("skipping unreadable image %s: %s", path, exc)
        return False


def is_image_file(path: Path) -> bool:
    name = path.name.lower()
    return (path.is_file() and name.endswith(IMAGE_SUFFIXES)
            and not name.endswith(MASK_SUFFIX))


def ingest(root_dir) -> list:
    """(path, label) for every readable image under ``root/<label>/``, sorted by (label dir, filename)."""
    root = Path(root_dir)
    if not root.is_dir():
        raise InvalidInputError(f"{root} is not a directory")
    items = []
    for cls_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(p for p in cls_dir.iterdir() if is_image_file(p))
        if not files:
            logger.warning("class directory %s contains no images", cls_dir)
            continue
        items.extend((p, cls_dir.name) for p in files if _readable(p))
    if not items:
        raise InvalidInputError(f"no usable images under {root}")
    return items


def train_count(n: int, fraction) -> int:
    """floor(fraction * n), evaluated on the decimal value of ``fraction``."""
    return math.floor(Fraction(str(fraction)) * n)


def split_indices(n: int, train_fraction: float = 0.7, seed: int = 0, labels=None):
    """Random train/test index partition.

    Without ``labels`` the split is a single uniform permutation. With
    ``labels`` it is stratified: each class is split separately.
    """
    if not 0 < train_fraction < 1:
        raise InvalidInputError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    if labels is None:
        perm = rng.permutation(n)
        cut = train_count(n, train_fraction)
        train, test = perm[:cut], perm[cut:]
    else:
        labels = list(labels)
        train, test = [], []
        for lab in sort_labels(labels):
            members = np.array([i for i, l in enumerate(labels) if l == lab])
            members = members[rng.permutation(members.size)]
            cut = train_count(members.size, train_fraction)
            train.extend(members[:cut])
            test.extend(members[cut:])
        train, test = np.array(train, dtype=np.intp), np.array(test, dtype=np.intp)
    if train.size == 0 or test.size == 0:
        raise InvalidInputError(
            f"split of {n} items at fraction {train_fraction} leaves an empty side")
    return np.sort(train), np.sort(test)


def split(ds: LabeledDataset, train_fraction: float = 0.7, seed: int = 0,
          stratified: bool = False):
    train, test = split_indices(len(ds), train_fraction, seed,
                                ds.labels if stratified else None)
    return ds.subset(train), ds.subset(test)


def save_csv(ds: LabeledDataset, path) -> None:
    """Header ``label,f0,...,f{d-1}``; values written with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"f{i}" for i in range(ds.dim)])
        for x, lab in zip(ds.features, ds.labels):
            w.writerow([lab] + [format(float(v), ".17g") for v in x])


def load_csv(path, method: str | None = None, alphabet=()) -> LabeledDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file", line=1)
    header = rows[0]
    if not header or header[0] != "label" or header[1:] != [f"f{i}" for i in range(len(header) - 1)]:
        raise ParseError(f"{path}: header must be label,f0,...,f{{d-1}}", line=1)
    d = len(header) - 1
    labels, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise ParseError(f"{path}: expected {d + 1} fields, got {len(row)}", line=lineno)
        try:
            vec = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}", line=lineno) from None
        labels.append(row[0])
        values.append(vec)
    if not labels:
        raise ParseError(f"{path}: no data rows", line=2)
    return LabeledDataset(np.array(values, dtype=np.float64).reshape(len(labels), d),
                          tuple(labels), tuple(alphabet), method)


def read_labels_csv(path) -> list:
    """First column (``label``) of a feature or prediction CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "label":
        raise ParseError(f"{path}: first header column must be 'label'", line=1)
    return [r[0] for r in rows[1:] if r]


def write_labels_csv(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"])
        w.writerows([l] for l in labels)


# --- synthetic fixtures -------------------------------------------------------

BACKDROP = np.array([35.0, 70.0, 205.0])
SKIN = np.array([212.0, 160.0, 128.0])
PALE_SKIN = np.array([245.0, 228.0, 212.0])


def stripe_period(k: int) -> int:
    return 2 + math.floor(3.5 * k)


def _canvas(rng, size):
    img = np.empty((size, size, 3))
    img[:] = BACKDROP + rng.normal(0, 4, 3)
    return img


def _arm_mask(rng, size, width_frac=0.38):
    """Horizontal forearm-like band with rounded ends, slightly jittered."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy = size * (0.5 + rng.uniform(-0.05, 0.05))
    half_w = size * width_frac / 2 * rng.uniform(0.92, 1.08)
    x0, x1 = size * rng.uniform(0.08, 0.14), size * rng.uniform(0.86, 0.92)
    dx = np.clip(xx, x0, x1) - xx
    return (dx ** 2 + (yy - cy) ** 2) <= half_w ** 2


def _texture_image(rng, size, k):
    img = _canvas(rng, size)
    arm = _arm_mask(rng, size)
    period = stripe_period(k)
    theta = np.deg2rad(rng.uniform(-8, 8))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    u = xx * np.cos(theta) + yy * np.sin(theta) + rng.uniform(0, period)
    dark = np.mod(u, period) < period / 2.0
    shade = np.where(dark, 0.72, 1.0)[..., None]
    skin = SKIN * rng.uniform(0.9, 1.05) * shade
    img[arm] = skin[arm]
    return img


def _color_image(rng, size, k, classes):
    img = _canvas(rng, size)
    arm = _arm_mask(rng, size)
    img[arm] = SKIN * rng.uniform(0.9, 1.05)
    # class-coloured patches; hues avoid the blue band so segmentation keeps them
    hue = (-70.0 + 200.0 * k / max(1, classes - 1) + rng.uniform(-6, 6)) % 360.0
    patch_rgb = _hsv_to_rgb(hue, rng.uniform(0.55, 0.8), rng.uniform(0.7, 0.9))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(rng.integers(6, 10)):
        cx, cy = rng.uniform(0.15, 0.85) * size, rng.uniform(0.38, 0.62) * size
        r = rng.uniform(0.03, 0.06) * size
        spot = arm & ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r)
        img[spot] = patch_rgb
    return img


def _hsv_to_rgb(h, s, v):
    c = v * s
    hp = (h % 360.0) / 60.0
    x = c * (1 - abs(hp % 2 - 1))
    table = [(c, x, 0), (x, c, 0), (0, c, x), (0, x, c), (x, 0, c), (c, 0, x)]
    r, g, b = table[int(hp) % 6]
    return 255.0 * (np.array([r, g, b]) + (v - c))


def _shape_image(rng, size, k):
    """Skin silhouette whose elongation encodes the class."""
    img = _canvas(rng, size)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    aspect = (1.0 + 1.2 * k) * rng.uniform(0.96, 1.04)
    area = (0.075 * size * size) * rng.uniform(0.95, 1.05)
    a = math.sqrt(area * aspect / math.pi)
    b = a / aspect
    ang = np.deg2rad(rng.uniform(-12, 12))
    cx = size / 2 + rng.uniform(-0.03, 0.03) * size
    cy = size / 2 + rng.uniform(-0.03, 0.03) * size
    u = (xx - cx) * np.cos(ang) + (yy - cy) * np.sin(ang)
    v = -(xx - cx) * np.sin(ang) + (yy - cy) * np.cos(ang)
    body = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    img[body] = SKIN * rng.uniform(0.97, 1.03)
    return img


def _blob_image(rng, size, k, classes):
    """Dark oriented spots on a pale arm; spot orientation encodes the class."""
    img = _canvas(rng, size)
    arm = _arm_mask(rng, size, width_frac=0.5)
    tone = PALE_SKIN * rng.uniform(0.97, 1.02)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    ang = math.pi * k / classes
    darkening = np.zeros((size, size))
    for _ in range(rng.integers(24, 34)):
        cx, cy = rng.uniform(0.14, 0.86) * size, rng.uniform(0.32, 0.68) * size
        s = rng.uniform(3.0, 4.5)
        u = (xx - cx) * math.cos(ang) + (yy - cy) * math.sin(ang)
        v = -(xx - cx) * math.sin(ang) + (yy - cy) * math.cos(ang)
        spot = np.exp(-(u ** 2 / (2 * (1.7 * s) ** 2) + v ** 2 / (2 * s ** 2)))
        darkening = np.maximum(darkening, spot)
    arm_px = tone[None, None, :] * (1.0 - 0.95 * darkening[..., None])
    img[arm] = arm_px[arm]
    return img


def synth_image(kind: str, k: int, index: int, classes: int, seed: int = 0,
                size: int = 256) -> ImageBuffer:
    """One fixture image; depends only on (kind, k, index, classes, seed, size)."""
    rng = np.random.default_rng([seed, FIXTURE_KINDS.index(kind), k, index])
    if kind == "texture":
        img = _texture_image(rng, size, k)
    elif kind == "color":
        img = _color_image(rng, size, k, classes)
    elif kind == "shape":
        img = _shape_image(rng, size, k)
    else:
        img = _blob_image(rng, size, k, classes)
    img = img + rng.normal(0, 3.0, img.shape)
    return ImageBuffer(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))


def synth_fixture(classes: int, per_class: int, kind: str, seed: int = 0, size: int = 256):
    """Deterministic synthetic corpus. Returns ``(images, labels)`` with labels "0".."classes-1".

    texture: stripe gratings (period 2, 5, 9, ... px) for LBP;
    color: hue-coded patches for HC; shape: silhouettes of increasing
    elongation for MC; blob: oriented dark spots for BKP.
    """
    if kind not in FIXTURE_KINDS:
        raise InvalidInputError(f"unknown fixture kind {kind!r}; choose from {FIXTURE_KINDS}")
    if classes < 2:
        raise InvalidInputError("a fixture needs at least 2 classes")
    if per_class < 1:
        raise InvalidInputError("per_class must be >= 1")
    if size < 32:
        raise InvalidInputError("fixture images must be at least 32x32")
    images, labels = [], []
    for k in range(classes):
        for i in range(per_class):
            images.append(synth_image(kind, k, i, classes, seed, size))
            labels.append(str(k))
    return images, labels
