"""End-to-end experiment: segment -> extract -> split -> train -> predict -> evaluate."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import bkp
from .colorhist import hc_features
from .dataset import LabeledDataset, MASK_SUFFIX, ingest, sort_labels, split_indices
from .errors import ArmloadError, InvalidInputError
from .evaluation import confusion, report_dict
from .imaging import BinaryMask, ImageBuffer, read_image, read_mask, rgb_to_gray
from .lbp import LbpConfig, lbp_features
from .moments import mc_features
from .segmentation import segment_arm
from .svm import DEFAULT_COST, DEFAULT_GAMMA, predict_many, train_multiclass

logger = logging.getLogger(__name__)

METHOD_NAMES = ("bkp", "lbp", "hc", "mc")


@dataclass(frozen=True)
class PipelineConfig:
    method: str
    train_fraction: float = 0.7
    seed: int = 0
    k: int = 2
    erode: int = 1
    grid: int = 3
    gamma: float = DEFAULT_GAMMA
    cost: float = DEFAULT_COST
    scale: bool = True
    vocabulary: int = bkp.DEFAULT_VOCABULARY
    threshold: float = bkp.DEFAULT_THRESHOLD
    stratified: bool = False

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise InvalidInputError(f"unknown method {self.method!r}; choose from {METHOD_NAMES}")


def default_jobs() -> int:
    return os.cpu_count() or 1


def parallel_map(func, items, jobs: int = 1) -> list:
    """``list(map(func, items))``, optionally across worker processes; output keeps input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def as_gray(img: ImageBuffer) -> ImageBuffer:
    return img if img.channels == 1 else rgb_to_gray(img)


def mask_from_nonzero(img: ImageBuffer) -> BinaryMask:
    px = img.pixels
    return BinaryMask(px > 0 if px.ndim == 2 else px.any(axis=-1))


def extract_one(method: str, img: ImageBuffer, mask: BinaryMask | None = None, grid: int = 3,
                threshold: float = bkp.DEFAULT_THRESHOLD):
    """Feature vector of a segmented image; for ``bkp`` the keypoint descriptor matrix instead."""
    if method == "lbp":
        return lbp_features(as_gray(img), LbpConfig(grid_n=grid))
    if method == "hc":
        if img.channels != 3:
            raise InvalidInputError("colour histograms need an RGB image")
        return hc_features(img, grid_n=grid)
    if method == "mc":
        return mc_features(mask if mask is not None else mask_from_nonzero(img), as_gray(img))
    if method == "bkp":
        return bkp.descriptors_of(bkp.detect_and_describe(as_gray(img), threshold))
    raise InvalidInputError(f"unknown method {method!r}")


def _segment_and_extract(args):
    path, cfg = args
    try:
        img = read_image(path)
        if img.channels != 3:
            raise InvalidInputError("pipeline input images must be RGB")
        seg, mask = segment_arm(img, k=cfg.k, erode_iters=cfg.erode, seed=cfg.seed)
        return extract_one(cfg.method, seg, mask, cfg.grid, cfg.threshold)
    except ArmloadError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def _extract_file(args):
    path, method, grid, threshold = args
    try:
        img = read_image(path)
        mask = None
        mask_path = path.with_name(path.stem + MASK_SUFFIX)
        if method == "mc" and mask_path.exists():
            mask = read_mask(mask_path)
        return extract_one(method, img, mask, grid, threshold)
    except ArmloadError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def extract_directory(items, method: str, grid: int = 3, threshold: float = bkp.DEFAULT_THRESHOLD,
                      jobs: int = 1) -> list:
    """Per-image extraction over already-segmented files (``(path, label)`` items)."""
    return parallel_map(_extract_file, [(Path(p), method, grid, threshold) for p, _ in items], jobs)


def histograms(descriptor_sets, book: bkp.Codebook) -> np.ndarray:
    rows = []
    for desc in descriptor_sets:
        kps = [bkp.Keypoint(0.0, 0.0, 1.0, 0.0, d) for d in desc]
        rows.append(bkp.bkp_features(kps, book).values)
    return np.stack(rows) if rows else np.empty((0, book.k))


def run_pipeline(images_dir, cfg: PipelineConfig, jobs: int = 1):
    """Run the whole experiment. Returns ``(report, model)``.

    For ``bkp`` the codebook is fitted on training-split descriptors only
    and stored in the model under ``codebook``.
    """
    items = ingest(images_dir)
    labels = [lab for _, lab in items]
    alphabet = sort_labels(labels)
    train_idx, test_idx = split_indices(len(items), cfg.train_fraction, cfg.seed,
                                        labels if cfg.stratified else None)

    outputs = parallel_map(_segment_and_extract, [(p, cfg) for p, _ in items], jobs)
    extras = {}
    if cfg.method == "bkp":
        book = bkp.build_codebook([outputs[i] for i in train_idx], k=cfg.vocabulary, seed=cfg.seed)
        X = histograms(outputs, book)
        extras["codebook"] = book.to_dict()
    else:
        X = np.stack([fv.values for fv in outputs])
    method_tag = cfg.method.upper()
    ds = LabeledDataset(X, tuple(labels), alphabet, method_tag)
    train, test = ds.subset(train_idx), ds.subset(test_idx)

    model = train_multiclass(train, gamma=cfg.gamma, C=cfg.cost, seed=cfg.seed, scale=cfg.scale)
    model.extras.update(extras)
    predicted = predict_many(model, test.features)
    cm = confusion(test.labels, predicted, alphabet)

    config = asdict(cfg)
    config["images"] = str(images_dir)
    report = report_dict(cm, config)
    report["split"] = {"train": int(len(train)), "test": int(len(test)),
                       "test_indices": [int(i) for i in test_idx]}
    report["predictions"] = [{"item": items[i][0].name, "true": test.labels[n], "predicted": p}
                             for n, (i, p) in enumerate(zip(test_idx, predicted))]
    return report, model
