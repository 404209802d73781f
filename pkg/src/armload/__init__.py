"""Arm-image muscle-load classification: segmentation, four feature extractors and an RBF SVM."""

from .bkp import Codebook, Keypoint, bkp_features, build_codebook, detect_and_describe
from .clustering import KMeansModel, kmeans_assign, kmeans_fit, kmeans_predict
from .colorhist import hc_features
from .dataset import LabeledDataset, ingest, load_csv, save_csv, split, synth_fixture
from .errors import (ArmloadError, DegenerateContourError, InsufficientDataError,
                     InvalidInputError, NoContourError, NumericError, OutOfDomainError,
                     ParseError, UnsupportedFormatError)
from .evaluation import ConfusionMatrix, aggregate, confusion, per_class_metrics, truncate_percent
from .features import FeatureVector
from .imaging import BinaryMask, ImageBuffer, erode, read_image, rgb_to_gray, rgb_to_hsv, write_image
from .lbp import LbpConfig, lbp_features
from .moments import extract_contours, mc_features
from .pipeline import PipelineConfig, run_pipeline
from .segmentation import segment_arm
from .svm import SvmModel, predict, train_multiclass

__version__ = "0.1.0"

__all__ = [
    "ArmloadError", "BinaryMask", "Codebook", "ConfusionMatrix", "DegenerateContourError",
    "FeatureVector", "ImageBuffer", "InsufficientDataError", "InvalidInputError", "KMeansModel",
    "Keypoint", "LabeledDataset", "LbpConfig", "NoContourError", "NumericError",
    "OutOfDomainError", "ParseError", "PipelineConfig", "SvmModel", "UnsupportedFormatError",
    "aggregate", "bkp_features", "build_codebook", "confusion", "detect_and_describe", "erode",
    "extract_contours", "hc_features", "ingest", "kmeans_assign", "kmeans_fit", "kmeans_predict",
    "lbp_features", "load_csv", "mc_features", "per_class_metrics", "predict", "read_image",
    "rgb_to_gray", "rgb_to_hsv", "run_pipeline", "save_csv", "segment_arm", "split",
    "synth_fixture", "train_multiclass", "truncate_percent", "write_image",
]
