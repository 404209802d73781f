"""Feature vector container shared by the four extractors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

METHODS = ("BKP", "LBP", "HC", "MC")


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    method: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown feature method {self.method!r}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("feature vector contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)
