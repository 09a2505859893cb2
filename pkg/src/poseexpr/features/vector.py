"""Feature vector container and combination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("sift", "tplbp_grid", "tplbp_region", "geom", "combined")


@dataclass(frozen=True)
class FeatureVector:
    family: str
    values: np.ndarray

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}")
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.size


def normalize_feature(v: np.ndarray) -> np.ndarray:
    """Zero-mean the vector, then divide by its Euclidean norm.

    A zero-norm result (constant input) comes back as all zeros.
    """
    v = np.asarray(v, dtype=np.float64)
    centered = v - v.mean()
    norm = float(np.linalg.norm(centered))
    if norm == 0.0:
        return np.zeros_like(centered)
    return centered / norm


def combine_features(parts: list[FeatureVector]) -> FeatureVector:
    if len(parts) == 1:
        return parts[0]
    return FeatureVector("combined", np.concatenate([p.values for p in parts]))
