"""Variance-retaining PCA dimensionality reduction for feature vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, InsufficientSamples
from ..posecluster import pca_fit


@dataclass(frozen=True)
class PcaReducer:
    mean: np.ndarray
    projection: np.ndarray  # (out_dim, in_dim) kept axes, rows
    retained_fraction: float

    @property
    def in_dim(self) -> int:
        return self.mean.size

    @property
    def out_dim(self) -> int:
        return self.projection.shape[0]


def pca_reduce_fit(samples: np.ndarray, retained_fraction: float = 0.95) -> PcaReducer:
    """Keep the minimal leading axes whose eigenvalue mass reaches the
    requested fraction of total variance."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise InsufficientSamples("pca_reduce_fit needs at least 2 samples")
    if not 0.0 < retained_fraction <= 1.0:
        raise ValueError("retained_fraction must be in (0, 1]")
    basis = pca_fit(samples)
    total = float(basis.variances.sum())
    if total == 0.0:
        keep = 1
    else:
        cumulative = np.cumsum(basis.variances) / total
        keep = int(np.searchsorted(cumulative, retained_fraction - 1e-12) + 1)
        keep = min(keep, basis.variances.size)
    return PcaReducer(basis.mean, basis.axes[:keep].copy(), retained_fraction)


def pca_reduce_apply(reducer: PcaReducer, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != reducer.in_dim:
        raise DimensionMismatch(f"vector dim {v.shape[-1]} != reducer dim {reducer.in_dim}")
    return (v - reducer.mean) @ reducer.projection.T


# -- serialization (same structured-text container as PoseModel) --------------

_FORMAT_TAG = "poseexpr-pca-reducer"


def save_reducer(reducer: PcaReducer, path) -> None:
    lines = [
        f"format: {_FORMAT_TAG} v1",
        f"in_dim: {reducer.in_dim}",
        f"out_dim: {reducer.out_dim}",
        f"retained_fraction: {reducer.retained_fraction:.17g}",
        "mean: " + " ".join(f"{v:.17g}" for v in reducer.mean),
    ]
    for i, axis in enumerate(reducer.projection):
        lines.append(f"axis_{i}: " + " ".join(f"{v:.17g}" for v in axis))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_reducer(path) -> PcaReducer:
    from ..errors import ParseError

    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition(":")
                fields[key.strip()] = value.strip()
    if fields.get("format") != f"{_FORMAT_TAG} v1":
        raise ParseError(f"unrecognized reducer format: {fields.get('format')!r}")
    out_dim = int(fields["out_dim"])
    mean = np.fromstring(fields["mean"], sep=" ")
    projection = np.stack(
        [np.fromstring(fields[f"axis_{i}"], sep=" ") for i in range(out_dim)]
    )
    return PcaReducer(mean, projection, float(fields["retained_fraction"]))
