"""Head-pose clustering: PCA over normalized landmark vectors, first-axis
projection split into K classes, class centroids and nearest-centroid
assignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyGroup,
    InsufficientSamples,
    NotEnoughDistinctValues,
)
from .shape import Shape, normalize


@dataclass(frozen=True)
class PcaBasis:
    """Mean vector, orthonormal axes (rows) and descending eigenvalues."""

    mean: np.ndarray
    axes: np.ndarray
    variances: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class PoseModel:
    basis: PcaBasis
    k: int
    thresholds: np.ndarray  # k-1 strictly increasing first-axis values
    centroids: list[Shape]  # one centered, unit-scale shape per class


def _fix_signs(axes: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: largest-magnitude entry positive."""
    out = axes.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def pca_fit(matrix: np.ndarray) -> PcaBasis:
    """PCA of an (M samples, D dims) matrix via SVD of the centered data.

    Eigenvalues use the 1/M covariance normalization.  When D > M the
    decomposition runs through the M x M Gram matrix instead of the full
    covariance, which is what makes 8704-dim feature reduction affordable.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise InsufficientSamples("pca_fit needs at least 2 samples")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("pca_fit input contains non-finite values")
    m, d = matrix.shape
    mean = matrix.mean(axis=0)
    centered = matrix - mean

    if d <= max(m, 512):
        _, svals, vt = np.linalg.svd(centered, full_matrices=False)
        axes = vt
        variances = svals**2 / m
    else:
        gram = centered @ centered.T
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        evecs = evecs[:, order]
        nonzero = evals > evals[0] * 1e-14 if evals[0] > 0 else evals > 0
        evals = evals[nonzero]
        evecs = evecs[:, nonzero]
        axes = (centered.T @ evecs) / np.sqrt(evals)
        axes = axes.T
        variances = evals / m

    return PcaBasis(mean, _fix_signs(axes), variances)


def project_first(basis: PcaBasis, shape_vec: np.ndarray) -> float:
    """Projection of a shape vector onto the first principal axis."""
    shape_vec = np.asarray(shape_vec, dtype=np.float64)
    if shape_vec.size != basis.dim:
        raise DimensionMismatch(f"vector dim {shape_vec.size} != basis dim {basis.dim}")
    return float(np.dot(shape_vec - basis.mean, basis.axes[0]))


def split_poses(projections: np.ndarray, k: int) -> np.ndarray:
    """Equal-frequency quantile thresholds (k-1 strictly increasing reals)."""
    proj = np.sort(np.asarray(projections, dtype=np.float64))
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return np.empty(0)
    if np.unique(proj).size < k:
        raise NotEnoughDistinctValues(f"need >= {k} distinct projections")
    m = proj.size
    thresholds = []
    for g in range(1, k):
        idx = (m * g) // k
        thresholds.append(0.5 * (proj[idx - 1] + proj[idx]))
    thresholds = np.array(thresholds)
    if np.any(np.diff(thresholds) <= 0):
        raise NotEnoughDistinctValues("quantile boundaries collide; too many ties")
    return thresholds


def threshold_class(thresholds: np.ndarray, value: float) -> int:
    """1-based class of a projection value under the threshold list."""
    return int(np.searchsorted(thresholds, value, side="right")) + 1


def compute_centroids(groups: list[list[Shape]]) -> list[Shape]:
    """Pointwise mean of each group, re-centered and scale-normalized."""
    centroids = []
    for g, members in enumerate(groups):
        if not members:
            raise EmptyGroup(f"pose group {g + 1} is empty")
        stack = np.stack([s.points for s in members])
        centroids.append(normalize(Shape(stack.mean(axis=0))))
    return centroids


def centroid_distances(model: PoseModel, normalized_shape: Shape) -> np.ndarray:
    return np.array(
        [
            float(np.sum((normalized_shape.points - c.points) ** 2))
            for c in model.centroids
        ]
    )


def assign_pose(model: PoseModel, normalized_shape: Shape) -> int:
    """Nearest-centroid class id in 1..k; ties break to the lowest id."""
    return int(np.argmin(centroid_distances(model, normalized_shape))) + 1


def fit_pose_model(shapes: list[Shape], k: int = 5) -> PoseModel:
    """One-pass fit: PCA, first-axis projection, quantile split, centroids.

    A single centroid computation, no k-means iteration.
    """
    if len(shapes) < k:
        raise InsufficientSamples(f"need >= {k} shapes for {k} pose classes")
    matrix = np.stack([s.as_vector() for s in shapes])
    basis = pca_fit(matrix)
    projections = (matrix - basis.mean) @ basis.axes[0]
    thresholds = split_poses(projections, k)
    groups: list[list[Shape]] = [[] for _ in range(k)]
    for shape, p in zip(shapes, projections):
        groups[threshold_class(thresholds, p) - 1].append(shape)
    centroids = compute_centroids(groups)
    return PoseModel(basis, k, thresholds, centroids)


# -- serialization ------------------------------------------------------------

_FORMAT_TAG = "poseexpr-pose-model"
_FORMAT_VERSION = 1


def _fmt(values: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in np.asarray(values).ravel())


def save_pose_model(model: PoseModel, path) -> None:
    """Versioned structured-text serialization, lossless at full precision."""
    lines = [
        f"format: {_FORMAT_TAG} v{_FORMAT_VERSION}",
        f"k: {model.k}",
        f"dim: {model.basis.dim}",
        f"n_axes: {model.basis.axes.shape[0]}",
        f"mean: {_fmt(model.basis.mean)}",
    ]
    for i, axis in enumerate(model.basis.axes):
        lines.append(f"axis_{i}: {_fmt(axis)}")
    lines.append(f"variances: {_fmt(model.basis.variances)}")
    lines.append(f"thresholds: {_fmt(model.thresholds)}")
    for i, c in enumerate(model.centroids):
        lines.append(f"centroid_{i}: {_fmt(c.as_vector())}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_pose_model(path) -> PoseModel:
    from .errors import ParseError

    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()
    if fields.get("format") != f"{_FORMAT_TAG} v{_FORMAT_VERSION}":
        raise ParseError(f"unrecognized pose model format: {fields.get('format')!r}")
    try:
        k = int(fields["k"])
        n_axes = int(fields["n_axes"])
        mean = np.fromstring(fields["mean"], sep=" ")
        axes = np.stack(
            [np.fromstring(fields[f"axis_{i}"], sep=" ") for i in range(n_axes)]
        )
        variances = np.fromstring(fields["variances"], sep=" ")
        thresholds = np.fromstring(fields["thresholds"], sep=" ")
        centroids = [
            Shape.from_vector(np.fromstring(fields[f"centroid_{i}"], sep=" "))
            for i in range(k)
        ]
    except KeyError as exc:
        raise ParseError(f"pose model file missing field {exc}") from exc
    return PoseModel(PcaBasis(mean, axes, variances), k, thresholds, centroids)
