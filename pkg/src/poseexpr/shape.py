"""Landmark shapes: single-pair Procrustes superimposition, iterative
generalized Procrustes analysis, and mirror-flip point reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import (
    DegenerateShape,
    InvalidPermutation,
    ShapeSizeMismatch,
)

PIPELINE_POINT_COUNT = 68


@dataclass(frozen=True)
class Shape:
    """Ordered list of N 2D landmark points, stored as an (N, 2) float array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError(f"shape needs an (N>=2, 2) point array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("shape contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def as_vector(self) -> np.ndarray:
        """(x_1..x_N, y_1..y_N) layout used everywhere downstream."""
        return np.concatenate([self.points[:, 0], self.points[:, 1]])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "Shape":
        vec = np.asarray(vec, dtype=np.float64)
        n = vec.size // 2
        return cls(np.column_stack([vec[:n], vec[n:]]))


@dataclass(frozen=True)
class SimilarityTransform:
    """Translation, positive scale ratio and rotation removed by alignment."""

    tx: float
    ty: float
    s_ratio: float
    theta: float

    def __post_init__(self):
        if self.s_ratio <= 0:
            raise ValueError("s_ratio must be positive")
        # normalize theta to [-pi, pi)
        t = math.remainder(self.theta, 2.0 * math.pi)
        if t >= math.pi:
            t -= 2.0 * math.pi
        object.__setattr__(self, "theta", t)

    def apply(self, shape: Shape) -> Shape:
        """Reproduce the aligned shape from the original input shape."""
        pts = shape.points - np.array([self.tx, self.ty])
        pts = pts / self.s_ratio
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return Shape(pts @ rot.T)


@dataclass(frozen=True)
class GpaResult:
    mean_shape: Shape
    aligned_shapes: list[Shape]
    iterations_run: int
    final_mean_delta: float


def center(shape: Shape) -> tuple[Shape, tuple[float, float]]:
    """Subtract the centroid; returns the centered shape and the centroid."""
    cx, cy = shape.points.mean(axis=0)
    return Shape(shape.points - np.array([cx, cy])), (float(cx), float(cy))


def scale_of(shape: Shape) -> float:
    """RMS distance of the points from their centroid."""
    centered = shape.points - shape.points.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))


def optimal_rotation(shape: Shape, reference: Shape) -> float:
    """Rotation angle minimizing the summed squared distance to the reference.

    Both shapes must already be centered.  theta = atan2(sum(x*yc - y*xc),
    sum(x*xc + y*yc)) is the exact minimizer of the least-squares objective.
    """
    if shape.n_points != reference.n_points:
        raise ShapeSizeMismatch(
            f"{shape.n_points} vs {reference.n_points} points"
        )
    if scale_of(shape) == 0.0 or scale_of(reference) == 0.0:
        raise DegenerateShape("zero-scale shape has no defined rotation")
    x, y = shape.points[:, 0], shape.points[:, 1]
    xc, yc = reference.points[:, 0], reference.points[:, 1]
    num = float(np.dot(x, yc) - np.dot(y, xc))
    den = float(np.dot(x, xc) + np.dot(y, yc))
    return math.atan2(num, den)


def rotate(shape: Shape, theta: float) -> Shape:
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return Shape(shape.points @ rot.T)


def procrustes_align(
    shape: Shape, reference: Shape
) -> tuple[Shape, SimilarityTransform]:
    """Full superimposition: center, rescale to the reference scale, rotate."""
    if shape.n_points != reference.n_points:
        raise ShapeSizeMismatch(
            f"{shape.n_points} vs {reference.n_points} points"
        )
    s_shape = scale_of(shape)
    s_ref = scale_of(reference)
    if s_shape == 0.0 or s_ref == 0.0:
        raise DegenerateShape("cannot align a zero-scale shape")

    centered, (cx, cy) = center(shape)
    ref_centered, _ = center(reference)
    s_ratio = s_shape / s_ref
    rescaled = Shape(centered.points / s_ratio)
    theta = optimal_rotation(rescaled, ref_centered)
    aligned = rotate(rescaled, theta)
    return aligned, SimilarityTransform(cx, cy, s_ratio, theta)


def normalize(shape: Shape) -> Shape:
    """Center and scale to unit RMS size (no rotation)."""
    s = scale_of(shape)
    if s == 0.0:
        raise DegenerateShape("cannot normalize a zero-scale shape")
    centered, _ = center(shape)
    return Shape(centered.points / s)


def _align_stack(stack: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Vectorized procrustes_align of an (M, N, 2) stack onto centered ref."""
    centered = stack - stack.mean(axis=1, keepdims=True)
    scales = np.sqrt(np.mean(np.sum(centered**2, axis=2), axis=1))
    if np.any(scales == 0.0):
        raise DegenerateShape("cannot align a zero-scale shape")
    ref_scale = float(np.sqrt(np.mean(np.sum(ref**2, axis=1))))
    rescaled = centered * (ref_scale / scales)[:, None, None]
    x, y = rescaled[:, :, 0], rescaled[:, :, 1]
    num = x @ ref[:, 1] - y @ ref[:, 0]
    den = x @ ref[:, 0] + y @ ref[:, 1]
    theta = np.arctan2(num, den)
    c, s = np.cos(theta)[:, None], np.sin(theta)[:, None]
    out = np.empty_like(rescaled)
    out[:, :, 0] = c * x - s * y
    out[:, :, 1] = s * x + c * y
    return out


def align_to_reference(shapes: list[Shape], reference: Shape) -> list[Shape]:
    """Procrustes-align every shape to the (arbitrary) reference; vectorized
    batch equivalent of procrustes_align(s, reference)[0]."""
    if any(s.n_points != reference.n_points for s in shapes):
        raise ShapeSizeMismatch("shapes differ in point count from the reference")
    ref_centered = reference.points - reference.points.mean(axis=0)
    stack = np.stack([s.points for s in shapes])
    return [Shape(p) for p in _align_stack(stack, ref_centered)]


def gpa(shapes: list[Shape], max_iterations: int = 100, tol: float = 1e-10) -> GpaResult:
    """Iterative alignment of all shapes to an evolving normalized mean.

    Each iteration aligns every shape to the current mean, recomputes the
    pointwise mean and renormalizes it (centered, unit scale).  Stops after
    max_iterations or when the mean's RMS point displacement drops below tol.
    """
    if len(shapes) < 2:
        raise ValueError("gpa needs at least 2 shapes")
    n = shapes[0].n_points
    for s in shapes:
        if s.n_points != n:
            raise ShapeSizeMismatch("gpa input shapes differ in point count")

    stack = np.stack([s.points for s in shapes])
    if np.any(np.sqrt(np.mean(np.sum(
        (stack - stack.mean(axis=1, keepdims=True)) ** 2, axis=2), axis=1)) == 0.0
    ):
        raise DegenerateShape("gpa input contains a zero-scale shape")

    mean_pts = normalize(shapes[0]).points
    aligned = stack
    iterations = 0
    delta = math.inf
    for iterations in range(1, max_iterations + 1):
        aligned = _align_stack(stack, mean_pts)
        new_mean = normalize(Shape(aligned.mean(axis=0))).points
        delta = float(np.sqrt(np.mean(np.sum((new_mean - mean_pts) ** 2, axis=1))))
        mean_pts = new_mean
        if delta < tol:
            break
    return GpaResult(
        Shape(mean_pts), [Shape(p) for p in aligned], iterations, delta
    )


# -- mirror flip --------------------------------------------------------------

def _validate_permutation(perm: np.ndarray, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,):
        raise InvalidPermutation(f"permutation length {perm.size} != {n}")
    if sorted(perm.tolist()) != list(range(n)):
        raise InvalidPermutation("not a bijection of 0..N-1")
    if not np.array_equal(perm[perm], np.arange(n)):
        raise InvalidPermutation("permutation is not an involution")
    return perm


def flip_reorder(shape: Shape, permutation: np.ndarray, width: float | None = None) -> Shape:
    """Mirror a shape about the vertical axis and reorder its points.

    With width W, x becomes W - x (image coordinates); without, x becomes -x
    (centered shapes).  Point j of the output is the mirrored point perm[j].
    """
    perm = _validate_permutation(permutation, shape.n_points)
    pts = shape.points[perm].copy()
    if width is None:
        pts[:, 0] = -pts[:, 0]
    else:
        pts[:, 0] = width - pts[:, 0]
    return Shape(pts)


def load_flip_table(path) -> np.ndarray:
    """Read a `src dst` flip table file; `#` starts a comment line."""
    pairs = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            src, dst = line.split()
            pairs[int(src)] = int(dst)
    n = len(pairs)
    perm = np.full(n, -1, dtype=np.int64)
    for src, dst in pairs.items():
        if not (0 <= src < n):
            raise InvalidPermutation(f"index {src} out of range for {n} entries")
        perm[src] = dst
    return _validate_permutation(perm, n)


def default_flip_permutation() -> np.ndarray:
    """The conventional 68-point mirror table shipped with the package."""
    ref = resources.files("poseexpr.data").joinpath("flip_68.txt")
    with resources.as_file(ref) as path:
        return load_flip_table(path)
