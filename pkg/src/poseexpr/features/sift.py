"""Upright SIFT descriptors computed at landmark positions.

No keypoint detection, no scale space, no orientation assignment: the 68
landmarks are the keypoints and the descriptor is taken directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PointOutOfImage, WrongPointCount
from ..shape import PIPELINE_POINT_COUNT, Shape
from .image import GrayImage, image_gradients
from .kernels import sift_raw_descriptor
from .vector import FeatureVector

SIFT_DIM = 128
FACE_SIFT_DIM = SIFT_DIM * PIPELINE_POINT_COUNT  # 8704


@dataclass(frozen=True)
class SiftParams:
    patch_radius: float | None = None  # None: derived from landmark spacing
    spatial_bins: int = 4
    orientation_bins: int = 8
    clip_threshold: float = 0.2

    def __post_init__(self):
        if self.spatial_bins**2 * self.orientation_bins != SIFT_DIM:
            raise ValueError("descriptor layout must total 128 bins")


def default_patch_radius(landmarks: Shape) -> float:
    """2.5x the mean nearest-neighbor landmark distance, clamped to [6, 24] px.

    Ties the descriptor support to the face scale so crops of different
    resolutions produce comparable descriptors.
    """
    pts = landmarks.points
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    mean_nn = float(np.mean(np.sqrt(d2.min(axis=1))))
    return float(np.clip(2.5 * mean_nn, 6.0, 24.0))


def _postprocess(raw: np.ndarray, clip_threshold: float) -> np.ndarray:
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return raw
    desc = np.minimum(raw / norm, clip_threshold)
    norm = float(np.linalg.norm(desc))
    if norm == 0.0:
        return desc
    return desc / norm


def sift_descriptor_at(
    image: GrayImage,
    point: tuple[float, float],
    params: SiftParams = SiftParams(),
    _gradients: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """128-dim descriptor at one point: 4x4 spatial grid of 8-bin orientation
    histograms, Gaussian-weighted and trilinearly interpolated, then
    unit-normalized, clipped and renormalized.  Patch overhang past the image
    border contributes zeros."""
    px, py = float(point[0]), float(point[1])
    if not (0 <= px < image.width and 0 <= py < image.height):
        raise PointOutOfImage(f"keypoint ({px}, {py}) outside {image.width}x{image.height}")
    radius = params.patch_radius
    if radius is None:
        raise ValueError("patch_radius unset; use sift_face_feature or set it explicitly")
    mag, ori = _gradients if _gradients is not None else image_gradients(image)
    raw = sift_raw_descriptor(
        mag, ori, px, py, float(radius), params.spatial_bins, params.orientation_bins
    )
    return _postprocess(raw, params.clip_threshold)


def sift_face_feature(
    image: GrayImage, landmarks: Shape, params: SiftParams = SiftParams()
) -> FeatureVector:
    """Concatenated descriptors of all 68 landmarks, dim 128*68 = 8704."""
    if landmarks.n_points != PIPELINE_POINT_COUNT:
        raise WrongPointCount(f"need {PIPELINE_POINT_COUNT} landmarks, got {landmarks.n_points}")
    if params.patch_radius is None:
        params = SiftParams(
            default_patch_radius(landmarks),
            params.spatial_bins,
            params.orientation_bins,
            params.clip_threshold,
        )
    gradients = image_gradients(image)
    blocks = [
        sift_descriptor_at(image, (x, y), params, _gradients=gradients)
        for x, y in landmarks.points
    ]
    return FeatureVector("sift", np.concatenate(blocks))
