"""Geometric feature: the landmark coordinates themselves."""

from __future__ import annotations

from ..errors import WrongPointCount
from ..shape import PIPELINE_POINT_COUNT, Shape
from .vector import FeatureVector

GEOM_DIM = 2 * PIPELINE_POINT_COUNT  # 136


def geometric_feature(landmarks: Shape) -> FeatureVector:
    """(x_1..x_68, y_1..y_68) as a 136-vector; pass GPA-normalized landmarks."""
    if landmarks.n_points != PIPELINE_POINT_COUNT:
        raise WrongPointCount(
            f"need {PIPELINE_POINT_COUNT} landmarks, got {landmarks.n_points}"
        )
    return FeatureVector("geom", landmarks.as_vector())
