"""Grayscale image container and gradient maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ImageTooSmall


@dataclass(frozen=True)
class GrayImage:
    """Row-major grayscale intensities in [0, 1], shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2D intensity array, got shape {arr.shape}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def image_gradients(image: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and orientation maps.

    Central differences in the interior, one-sided at the borders;
    orientation measured from the +x axis, counter-clockwise with y up
    (image rows grow downward), wrapped to [0, 2pi).
    """
    if image.height < 3 or image.width < 3:
        raise ImageTooSmall("gradients need at least a 3x3 image")
    gy, gx = np.gradient(image.pixels)
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(-gy, gx), 2.0 * np.pi)
    return magnitude, orientation
