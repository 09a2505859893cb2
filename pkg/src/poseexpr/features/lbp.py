"""Basic LBP codes and Three-Patch LBP grid/region histogram features."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import (
    ImageTooSmall,
    PatchOutOfImage,
    RegionOutOfImage,
    RingOutOfImage,
)
from .image import GrayImage
from .kernels import tplbp_code_map
from .vector import FeatureVector

CODE_BINS = 256


@dataclass(frozen=True)
class TplbpParams:
    ring_radius: float = 2.0
    patch_count: int = 8
    patch_size: int = 3
    alpha: int = 2
    tau: float = 0.01
    grid: tuple[int, int] = (4, 4)

    def __post_init__(self):
        if self.patch_count != 8:
            raise ValueError("codes are 8-bit; patch_count must be 8")
        if self.patch_size % 2 == 0:
            raise ValueError("patch_size must be odd")
        if not 0 < self.alpha < self.patch_count:
            raise ValueError("alpha must be in 1..patch_count-1")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")

    @property
    def margin(self) -> int:
        return int(math.ceil(self.ring_radius)) + self.patch_size // 2 + 1


def _bilinear(img: np.ndarray, x: float, y: float) -> float:
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    fx, fy = x - x0, y - y0
    return float(
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x0 + 1] * fx * (1 - fy)
        + img[y0 + 1, x0] * (1 - fx) * fy
        + img[y0 + 1, x0 + 1] * fx * fy
    )


def lbp_code(image: GrayImage, x: int, y: int, radius: float = 1.0) -> int:
    """8-bit LBP code: bit i set iff the ring sample at angle 2*pi*i/8
    (starting east, counter-clockwise, i.e. north is up) is strictly brighter
    than the center.  Non-integer ring positions are bilinearly interpolated.
    """
    img = image.pixels
    center = img[y, x]
    code = 0
    for i in range(8):
        ang = 2.0 * math.pi * i / 8
        sx = x + radius * math.cos(ang)
        sy = y - radius * math.sin(ang)
        if not (0 <= math.floor(sx) and math.ceil(sx) < image.width
                and 0 <= math.floor(sy) and math.ceil(sy) < image.height):
            raise RingOutOfImage(f"ring sample {i} at ({sx:.2f}, {sy:.2f}) leaves the image")
        if _bilinear(img, sx, sy) > center:
            code |= 1 << i
    return code


def tplbp_code(image: GrayImage, x: int, y: int, params: TplbpParams = TplbpParams()) -> int:
    """Three-patch code at one pixel: bit i compares the patch-distance of
    ring patch i against that of ring patch i+alpha, both to the center patch.
    """
    m = params.margin
    if not (m <= x < image.width - m and m <= y < image.height - m):
        raise PatchOutOfImage(f"pixel ({x}, {y}) too close to the border for margin {m}")
    codes = tplbp_code_map(
        image.pixels[y - m : y + m + 1, x - m : x + m + 1],
        float(params.ring_radius),
        params.patch_count,
        params.patch_size,
        params.alpha,
        float(params.tau),
    )
    return int(codes[m, m])


def _full_code_map(image: GrayImage, params: TplbpParams) -> np.ndarray:
    if min(image.width, image.height) <= 2 * params.margin:
        raise ImageTooSmall(
            f"{image.width}x{image.height} leaves no valid pixels at margin {params.margin}"
        )
    return tplbp_code_map(
        image.pixels,
        float(params.ring_radius),
        params.patch_count,
        params.patch_size,
        params.alpha,
        float(params.tau),
    )


def tplbp_grid_feature(image: GrayImage, params: TplbpParams = TplbpParams()) -> FeatureVector:
    """Per-cell 256-bin code histograms over a rows x cols partition of the
    valid (codeable) pixel area, concatenated row-major."""
    rows, cols = params.grid
    min_side = max(rows, cols) * (2 * int(math.ceil(params.ring_radius)) + params.patch_size)
    if min(image.width, image.height) < min_side:
        raise ImageTooSmall(f"need at least {min_side} pixels per side for a {rows}x{cols} grid")
    codes = _full_code_map(image, params)
    m = params.margin
    valid_h = image.height - 2 * m
    valid_w = image.width - 2 * m

    hists = np.zeros((rows, cols, CODE_BINS), dtype=np.float64)
    for gr in range(rows):
        y0 = m + gr * valid_h // rows
        y1 = m + (gr + 1) * valid_h // rows
        for gc in range(cols):
            x0 = m + gc * valid_w // cols
            x1 = m + (gc + 1) * valid_w // cols
            cell = codes[y0:y1, x0:x1].ravel()
            hists[gr, gc] = np.bincount(cell, minlength=CODE_BINS)
    return FeatureVector("tplbp_grid", hists.ravel())


def tplbp_region_feature(
    image: GrayImage,
    regions: list[tuple[int, int, int, int]],
    params: TplbpParams = TplbpParams(),
) -> FeatureVector:
    """Per-region 256-bin histograms over (x0, y0, x1, y1) half-open
    rectangles, concatenated in region order.  Only codeable pixels (inside
    the ring/patch margin) count; overlapping regions count shared pixels in
    every region containing them."""
    codes = _full_code_map(image, params)
    m = params.margin
    hists = []
    for x0, y0, x1, y1 in regions:
        if not (0 <= x0 < x1 <= image.width and 0 <= y0 < y1 <= image.height):
            raise RegionOutOfImage(f"region ({x0}, {y0}, {x1}, {y1}) not inside the image")
        cx0, cx1 = max(x0, m), min(x1, image.width - m)
        cy0, cy1 = max(y0, m), min(y1, image.height - m)
        if cx0 >= cx1 or cy0 >= cy1:
            raise RegionOutOfImage(
                f"region ({x0}, {y0}, {x1}, {y1}) contains no codeable pixel"
            )
        cell = codes[cy0:cy1, cx0:cx1].ravel()
        hists.append(np.bincount(cell, minlength=CODE_BINS).astype(np.float64))
    return FeatureVector("tplbp_region", np.concatenate(hists))


def landmark_face_regions(landmarks, image: GrayImage, pad_fraction: float = 0.2):
    """Rectangles around brows, eyes, nose and mouth, padded by 20% of each
    box's size and clipped to the image."""
    groups = {
        "left_brow": range(17, 22),
        "right_brow": range(22, 27),
        "left_eye": range(36, 42),
        "right_eye": range(42, 48),
        "nose": range(27, 36),
        "mouth": range(48, 68),
    }
    rects = []
    for idx in groups.values():
        pts = landmarks.points[list(idx)]
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0)
        px = (x1 - x0) * pad_fraction
        py = (y1 - y0) * pad_fraction
        rects.append(
            (
                int(max(0, math.floor(x0 - px))),
                int(max(0, math.floor(y0 - py))),
                int(min(image.width, math.ceil(x1 + px) + 1)),
                int(min(image.height, math.ceil(y1 + py) + 1)),
            )
        )
    return rects
