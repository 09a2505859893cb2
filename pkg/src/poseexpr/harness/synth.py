"""Synthetic face generator with known yaw and expression ground truth.

Landmarks come from a bilaterally symmetric 68-point template with a
per-point pseudo-depth, deformed by an expression archetype, rotated about
the vertical axis by the yaw angle and projected, then jittered.  Images
are deliberately crude renders (filled head ellipse plus dark strokes along
the landmark structure) with just enough texture for the descriptors to
discriminate archetypes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..classify import ExpressionLabel
from ..features.image import GrayImage
from ..shape import Shape

# Table-1-like skew: mostly Neutral/Happy so balancing logic gets exercised
DEFAULT_LABEL_PROBS = (0.45, 0.40, 0.03, 0.03, 0.03, 0.03, 0.03)

# archetype pairs swapped by the yaw confound
_CONFOUND_SWAP = {
    ExpressionLabel.Neutral: ExpressionLabel.Neutral,
    ExpressionLabel.Happy: ExpressionLabel.Sad,
    ExpressionLabel.Sad: ExpressionLabel.Happy,
    ExpressionLabel.Fear: ExpressionLabel.Angry,
    ExpressionLabel.Angry: ExpressionLabel.Fear,
    ExpressionLabel.Surprise: ExpressionLabel.Disgust,
    ExpressionLabel.Disgust: ExpressionLabel.Surprise,
}


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 1000
    yaw_range: tuple[float, float] = (-60.0, 60.0)
    image_size: int = 64
    noise_sigma: float = 0.0  # landmark jitter, template units
    pixel_noise: float = 0.0  # additive gaussian noise on rendered images
    label_probs: tuple = DEFAULT_LABEL_PROBS
    seed: int = 0
    yaw_confound: bool = False  # swap archetype pairs when |yaw| > 30 deg
    confound_threshold: float = 30.0

    def __post_init__(self):
        if abs(sum(self.label_probs) - 1.0) > 1e-9 or len(self.label_probs) != 7:
            raise ValueError("label_probs must be 7 values summing to 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


@dataclass(frozen=True)
class SynthSample:
    image: GrayImage
    landmarks: Shape
    label: ExpressionLabel
    group_id: str
    yaw_deg: float


@dataclass
class SynthDataset:
    samples: list[SynthSample]
    config: SynthConfig


# -- template -----------------------------------------------------------------

def _base_template() -> tuple[np.ndarray, np.ndarray]:
    """(68, 2) symmetric neutral landmark layout (y down) and depth column."""
    pts = np.zeros((68, 2))
    z = np.zeros(68)

    for i in range(17):  # jaw: temple -> chin -> temple
        t = i * math.pi / 16
        pts[i] = (-0.50 * math.cos(t), 0.08 + 0.55 * math.sin(t))
        z[i] = -0.25 * abs(math.cos(t))
    for i in range(5):  # brows, outer -> inner (left), inner -> outer mirrored
        fx = i / 4
        arch = 0.03 * math.sin(math.pi * fx)
        pts[17 + i] = (-0.40 + 0.27 * fx, -0.27 - arch)
        pts[26 - i] = (0.40 - 0.27 * fx, -0.27 - arch)
        z[17 + i] = z[26 - i] = 0.02
    for i in range(4):  # nose bridge
        pts[27 + i] = (0.0, -0.18 + 0.10 * i)
        z[27 + i] = 0.06 + 0.04 * i
    nostril_x = (-0.10, -0.05, 0.0, 0.05, 0.10)
    for i, nx in enumerate(nostril_x):  # nostril line
        pts[31 + i] = (nx, 0.20 - 0.015 * (2 - abs(i - 2)))
        z[31 + i] = 0.10 - 0.03 * abs(i - 2)

    # left eye 36..41: outer corner, top x2, inner corner, bottom x2
    left_ex = [-0.095, -0.05, 0.04, 0.095, 0.04, -0.05]
    left_ey = [0.0, -0.035, -0.035, 0.0, 0.035, 0.035]
    # right eye 42..47 is the mirror with the landmark order reversed so that
    # 42 is the inner corner (flip pairs 36<->45 ... 41<->46)
    mirror = [3, 2, 1, 0, 5, 4]
    for j in range(6):
        pts[36 + j] = (-0.21 + left_ex[j], -0.12 + left_ey[j])
        pts[42 + j] = (0.21 - left_ex[mirror[j]], -0.12 + left_ey[mirror[j]])
        z[36 + j] = z[42 + j] = 0.01

    mouth_y = 0.36
    outer_x = (-0.16, -0.10, -0.04, 0.0, 0.04, 0.10, 0.16)
    outer_top = (0.0, -0.035, -0.05, -0.042, -0.05, -0.035, 0.0)
    for i in range(7):  # 48..54 upper outer lip
        pts[48 + i] = (outer_x[i], mouth_y + outer_top[i])
    lower_x = (0.10, 0.05, 0.0, -0.05, -0.10)
    for i in range(5):  # 55..59 lower outer lip, right -> left
        pts[55 + i] = (lower_x[i], mouth_y + 0.055 - 0.012 * abs(i - 2))
    inner_x = (-0.11, -0.05, 0.0, 0.05, 0.11)
    for i in range(5):  # 60..64 inner upper
        pts[60 + i] = (inner_x[i], mouth_y - 0.012 * (1 - abs(i - 2) / 2))
    for i, ix in enumerate((0.05, 0.0, -0.05)):  # 65..67 inner lower
        pts[65 + i] = (ix, mouth_y + 0.022)
    z[48:68] = 0.05
    return pts, z


def _archetype_deltas() -> dict[ExpressionLabel, np.ndarray]:
    """Symmetric landmark displacement templates per expression."""
    d = {label: np.zeros((68, 2)) for label in ExpressionLabel}

    happy = d[ExpressionLabel.Happy]
    happy[48] = (-0.030, -0.045)
    happy[54] = (0.030, -0.045)
    happy[49:54, 1] -= 0.02
    happy[55:60, 1] -= 0.01
    happy[[40, 41, 46, 47], 1] -= 0.012  # cheeks push lower lids up

    sad = d[ExpressionLabel.Sad]
    sad[48] = (-0.012, 0.040)
    sad[54] = (0.012, 0.040)
    sad[[21, 22], 1] -= 0.035  # inner brows up
    sad[[17, 26], 1] += 0.012
    sad[55:60, 1] += 0.015

    fear = d[ExpressionLabel.Fear]
    fear[17:27, 1] -= 0.040
    fear[[37, 38, 43, 44], 1] -= 0.022  # eyes wide
    fear[[40, 41, 46, 47], 1] += 0.022
    fear[55:60, 1] += 0.035  # mouth slightly open
    fear[65:68, 1] += 0.025

    angry = d[ExpressionLabel.Angry]
    angry[[20, 21], :] += (0.020, 0.038)  # inner brows down and in
    angry[[22, 23], :] += (-0.020, 0.038)
    angry[48] = (0.018, 0.0)  # mouth tightened
    angry[54] = (-0.018, 0.0)
    angry[[37, 38, 43, 44], 1] += 0.012

    surprise = d[ExpressionLabel.Surprise]
    surprise[17:27, 1] -= 0.060
    surprise[[37, 38, 43, 44], 1] -= 0.028
    surprise[[40, 41, 46, 47], 1] += 0.028
    surprise[55:60, 1] += 0.090  # tall open mouth
    surprise[65:68, 1] += 0.070
    surprise[48] = (0.020, 0.045)
    surprise[54] = (-0.020, 0.045)

    disgust = d[ExpressionLabel.Disgust]
    disgust[31:36, 1] -= 0.030  # nose wrinkle
    disgust[27:31, 1] += 0.010
    disgust[49:54, 1] -= 0.030  # raised upper lip
    disgust[60:65, 1] -= 0.020
    disgust[17:27, 1] += 0.020
    return d


_TEMPLATE, _DEPTH = _base_template()
_DELTAS = _archetype_deltas()


def _project(pts: np.ndarray, z: np.ndarray, yaw_deg: float) -> np.ndarray:
    """Rotate about the vertical axis and orthographically project."""
    psi = math.radians(yaw_deg)
    out = pts.copy()
    out[:, 0] = pts[:, 0] * math.cos(psi) + z * math.sin(psi)
    return out


def _landmarks_for(label: ExpressionLabel, yaw_deg: float, config: SynthConfig,
                   rng: np.random.Generator | None) -> np.ndarray:
    archetype = label
    if config.yaw_confound and abs(yaw_deg) > config.confound_threshold:
        archetype = _CONFOUND_SWAP[label]
    pts = _TEMPLATE + _DELTAS[archetype]
    pts = _project(pts, _DEPTH, yaw_deg)
    if rng is not None and config.noise_sigma > 0:
        pts = pts + rng.normal(0.0, config.noise_sigma, size=pts.shape)
    size = config.image_size
    return pts * (0.62 * size) + 0.5 * size  # template units -> pixels


# -- rendering ----------------------------------------------------------------

def _draw_polyline(img: np.ndarray, pts: np.ndarray, value: float) -> None:
    h, w = img.shape
    for a, b in zip(pts[:-1], pts[1:]):
        steps = max(2, int(np.hypot(*(b - a)) * 2) + 1)
        for t in np.linspace(0.0, 1.0, steps):
            x, y = a + t * (b - a)
            xi, yi = int(round(x)), int(round(y))
            if 0 <= yi < h and 0 <= xi < w:
                img[yi, xi] = value
            if 0 <= yi + 1 < h and 0 <= xi < w:
                img[yi + 1, xi] = value


def render_face(landmarks: np.ndarray, size: int) -> GrayImage:
    img = np.full((size, size), 0.15)
    # head: ellipse through the jaw extremes
    cx = landmarks[:, 0].mean()
    jaw = landmarks[:17]
    rx = max(jaw[:, 0].max() - jaw[:, 0].min(), 4.0) * 0.62
    top = landmarks[17:27, 1].min()
    bottom = jaw[:, 1].max()
    cy = 0.5 * (top + bottom)
    ry = max(bottom - top, 4.0) * 0.75
    ys, xs = np.mgrid[0:size, 0:size]
    inside = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
    img[inside] = 0.75

    for seg in (
        range(0, 17), range(17, 22), range(22, 27), range(27, 31),
        range(31, 36), range(48, 55), range(54, 60), range(60, 65),
    ):
        _draw_polyline(img, landmarks[list(seg)], 0.1)
    # closed eye and inner-lip loops
    for loop in (list(range(36, 42)) + [36], list(range(42, 48)) + [42],
                 [59, 48], [64, 65, 66, 67, 60]):
        _draw_polyline(img, landmarks[loop], 0.1)
    return GrayImage(np.clip(img, 0.0, 1.0))


# -- generation ---------------------------------------------------------------

def synth_generate(config: SynthConfig) -> SynthDataset:
    """Deterministic sample set with ground-truth yaw and expression.

    Each sample gets its own group id (synthetic samples have no shared
    originating photo unless flip augmentation adds one later).
    """
    rng = np.random.default_rng(config.seed)
    labels = rng.choice(
        len(ExpressionLabel), size=config.n_samples, p=np.asarray(config.label_probs)
    )
    yaws = rng.uniform(config.yaw_range[0], config.yaw_range[1], size=config.n_samples)
    samples = []
    for i in range(config.n_samples):
        label = ExpressionLabel(int(labels[i]))
        yaw = float(yaws[i])
        pts = _landmarks_for(label, yaw, config, rng)
        image = render_face(pts, config.image_size)
        if config.pixel_noise > 0:
            noisy = image.pixels + rng.normal(0.0, config.pixel_noise, image.pixels.shape)
            image = GrayImage(np.clip(noisy, 0.0, 1.0))
        samples.append(
            SynthSample(image, Shape(pts), label, f"synth-{i:06d}", yaw)
        )
    return SynthDataset(samples, config)


def landmarks_at(label: ExpressionLabel, yaw_deg: float,
                 config: SynthConfig = SynthConfig()) -> Shape:
    """Noise-free landmarks for one (label, yaw) pair; test hook."""
    return Shape(_landmarks_for(label, yaw_deg, config, None))
