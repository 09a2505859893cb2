"""Pose-aware facial expression recognition from cropped faces and 68-point
landmarks: Procrustes normalization, head-pose clustering, hand-crafted
features, pose-conditioned classifiers and a two-branch fusion network."""

__version__ = "0.1.0"

from .backend import BACKEND
