"""End-to-end orchestration: GPA, pose model, per-pose features and
classifiers, pose-agnostic baseline, report."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .. import classify as cls
from ..classify import ExpressionLabel, LabeledSample, TrainConfig
from ..features import (
    TplbpParams,
    geometric_feature,
    normalize_feature,
    pca_reduce_apply,
    pca_reduce_fit,
    sift_face_feature,
    tplbp_grid_feature,
)
from ..posecluster import (
    assign_pose,
    fit_pose_model,
    project_first,
    threshold_class,
)
from ..shape import Shape, align_to_reference, flip_reorder, default_flip_permutation, gpa
from ..features.image import GrayImage
from .io import load_manifest, load_pgm, load_pts
from .report import PoseResult, Report
from .split import split_grouped
from .synth import SynthDataset


@dataclass(frozen=True)
class PipelineSample:
    landmarks: Shape
    label: ExpressionLabel
    group_id: str
    image: GrayImage | None = None


@dataclass
class PipelineConfig:
    k_poses: int = 5
    features: tuple = ("sift", "tplbp_grid", "geom")
    pca_fraction: float = 0.95
    pca_max_fit_samples: int = 1500
    classifier: str = "linear"  # linear | forest | fusion
    seed: int = 0
    train_ratio: float = 0.70
    balancing: str = "undersample"
    hard_mining_band: float = 0.0
    gpa_iterations: int = 100
    epochs: int = 40
    learning_rate: float = 0.05
    l2_lambda: float = 1e-4
    n_trees: int = 30
    max_depth: int = 12
    fusion_input_size: int = 64
    fusion_phase1_epochs: int = 2
    fusion_epochs: int = 8
    fusion_batch: int = 16
    fusion_lr: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError("train_ratio must be in (0, 1)")
        known = {"sift", "tplbp_grid", "tplbp_region", "geom"}
        bad = set(self.features) - known
        if bad:
            raise ValueError(f"unknown features {sorted(bad)}")
        if not self.features and self.classifier != "fusion":
            raise ValueError("at least one feature (or the fusion net) required")

    def to_dict(self) -> dict:
        return {
            "k_poses": self.k_poses,
            "features": list(self.features),
            "pca_fraction": self.pca_fraction,
            "pca_max_fit_samples": self.pca_max_fit_samples,
            "classifier": self.classifier,
            "seed": self.seed,
            "train_ratio": self.train_ratio,
            "balancing": self.balancing,
            "hard_mining_band": self.hard_mining_band,
            "gpa_iterations": self.gpa_iterations,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "l2_lambda": self.l2_lambda,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        data = json.loads(Path(path).read_text())
        if "features" in data:
            data["features"] = tuple(data["features"])
        return cls(**data)


def samples_from_synth(dataset: SynthDataset) -> list[PipelineSample]:
    return [
        PipelineSample(s.landmarks, s.label, s.group_id, s.image)
        for s in dataset.samples
    ]


def load_dataset(
    manifest_path, flip_augment: bool = False, load_images: bool = True
) -> list[PipelineSample]:
    """Materialize a manifest: pts + (optionally) images, with optional
    mirror-flip augmentation sharing the originating group id."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    manifest = load_manifest(manifest_path)
    perm = default_flip_permutation()
    samples = []
    for e in manifest.entries:
        if e.label is None:
            continue
        landmarks = load_pts(base / e.pts_path)
        image = load_pgm(base / e.image_path) if load_images else None
        samples.append(PipelineSample(landmarks, e.label, e.group_id, image))
        if flip_augment:
            if image is None:
                raise ValueError("flip augmentation needs images")
            flipped_lm = flip_reorder(landmarks, perm, width=image.width)
            flipped_img = GrayImage(np.fliplr(image.pixels))
            samples.append(PipelineSample(flipped_lm, e.label, e.group_id, flipped_img))
    return samples


# -- feature assembly ---------------------------------------------------------

class _RawFeatures:
    """Per-sample raw blocks, computed once; per-scope PCA happens later."""

    def __init__(self, samples, normalized_shapes, config: PipelineConfig):
        self.config = config
        need_image = {"sift", "tplbp_grid"} & set(config.features)
        self.sift = None
        self.tplbp = None
        self.geom = None
        if "sift" in config.features:
            self.sift = np.stack([
                normalize_feature(sift_face_feature(s.image, s.landmarks).values)
                for s in samples
            ])
        if "tplbp_grid" in config.features:
            params = TplbpParams()
            self.tplbp = np.stack([
                normalize_feature(tplbp_grid_feature(s.image, params).values)
                for s in samples
            ])
        if "geom" in config.features:
            self.geom = np.stack([
                normalize_feature(geometric_feature(ns).values)
                for ns in normalized_shapes
            ])
        if need_image and any(s.image is None for s in samples):
            raise ValueError("configured features require images")


def _fit_scope_reducer(raw: _RawFeatures, train_idx, config: PipelineConfig):
    if raw.sift is None:
        return None
    idx = np.asarray(train_idx)
    if idx.size > config.pca_max_fit_samples:
        rng = np.random.default_rng(config.seed)
        idx = np.sort(rng.choice(idx, size=config.pca_max_fit_samples, replace=False))
    return pca_reduce_fit(raw.sift[idx], config.pca_fraction)


def _combined(raw: _RawFeatures, idx: int, reducer) -> np.ndarray:
    parts = []
    if raw.sift is not None:
        parts.append(normalize_feature(pca_reduce_apply(reducer, raw.sift[idx])))
    if raw.tplbp is not None:
        parts.append(raw.tplbp[idx])
    if raw.geom is not None:
        parts.append(raw.geom[idx])
    return np.concatenate(parts)


def _labeled(raw, indices, samples, poses, reducer) -> list[LabeledSample]:
    return [
        LabeledSample(_combined(raw, i, reducer), samples[i].label, poses[i],
                      samples[i].group_id)
        for i in indices
    ]


def _train_classifier(samples: list[LabeledSample], config: PipelineConfig):
    tc = TrainConfig(
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        l2_lambda=config.l2_lambda,
        seed=config.seed,
        balancing=config.balancing,
        hard_mining_band=config.hard_mining_band,
        n_trees=config.n_trees,
        max_depth=config.max_depth,
    )
    work = cls.balance(samples, config.balancing, config.seed)
    if config.balancing == "class_weights":
        tc = replace(tc, class_weights=cls.class_weight_vector(samples))

    def fit(data):
        if config.classifier == "forest":
            return cls.train_forest(data, tc)
        return cls.train_linear(data, tc)

    model = fit(work)
    if config.hard_mining_band > 0:
        hard = cls.mine_hard_examples(model, work, config.hard_mining_band)
        if hard:
            model = fit(work + hard)
    return model


# -- pipeline -----------------------------------------------------------------

def run_pipeline(config: PipelineConfig, samples: list[PipelineSample]) -> Report:
    timing: dict[str, float] = {}

    def stage(name):
        timing[name] = time.perf_counter()
        return name

    def done(name):
        timing[name] = time.perf_counter() - timing[name]

    stage("split")
    train, test = split_grouped(samples, config.train_ratio, config.seed)
    done("split")

    stage("gpa")
    gpa_result = gpa([s.landmarks for s in train], config.gpa_iterations)
    mean = gpa_result.mean_shape
    train_norm = gpa_result.aligned_shapes
    test_norm = align_to_reference([s.landmarks for s in test], mean)
    done("gpa")

    stage("pose_model")
    pose_model = fit_pose_model(train_norm, config.k_poses)
    train_pose = np.array([assign_pose(pose_model, ns) for ns in train_norm])
    test_pose = np.array([assign_pose(pose_model, ns) for ns in test_norm])
    # agreement between the quantile split that seeded the centroids and the
    # final nearest-centroid assignment
    agreements = [
        threshold_class(
            pose_model.thresholds, project_first(pose_model.basis, ns.as_vector())
        ) == p
        for ns, p in zip(train_norm, train_pose)
    ]
    pose_agreement = float(np.mean(agreements))
    done("pose_model")

    stage("features")
    raw_train = _RawFeatures(train, train_norm, config)
    raw_test = _RawFeatures(test, test_norm, config)
    done("features")

    if config.classifier == "fusion":
        report = _run_fusion(
            config, train, test, train_pose, test_pose, raw_train, raw_test,
            pose_agreement, timing,
        )
        return report

    stage("train")
    all_train_idx = np.arange(len(train))
    global_reducer = _fit_scope_reducer(raw_train, all_train_idx, config)
    agnostic_model = _train_classifier(
        _labeled(raw_train, all_train_idx, train, train_pose, global_reducer), config
    )

    pose_models = {}
    pose_reducers = {}
    for pose in range(1, config.k_poses + 1):
        idx = np.flatnonzero(train_pose == pose)
        if idx.size == 0:
            continue
        reducer = _fit_scope_reducer(raw_train, idx, config)
        pose_reducers[pose] = reducer
        labeled = _labeled(raw_train, idx, train, train_pose, reducer)
        try:
            pose_models[pose] = _train_classifier(labeled, config)
        except cls.SingleClassData:
            pose_models[pose] = None  # degenerate class: fall back to agnostic
    done("train")

    stage("evaluate")
    per_pose: dict[int, PoseResult] = {}
    routed_correct = 0
    for pose in range(1, config.k_poses + 1):
        idx = np.flatnonzero(test_pose == pose)
        model = pose_models.get(pose) or agnostic_model
        reducer = pose_reducers.get(pose, global_reducer)
        labeled = _labeled(raw_test, idx, test, test_pose, reducer)
        matrix = cls.evaluate(model, labeled)
        accuracy = cls.confusion_accuracy(matrix) if matrix.total else 0.0
        per_pose[pose] = PoseResult(matrix, accuracy, int(idx.size))
        routed_correct += int(np.trace(matrix.counts))

    test_idx = np.arange(len(test))
    agnostic_labeled = _labeled(raw_test, test_idx, test, test_pose, global_reducer)
    agnostic_matrix = cls.evaluate(agnostic_model, agnostic_labeled)
    agnostic = PoseResult(
        agnostic_matrix, cls.confusion_accuracy(agnostic_matrix), len(test)
    )
    pose_aware_accuracy = routed_correct / len(test) if test else 0.0
    done("evaluate")

    return Report(
        k_poses=config.k_poses,
        per_pose=per_pose,
        pose_aware_accuracy=pose_aware_accuracy,
        agnostic=agnostic,
        pose_agreement=pose_agreement,
        config=config.to_dict(),
        timing=timing,
    )


def _run_fusion(config, train, test, train_pose, test_pose, raw_train, raw_test,
                pose_agreement, timing):
    """Single two-branch net trained jointly on pose + expression, evaluated
    per landmark-assigned pose; the pose-agnostic baseline stays linear."""
    from .. import fusionnet as fn

    stage_start = time.perf_counter()
    all_train_idx = np.arange(len(train))
    reducer = _fit_scope_reducer(raw_train, all_train_idx, config)
    hc_train = np.stack([_combined(raw_train, i, reducer) for i in all_train_idx])
    hc_test = np.stack(
        [_combined(raw_test, i, reducer) for i in range(len(test))]
    ) if test else np.zeros((0, hc_train.shape[1]))

    size = config.fusion_input_size
    for s in train + test:
        if s.image is None or s.image.pixels.shape != (size, size):
            raise ValueError(f"fusion classifier needs {size}x{size} images")
    spec = fn.NetSpec(input_size=size, handcrafted_dim=hc_train.shape[1],
                      k_pose=config.k_poses)
    params = fn.init_params(spec, seed=config.seed)
    images = np.stack([s.image.pixels for s in train])
    pose_labels = train_pose - 1
    expr_labels = np.array([int(s.label) for s in train])

    rng = np.random.default_rng(config.seed)
    n = len(train)

    def run_epochs(n_epochs, weights):
        nonlocal params
        for _ in range(n_epochs):
            order = rng.permutation(n)
            for start in range(0, n, config.fusion_batch):
                sel = order[start : start + config.fusion_batch]
                batch = [
                    (images[i], hc_train[i], pose_labels[i], expr_labels[i])
                    for i in sel
                ]
                params, _ = fn.train_step(
                    params, spec, batch, weights, config.fusion_lr
                )

    # phase 1: pose branch only; phase 2: joint
    run_epochs(config.fusion_phase1_epochs, fn.LossWeights(1.0, 0.0))
    run_epochs(config.fusion_epochs, fn.LossWeights(1.0, 1.0))
    timing["train"] = time.perf_counter() - stage_start

    stage_start = time.perf_counter()
    agnostic_model = _train_classifier(
        _labeled(raw_train, all_train_idx, train, train_pose, reducer), config
    )
    preds = []
    for i, s in enumerate(test):
        _, expr_logits, _ = fn.forward(params, spec, s.image.pixels, hc_test[i])
        preds.append(int(np.argmax(expr_logits)))

    per_pose = {}
    routed_correct = 0
    for pose in range(1, config.k_poses + 1):
        idx = np.flatnonzero(test_pose == pose)
        counts = np.zeros((cls.N_CLASSES, cls.N_CLASSES), dtype=np.int64)
        for i in idx:
            counts[int(test[i].label), preds[i]] += 1
        matrix = cls.ConfusionMatrix(counts)
        accuracy = cls.confusion_accuracy(matrix) if matrix.total else 0.0
        per_pose[pose] = PoseResult(matrix, accuracy, int(idx.size))
        routed_correct += int(np.trace(counts))

    agnostic_labeled = _labeled(
        raw_test, np.arange(len(test)), test, test_pose, reducer
    )
    agnostic_matrix = cls.evaluate(agnostic_model, agnostic_labeled)
    agnostic = PoseResult(
        agnostic_matrix, cls.confusion_accuracy(agnostic_matrix), len(test)
    )
    timing["evaluate"] = time.perf_counter() - stage_start

    return Report(
        k_poses=config.k_poses,
        per_pose=per_pose,
        pose_aware_accuracy=routed_correct / len(test) if test else 0.0,
        agnostic=agnostic,
        pose_agreement=pose_agreement,
        config=config.to_dict(),
        timing=timing,
    )
