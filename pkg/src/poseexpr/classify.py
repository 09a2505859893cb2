"""Pose-conditioned expression classification on hand-crafted features:
one-vs-rest hinge-loss linear model, random forest, class balancing,
hard-example mining and confusion-matrix evaluation."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyClass,
    EmptyMatrix,
    ParseError,
    SingleClassData,
)


class ExpressionLabel(IntEnum):
    Neutral = 0
    Happy = 1
    Sad = 2
    Fear = 3
    Angry = 4
    Surprise = 5
    Disgust = 6


N_CLASSES = len(ExpressionLabel)
LABEL_NAMES = [l.name for l in ExpressionLabel]


@dataclass(frozen=True)
class LabeledSample:
    feature: np.ndarray
    label: ExpressionLabel
    pose: int = 0
    group_id: str = ""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    learning_rate: float = 0.05
    l2_lambda: float = 1e-4
    seed: int = 0
    balancing: str = "none"  # none | undersample | oversample | class_weights
    hard_mining_band: float = 0.0
    n_trees: int = 30
    max_depth: int = 12
    min_leaf: int = 1
    class_weights: tuple = ()


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (C, D)
    bias: np.ndarray  # (C,)
    config: TrainConfig

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class ForestModel:
    # each tree is a dict of parallel arrays: feature, threshold, left, right,
    # counts (leaf class-count rows); feature == -1 marks a leaf
    trees: list[dict]
    config: TrainConfig
    dim: int
    oob_accuracy: float = float("nan")


def _stack(samples: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([np.asarray(s.feature, dtype=np.float64) for s in samples])
    y = np.array([int(s.label) for s in samples], dtype=np.int64)
    return X, y


# -- linear max-margin model --------------------------------------------------

def train_linear(samples: list[LabeledSample], config: TrainConfig = TrainConfig()) -> LinearModel:
    """One-vs-rest hinge loss with L2 regularization, trained by stochastic
    subgradient descent with a 1/(1+epoch) step decay.  Deterministic under
    the config seed."""
    X, y = _stack(samples)
    if np.unique(y).size < 2:
        raise SingleClassData("need at least two classes to train")
    n, d = X.shape
    if config.class_weights:
        cw = np.asarray(config.class_weights, dtype=np.float64)
    else:
        cw = np.ones(N_CLASSES)
    sample_w = cw[y]

    W = np.zeros((N_CLASSES, d))
    b = np.zeros(N_CLASSES)
    targets = np.full((n, N_CLASSES), -1.0)
    targets[np.arange(n), y] = 1.0

    rng = np.random.default_rng(config.seed)
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + epoch)
        order = rng.permutation(n)
        for i in order:
            x = X[i]
            margins = targets[i] * (W @ x + b)
            active = margins < 1.0  # hinge subgradient support
            grad_scale = -targets[i] * active * sample_w[i]
            W *= 1.0 - lr * config.l2_lambda
            W -= lr * np.outer(grad_scale, x)
            b -= lr * grad_scale
    return LinearModel(W, b, config)


def linear_objective(model: LinearModel, samples: list[LabeledSample]) -> float:
    """Mean one-vs-rest hinge loss plus the L2 penalty."""
    X, y = _stack(samples)
    targets = np.full((X.shape[0], N_CLASSES), -1.0)
    targets[np.arange(X.shape[0]), y] = 1.0
    margins = targets * (X @ model.weights.T + model.bias)
    hinge = np.maximum(0.0, 1.0 - margins).sum(axis=1).mean()
    return float(hinge + model.config.l2_lambda * np.sum(model.weights**2))


# -- random forest ------------------------------------------------------------

def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float(np.sum(p * p))


def _grow_tree(X, y, idx, depth, config, rng, nodes):
    counts = np.bincount(y[idx], minlength=N_CLASSES).astype(np.float64)
    node = len(nodes["feature"])
    for key in nodes:
        nodes[key].append(None)

    def leaf():
        nodes["feature"][node] = -1
        nodes["threshold"][node] = 0.0
        nodes["left"][node] = -1
        nodes["right"][node] = -1
        nodes["counts"][node] = counts
        return node

    if (
        depth == 0
        or idx.size <= config.min_leaf
        or np.count_nonzero(counts) == 1
    ):
        return leaf()

    d = X.shape[1]
    n_try = max(1, int(np.sqrt(d)))
    features = rng.choice(d, size=min(n_try, d), replace=False)
    best = (np.inf, -1, 0.0)
    parent_gini = _gini(counts)
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[idx][order]
        left = np.zeros(N_CLASSES)
        right = counts.copy()
        for i in range(idx.size - 1):
            left[sy[i]] += 1
            right[sy[i]] -= 1
            if sv[i] == sv[i + 1]:
                continue
            nl, nr = i + 1, idx.size - i - 1
            score = (nl * _gini(left) + nr * _gini(right)) / idx.size
            if score < best[0] - 1e-15:
                best = (score, f, 0.5 * (sv[i] + sv[i + 1]))
    if best[1] < 0 or best[0] >= parent_gini - 1e-12:
        return leaf()

    _, f, thr = best
    mask = X[idx, f] <= thr
    left_idx, right_idx = idx[mask], idx[~mask]
    if left_idx.size == 0 or right_idx.size == 0:
        return leaf()
    nodes["feature"][node] = int(f)
    nodes["threshold"][node] = float(thr)
    nodes["counts"][node] = counts
    nodes["left"][node] = _grow_tree(X, y, left_idx, depth - 1, config, rng, nodes)
    nodes["right"][node] = _grow_tree(X, y, right_idx, depth - 1, config, rng, nodes)
    return node


def _tree_leaf_counts(tree: dict, x: np.ndarray) -> np.ndarray:
    node = 0
    while tree["feature"][node] >= 0:
        if x[tree["feature"][node]] <= tree["threshold"][node]:
            node = tree["left"][node]
        else:
            node = tree["right"][node]
    return tree["counts"][node]


def train_forest(
    samples: list[LabeledSample],
    config: TrainConfig = TrainConfig(),
    bootstrap: bool = True,
) -> ForestModel:
    """Gini-split trees on bootstrap resamples with sqrt(D) feature
    subsampling per node; reports out-of-bag accuracy."""
    X, y = _stack(samples)
    if np.unique(y).size < 2:
        raise SingleClassData("need at least two classes to train")
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    trees = []
    oob_votes = np.zeros((n, N_CLASSES))
    for _ in range(config.n_trees):
        if bootstrap:
            bag = rng.integers(0, n, size=n)
        else:
            bag = np.arange(n)
        depth = config.max_depth if config.max_depth > 0 else 10**9
        nodes = {"feature": [], "threshold": [], "left": [], "right": [], "counts": []}
        _grow_tree(X, y, bag, depth, config, rng, nodes)
        tree = {
            "feature": np.array(nodes["feature"], dtype=np.int64),
            "threshold": np.array(nodes["threshold"], dtype=np.float64),
            "left": np.array(nodes["left"], dtype=np.int64),
            "right": np.array(nodes["right"], dtype=np.int64),
            "counts": np.stack(nodes["counts"]),
        }
        trees.append(tree)
        if bootstrap:
            out_of_bag = np.setdiff1d(np.arange(n), bag)
            for i in out_of_bag:
                counts = _tree_leaf_counts(tree, X[i])
                total = counts.sum()
                if total > 0:
                    oob_votes[i] += counts / total
    covered = oob_votes.sum(axis=1) > 0
    if bootstrap and covered.any():
        oob_acc = float(np.mean(np.argmax(oob_votes[covered], axis=1) == y[covered]))
    else:
        oob_acc = float("nan")
    return ForestModel(trees, config, X.shape[1], oob_acc)


# -- prediction ---------------------------------------------------------------

def scores_of(model, feature: np.ndarray) -> np.ndarray:
    feature = np.asarray(feature, dtype=np.float64)
    if feature.size != model.dim:
        raise DimensionMismatch(f"feature dim {feature.size} != model dim {model.dim}")
    if isinstance(model, LinearModel):
        return model.weights @ feature + model.bias
    votes = np.zeros(N_CLASSES)
    for tree in model.trees:
        counts = _tree_leaf_counts(tree, feature)
        total = counts.sum()
        if total > 0:
            votes += counts / total
    return votes / len(model.trees)


def predict(model, feature: np.ndarray) -> tuple[ExpressionLabel, np.ndarray]:
    """Argmax label with ties broken toward the lowest ordinal."""
    scores = scores_of(model, feature)
    return ExpressionLabel(int(np.argmax(scores))), scores


# -- balancing and mining -----------------------------------------------------

def class_weight_vector(samples: list[LabeledSample]) -> tuple:
    counts = np.bincount([int(s.label) for s in samples], minlength=N_CLASSES)
    majority = counts.max()
    weights = np.where(counts > 0, majority / np.maximum(counts, 1), 0.0)
    return tuple(weights)


def balance(samples: list[LabeledSample], strategy: str, seed: int = 0) -> list[LabeledSample]:
    """undersample: every class down to the minority count (no replacement);
    oversample: every class up to the majority count (with replacement);
    none / class_weights: samples unchanged."""
    if strategy in ("none", "class_weights"):
        return list(samples)
    by_class: dict[int, list[LabeledSample]] = {}
    for s in samples:
        by_class.setdefault(int(s.label), []).append(s)
    rng = np.random.default_rng(seed)
    out: list[LabeledSample] = []
    if strategy == "undersample":
        if not by_class:
            raise EmptyClass("undersample needs at least one sample per present class")
        target = min(len(v) for v in by_class.values())
        for label in sorted(by_class):
            members = by_class[label]
            if len(members) == target:
                out.extend(members)
            else:
                pick = rng.choice(len(members), size=target, replace=False)
                out.extend(members[i] for i in sorted(pick))
    elif strategy == "oversample":
        target = max(len(v) for v in by_class.values())
        for label in sorted(by_class):
            members = by_class[label]
            out.extend(members)
            extra = target - len(members)
            if extra > 0:
                pick = rng.integers(0, len(members), size=extra)
                out.extend(members[i] for i in pick)
    else:
        raise ValueError(f"unknown balancing strategy {strategy!r}")
    return out


def mine_hard_examples(model, samples: list[LabeledSample], band: float) -> list[LabeledSample]:
    """Samples that are misclassified or whose top-two score margin is below
    the band, in input order."""
    hard = []
    for s in samples:
        label, scores = predict(model, s.feature)
        top2 = np.sort(scores)[-2:]
        margin = float(top2[1] - top2[0])
        if label != s.label or margin < band:
            hard.append(s)
    return hard


# -- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (7, 7) rows true, columns predicted

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES) or (counts < 0).any():
            raise ValueError("confusion matrix must be 7x7 non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def evaluate(model, samples: list[LabeledSample]) -> ConfusionMatrix:
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for s in samples:
        pred, _ = predict(model, s.feature)
        counts[int(s.label), int(pred)] += 1
    return ConfusionMatrix(counts)


def confusion_accuracy(matrix: ConfusionMatrix) -> float:
    if matrix.total == 0:
        raise EmptyMatrix("cannot compute accuracy of an empty matrix")
    return float(np.trace(matrix.counts)) / matrix.total


# -- model files --------------------------------------------------------------

_MODEL_MAGIC = b"PXMD"
_MODEL_VERSION = 1
_KIND_LINEAR = 1
_KIND_FOREST = 2


def save_model(model, path) -> None:
    """Versioned binary container; forests are serialized as preorder node
    lists (the arrays are already preorder-indexed)."""
    with open(path, "wb") as fh:
        if isinstance(model, LinearModel):
            fh.write(struct.pack("<4sHHQQ", _MODEL_MAGIC, _MODEL_VERSION,
                                 _KIND_LINEAR, N_CLASSES, model.dim))
            fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(model.bias, dtype="<f8").tobytes())
        elif isinstance(model, ForestModel):
            fh.write(struct.pack("<4sHHQQ", _MODEL_MAGIC, _MODEL_VERSION,
                                 _KIND_FOREST, len(model.trees), model.dim))
            fh.write(struct.pack("<d", model.oob_accuracy))
            for tree in model.trees:
                n = tree["feature"].size
                fh.write(struct.pack("<Q", n))
                fh.write(tree["feature"].astype("<i8").tobytes())
                fh.write(tree["threshold"].astype("<f8").tobytes())
                fh.write(tree["left"].astype("<i8").tobytes())
                fh.write(tree["right"].astype("<i8").tobytes())
                fh.write(tree["counts"].astype("<f8").tobytes())
        else:
            raise TypeError(f"cannot serialize {type(model).__name__}")


def load_model(path):
    with open(path, "rb") as fh:
        magic, version, kind, a, dim = struct.unpack("<4sHHQQ", fh.read(24))
        if magic != _MODEL_MAGIC or version != _MODEL_VERSION:
            raise ParseError("not a poseexpr model file")
        if kind == _KIND_LINEAR:
            W = np.frombuffer(fh.read(a * dim * 8), dtype="<f8").reshape(a, dim).copy()
            b = np.frombuffer(fh.read(a * 8), dtype="<f8").copy()
            return LinearModel(W, b, TrainConfig())
        if kind == _KIND_FOREST:
            (oob,) = struct.unpack("<d", fh.read(8))
            trees = []
            for _ in range(a):
                (n,) = struct.unpack("<Q", fh.read(8))
                tree = {
                    "feature": np.frombuffer(fh.read(n * 8), dtype="<i8").copy(),
                    "threshold": np.frombuffer(fh.read(n * 8), dtype="<f8").copy(),
                    "left": np.frombuffer(fh.read(n * 8), dtype="<i8").copy(),
                    "right": np.frombuffer(fh.read(n * 8), dtype="<i8").copy(),
                    "counts": np.frombuffer(
                        fh.read(n * N_CLASSES * 8), dtype="<f8"
                    ).reshape(n, N_CLASSES).copy(),
                }
                trees.append(tree)
            return ForestModel(trees, TrainConfig(), dim, oob)
        raise ParseError(f"unknown model kind {kind}")
