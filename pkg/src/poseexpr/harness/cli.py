"""Command-line interface.

Subcommands: synth, fit-pose, extract, train, evaluate, pipeline.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import classify as cls
from ..errors import PoseExprError, ParseError
from ..features import save_feature_matrix
from ..posecluster import fit_pose_model, load_pose_model, save_pose_model
from ..shape import gpa, align_to_reference
from .io import save_manifest, save_pgm, save_pts, DatasetManifest, ManifestEntry
from .pipeline import (
    PipelineConfig,
    _RawFeatures,
    load_dataset,
    run_pipeline,
    samples_from_synth,
)
from .report import emit_report
from .synth import SynthConfig, synth_generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poseexpr",
        description="Pose-aware facial expression recognition pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON pipeline config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--poses", type=int, default=None, help="pose class count")
        p.add_argument("--features", default=None,
                       help="comma list: sift,tplbp_grid,geom")
        p.add_argument("--classifier", choices=["linear", "forest", "fusion"],
                       default=None)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--format", choices=["text", "csv", "json"], default="text")

    p = sub.add_parser("synth", help="emit a synthetic dataset to a directory")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--noise-sigma", type=float, default=0.005)
    p.add_argument("--yaw-confound", action="store_true")

    p = sub.add_parser("fit-pose", help="fit GPA mean + pose model from landmarks")
    p.add_argument("--data", type=Path, required=True, help="manifest.csv path")
    common(p)

    p = sub.add_parser("extract", help="write feature matrices for a dataset")
    p.add_argument("--data", type=Path, required=True)
    common(p)

    p = sub.add_parser("train", help="train pose-conditioned classifiers")
    p.add_argument("--data", type=Path, required=True)
    common(p)

    p = sub.add_parser("evaluate", help="evaluate trained models on a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    common(p)

    p = sub.add_parser("pipeline", help="run every stage and emit a report")
    p.add_argument("--data", type=Path, help="manifest.csv; omit for synthetic")
    p.add_argument("--synth-n", type=int, default=500)
    p.add_argument("--yaw-confound", action="store_true")
    common(p)
    return parser


def _config_from_args(args) -> PipelineConfig:
    if getattr(args, "config", None):
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.poses is not None:
        updates["k_poses"] = args.poses
    if getattr(args, "features", None):
        updates["features"] = tuple(args.features.split(","))
    if getattr(args, "classifier", None):
        updates["classifier"] = args.classifier
    if updates:
        merged = {**config.to_dict(), **updates}
        merged["features"] = tuple(merged["features"])
        config = PipelineConfig(**merged)
    return config


def _cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "pts").mkdir(parents=True, exist_ok=True)
    cfg = SynthConfig(
        n_samples=args.n, seed=args.seed, image_size=args.image_size,
        noise_sigma=args.noise_sigma, yaw_confound=args.yaw_confound,
    )
    dataset = synth_generate(cfg)
    entries = []
    for i, s in enumerate(dataset.samples):
        img_rel = f"images/{i:06d}.pgm"
        pts_rel = f"pts/{i:06d}.pts"
        save_pgm(out / img_rel, s.image)
        save_pts(out / pts_rel, s.landmarks)
        entries.append(ManifestEntry(img_rel, pts_rel, s.label, s.group_id))
    save_manifest(out / "manifest.csv", DatasetManifest(entries))
    yaws = out / "ground_truth_yaw.csv"
    yaws.write_text(
        "index,yaw_deg\n"
        + "".join(f"{i},{s.yaw_deg:.6f}\n" for i, s in enumerate(dataset.samples))
    )
    print(f"wrote {len(entries)} samples to {out}")
    return EXIT_OK


def _fit_pose_parts(samples, config):
    result = gpa([s.landmarks for s in samples], config.gpa_iterations)
    normalized = result.aligned_shapes
    return result, fit_pose_model(normalized, config.k_poses), normalized


def _cmd_fit_pose(args) -> int:
    config = _config_from_args(args)
    samples = load_dataset(args.data, load_images=False)
    _, pose_model, _ = _fit_pose_parts(samples, config)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_pose_model(pose_model, args.out)
    print(f"pose model ({config.k_poses} classes) written to {args.out}")
    return EXIT_OK


def _cmd_extract(args) -> int:
    config = _config_from_args(args)
    samples = load_dataset(args.data)
    result = gpa([s.landmarks for s in samples], config.gpa_iterations)
    raw = _RawFeatures(samples, result.aligned_shapes, config)
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, matrix, family in (
        ("sift", raw.sift, "sift"),
        ("tplbp_grid", raw.tplbp, "tplbp_grid"),
        ("geom", raw.geom, "geom"),
    ):
        if matrix is not None:
            path = args.out / f"{name}.pxfm"
            save_feature_matrix(path, matrix, family)
            written.append(str(path))
    print("wrote " + ", ".join(written))
    return EXIT_OK


def _cmd_train(args) -> int:
    from ..posecluster import assign_pose
    from .pipeline import _fit_scope_reducer, _labeled, _train_classifier
    from ..features.reduce import save_reducer

    config = _config_from_args(args)
    samples = load_dataset(args.data)
    gpa_result, pose_model, normalized = _fit_pose_parts(samples, config)
    poses = np.array([assign_pose(pose_model, ns) for ns in normalized])
    raw = _RawFeatures(samples, normalized, config)
    args.out.mkdir(parents=True, exist_ok=True)
    save_pose_model(pose_model, args.out / "pose_model.txt")
    all_idx = np.arange(len(samples))
    reducer = _fit_scope_reducer(raw, all_idx, config)
    if reducer is not None:
        save_reducer(reducer, args.out / "reducer.txt")
    model = _train_classifier(_labeled(raw, all_idx, samples, poses, reducer), config)
    cls.save_model(model, args.out / "agnostic.model")
    for pose in range(1, config.k_poses + 1):
        idx = np.flatnonzero(poses == pose)
        if idx.size == 0:
            continue
        pr = _fit_scope_reducer(raw, idx, config)
        if pr is not None:
            save_reducer(pr, args.out / f"reducer_pose{pose}.txt")
        try:
            m = _train_classifier(_labeled(raw, idx, samples, poses, pr), config)
        except cls.SingleClassData:
            continue
        cls.save_model(m, args.out / f"pose{pose}.model")
    print(f"models written to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from ..posecluster import assign_pose
    from ..features.reduce import load_reducer
    from .pipeline import _combined
    from .report import PoseResult, Report

    config = _config_from_args(args)
    samples = load_dataset(args.data)
    pose_model = load_pose_model(args.models / "pose_model.txt")
    from ..shape import Shape
    mean = Shape.from_vector(pose_model.basis.mean)  # training mean shape
    normalized = align_to_reference([s.landmarks for s in samples], mean)
    poses = np.array([assign_pose(pose_model, ns) for ns in normalized])
    raw = _RawFeatures(samples, normalized, config)

    def reducer_for(pose):
        path = args.models / f"reducer_pose{pose}.txt"
        if path.exists():
            return load_reducer(path)
        gpath = args.models / "reducer.txt"
        return load_reducer(gpath) if gpath.exists() else None

    agnostic_model = cls.load_model(args.models / "agnostic.model")
    global_reducer = reducer_for(0)
    per_pose = {}
    routed_correct = 0
    for pose in range(1, pose_model.k + 1):
        idx = np.flatnonzero(poses == pose)
        mpath = args.models / f"pose{pose}.model"
        model = cls.load_model(mpath) if mpath.exists() else agnostic_model
        reducer = reducer_for(pose)
        labeled = [
            cls.LabeledSample(_combined(raw, i, reducer), samples[i].label,
                              poses[i], samples[i].group_id)
            for i in idx
        ]
        matrix = cls.evaluate(model, labeled)
        acc = cls.confusion_accuracy(matrix) if matrix.total else 0.0
        per_pose[pose] = PoseResult(matrix, acc, int(idx.size))
        routed_correct += int(np.trace(matrix.counts))

    labeled_all = [
        cls.LabeledSample(_combined(raw, i, global_reducer), samples[i].label,
                          poses[i], samples[i].group_id)
        for i in range(len(samples))
    ]
    matrix = cls.evaluate(agnostic_model, labeled_all)
    report = Report(
        k_poses=pose_model.k,
        per_pose=per_pose,
        pose_aware_accuracy=routed_correct / len(samples) if samples else 0.0,
        agnostic=PoseResult(matrix, cls.confusion_accuracy(matrix), len(samples)),
        pose_agreement=float("nan"),
        config=config.to_dict(),
    )
    emit_report(report, args.format, args.out)
    print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    config = _config_from_args(args)
    if args.data:
        samples = load_dataset(args.data)
    else:
        dataset = synth_generate(
            SynthConfig(n_samples=args.synth_n, seed=config.seed,
                        noise_sigma=0.005, yaw_confound=args.yaw_confound)
        )
        samples = samples_from_synth(dataset)
    report = run_pipeline(config, samples)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    emit_report(report, args.format, args.out)
    print(
        f"pose-aware accuracy {report.pose_aware_accuracy:.4f}, "
        f"agnostic {report.agnostic.accuracy:.4f}; report at {args.out}"
    )
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "fit-pose": _cmd_fit_pose,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError,) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PoseExprError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
