"""Evaluation report container and text/csv/json emission."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from ..classify import LABEL_NAMES, ConfusionMatrix


@dataclass
class PoseResult:
    matrix: ConfusionMatrix
    accuracy: float
    n_test: int


@dataclass
class Report:
    k_poses: int
    per_pose: dict[int, PoseResult]
    pose_aware_accuracy: float  # routed accuracy over all test samples
    agnostic: PoseResult
    pose_agreement: float  # centroid assignment vs quantile split, train set
    config: dict
    timing: dict = field(default_factory=dict)  # text output only


def _matrix_to_lists(matrix: ConfusionMatrix) -> list[list[int]]:
    return [[int(v) for v in row] for row in matrix.counts]


def report_to_dict(report: Report, include_timing: bool = False) -> dict:
    out = {
        "k_poses": report.k_poses,
        "labels": LABEL_NAMES,
        "per_pose": {
            str(pose): {
                "matrix": _matrix_to_lists(r.matrix),
                "accuracy": r.accuracy,
                "n_test": r.n_test,
            }
            for pose, r in sorted(report.per_pose.items())
        },
        "pose_aware_accuracy": report.pose_aware_accuracy,
        "agnostic": {
            "matrix": _matrix_to_lists(report.agnostic.matrix),
            "accuracy": report.agnostic.accuracy,
            "n_test": report.agnostic.n_test,
        },
        "pose_agreement": report.pose_agreement,
        "config": report.config,
    }
    if include_timing:
        out["timing"] = report.timing
    return out


def report_from_dict(data: dict) -> Report:
    def result(d):
        return PoseResult(
            ConfusionMatrix(np.array(d["matrix"], dtype=np.int64)),
            float(d["accuracy"]),
            int(d["n_test"]),
        )

    return Report(
        k_poses=int(data["k_poses"]),
        per_pose={int(p): result(d) for p, d in data["per_pose"].items()},
        pose_aware_accuracy=float(data["pose_aware_accuracy"]),
        agnostic=result(data["agnostic"]),
        pose_agreement=float(data["pose_agreement"]),
        config=data["config"],
        timing=data.get("timing", {}),
    )


def render_matrix(matrix: ConfusionMatrix) -> str:
    width = max(8, max(len(n) for n in LABEL_NAMES) + 1)
    head = " " * width + "".join(f"{n:>{width}}" for n in LABEL_NAMES)
    lines = [head]
    for name, row in zip(LABEL_NAMES, matrix.counts):
        lines.append(f"{name:<{width}}" + "".join(f"{int(v):>{width}}" for v in row))
    return "\n".join(lines)


def render_text(report: Report) -> str:
    parts = [f"Pose-aware evaluation ({report.k_poses} pose classes)", ""]
    for pose, r in sorted(report.per_pose.items()):
        parts.append(
            f"Pose class {pose}: accuracy {r.accuracy:.4f} on {r.n_test} samples"
        )
        parts.append(render_matrix(r.matrix))
        parts.append("")
    parts.append(f"Pose-aware routed accuracy: {report.pose_aware_accuracy:.4f}")
    parts.append(
        f"Pose-agnostic accuracy: {report.agnostic.accuracy:.4f} "
        f"on {report.agnostic.n_test} samples"
    )
    parts.append(render_matrix(report.agnostic.matrix))
    parts.append("")
    parts.append(f"Centroid/quantile pose agreement: {report.pose_agreement:.4f}")
    if report.timing:
        parts.append("")
        parts.append("Timing:")
        for stage, seconds in report.timing.items():
            parts.append(f"  {stage}: {seconds:.2f}s")
    parts.append("")
    parts.append(f"Config: {json.dumps(report.config, sort_keys=True)}")
    return "\n".join(parts) + "\n"


def render_csv(report: Report) -> str:
    """One row per (pose, true, pred, count); pose `all` is the agnostic run."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["pose", "true", "pred", "count"])
    for pose, r in sorted(report.per_pose.items()):
        for ti, tn in enumerate(LABEL_NAMES):
            for pi, pn in enumerate(LABEL_NAMES):
                writer.writerow([pose, tn, pn, int(r.matrix.counts[ti, pi])])
    for ti, tn in enumerate(LABEL_NAMES):
        for pi, pn in enumerate(LABEL_NAMES):
            writer.writerow(["all", tn, pn, int(report.agnostic.matrix.counts[ti, pi])])
    return buf.getvalue()


def emit_report(report: Report, format: str, path) -> None:
    """Write the report; json is lossless and (for a fixed seed) byte-stable,
    so timing is kept out of it."""
    if format == "text":
        content = render_text(report)
    elif format == "csv":
        content = render_csv(report)
    elif format == "json":
        content = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown report format {format!r}")
    try:
        with open(path, "w") as fh:
            fh.write(content)
    except OSError as exc:
        raise IOError(f"cannot write report to {path}: {exc}") from exc
