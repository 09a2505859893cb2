"""Dataset file ingestion: pts landmark files, PGM images, manifest CSVs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..classify import ExpressionLabel
from ..errors import ParseError, PointCountMismatch, UnknownLabel
from ..features.image import GrayImage
from ..shape import Shape


def load_pts(path) -> Shape:
    """Parse the standard pts layout used by the 68-landmark databases:
    ``version`` and ``n_points`` header lines, then `x y` lines inside
    braces."""
    lines = Path(path).read_text().splitlines()
    it = iter(enumerate(lines, start=1))
    n_points = None
    coords = []
    in_body = False
    closed = False
    for lineno, raw in it:
        line = raw.strip()
        if not line:
            continue
        if not in_body:
            if line.startswith("version:"):
                continue
            if line.startswith("n_points:"):
                try:
                    n_points = int(line.split(":", 1)[1])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad n_points") from exc
                continue
            if line == "{":
                if n_points is None:
                    raise ParseError(f"{path}:{lineno}: brace before n_points header")
                in_body = True
                continue
            raise ParseError(f"{path}:{lineno}: unexpected header line {line!r}")
        if line == "}":
            closed = True
            break
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected `x y`, got {line!r}")
        try:
            coords.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad coordinate {line!r}") from exc
    if not in_body or not closed:
        raise ParseError(f"{path}: missing braces around coordinates")
    if len(coords) != n_points:
        raise PointCountMismatch(
            f"{path}: header says {n_points} points, parsed {len(coords)}"
        )
    return Shape(np.array(coords))


def save_pts(path, shape: Shape) -> None:
    lines = ["version: 1", f"n_points: {shape.n_points}", "{"]
    lines += [f"{x:.6f} {y:.6f}" for x, y in shape.points]
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_pgm(path) -> GrayImage:
    """Binary (P5) 8-bit PGM reader."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ParseError(f"{path}: not a binary PGM file")
    # header tokens: magic, width, height, maxval; comments start with '#'
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return GrayImage(raw.reshape(height, width) / maxval)


def save_pgm(path, image: GrayImage) -> None:
    header = f"P5\n{image.width} {image.height}\n255\n".encode()
    body = np.round(image.pixels * 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + body)


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    pts_path: str
    label: ExpressionLabel | None
    group_id: str
    flip_of: int | None = None  # index of the originating entry


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    warnings: list[str] = field(default_factory=list)


def load_manifest(path) -> DatasetManifest:
    """CSV with header image,pts,label,group; label may be empty (unlabeled).
    Duplicate (image, pts) pairs are accepted with a warning."""
    entries = []
    warnings = []
    seen: set[tuple[str, str]] = set()
    label_names = {l.name for l in ExpressionLabel}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty manifest") from None
        if [h.strip() for h in header[:4]] != ["image", "pts", "label", "group"]:
            raise ParseError(f"{path}:1: expected header image,pts,label,group")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 4:
                raise ParseError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            image, pts, label_str, group = (c.strip() for c in row[:4])
            if not group:
                raise ParseError(f"{path}:{lineno}: empty group id")
            if label_str and label_str not in label_names:
                raise UnknownLabel(f"{path}:{lineno}: unknown label {label_str!r}")
            label = ExpressionLabel[label_str] if label_str else None
            key = (image, pts)
            if key in seen:
                warnings.append(f"{path}:{lineno}: duplicate (image, pts) pair {key}")
            seen.add(key)
            entries.append(ManifestEntry(image, pts, label, group))
    return DatasetManifest(entries, warnings)


def save_manifest(path, manifest: DatasetManifest) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "pts", "label", "group"])
        for e in manifest.entries:
            writer.writerow(
                [e.image_path, e.pts_path, e.label.name if e.label else "", e.group_id]
            )
