"""Reading the benchmark's data files into training samples.

The network talks to the data-producing toolkit purely through its file
formats: a JSONL scene manifest, whitespace-separated line-segment files,
and ternary label files. Segments are converted to the centered
half-height image frame and embedded as the six sign-free quadratic
monomials of their unit line equations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image


@dataclass
class Sample:
    """One record, ready for the network.

    labels_z / labels_h are -1/0/1 per line; records without a label file
    get all -1 (every line masked out of the classification losses).
    zenith and horizon are the stored ground-truth calibration in pixel
    coordinates; up is the same zenith pulled back through the intrinsics
    into camera coordinates (the target for the zenith head).
    """

    index: int
    image: torch.Tensor
    lines: torch.Tensor
    labels_z: torch.Tensor
    labels_h: torch.Tensor
    zenith: torch.Tensor
    horizon: torch.Tensor
    up: torch.Tensor
    fov_deg: float
    width: int
    height: int


def read_manifest(path) -> tuple:
    """Header dict plus record dicts from a scene manifest."""
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{ln}: bad JSON: {exc}") from exc
    if not rows or "config_sha256" not in rows[0]:
        raise ValueError(f"{path}: missing manifest header")
    header, records = rows[0], rows[1:]
    for r in records:
        if "index" not in r or "calib" not in r:
            raise ValueError(f"{path}: record without index/calib fields")
    return header, records


def read_segments(path) -> np.ndarray:
    """Endpoint rows x0 y0 x1 y1; extra columns and # comments ignored."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 4:
                raise ValueError(f"{path}:{ln}: expected at least 4 columns")
            rows.append([float(v) for v in parts[:4]])
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


def read_labels(path) -> np.ndarray:
    """Rows of `index cz ch`; returns an (n, 2) int array ordered by index."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{ln}: expected `index cz ch`")
            rows.append([int(v) for v in parts])
    arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    if arr.size and not np.array_equal(arr[:, 0], np.arange(len(arr))):
        raise ValueError(f"{path}: label indices must be 0..n-1 in order")
    return arr[:, 1:]


def segment_features(segments: np.ndarray, width: int, height: int) -> np.ndarray:
    """Six quadratic monomials of each segment's unit line equation.

    Endpoints are first mapped to the centered frame (origin at the image
    center, both axes divided by height/2), where the coefficients of a
    line through the image are all of order one.
    """
    segs = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    cx, cy, scale = width / 2.0, height / 2.0, height / 2.0
    p0 = np.stack(
        [(segs[:, 0] - cx) / scale, (segs[:, 1] - cy) / scale, np.ones(len(segs))], axis=1
    )
    p1 = np.stack(
        [(segs[:, 2] - cx) / scale, (segs[:, 3] - cy) / scale, np.ones(len(segs))], axis=1
    )
    l = np.cross(p0, p1)
    norms = np.linalg.norm(l, axis=1)
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise ValueError(f"degenerate segment at row {int(bad[0])}")
    l = l / norms[:, None]
    a, b, c = l[:, 0], l[:, 1], l[:, 2]
    return np.stack([a * a, a * b, a * c, b * b, b * c, c * c], axis=1)


def up_target(zenith, fov_deg: float, width: int, height: int) -> np.ndarray:
    """Unit camera-frame zenith direction for a pixel-frame zenith point.

    Applies the inverse pinhole intrinsics (vertical field of view, focal
    (h/2)/tan(fov/2), principal point at the center) and canonicalizes the
    sign so the y component is non-positive under y-down axes.
    """
    z = np.asarray(zenith, dtype=np.float64).reshape(3)
    f = (height / 2.0) / np.tan(np.radians(fov_deg) / 2.0)
    v = np.array(
        [
            (z[0] - (width / 2.0) * z[2]) / f,
            (z[1] - (height / 2.0) * z[2]) / f,
            z[2],
        ]
    )
    n = np.linalg.norm(v)
    if n < 1e-15:
        raise ValueError("zero zenith vector")
    v /= n
    if v[1] > 0 or (v[1] == 0 and v[2] < 0):
        v = -v
    return v


def _resolve(base: Path, rel: str) -> Path:
    p = base / rel
    if not p.exists():
        raise FileNotFoundError(f"{p} (referenced by the manifest)")
    return p


def load_sample(record: dict, base: Path) -> Sample:
    """Build a Sample from one manifest record; paths resolve against base."""
    calib = record["calib"]
    width, height = int(calib["width"]), int(calib["height"])
    img = Image.open(_resolve(base, record["image"])).convert("RGB")
    if img.size != (width, height):
        raise ValueError(
            f"record {record['index']}: image is {img.size}, calib says {(width, height)}"
        )
    image = torch.from_numpy(
        np.asarray(img, dtype=np.float32).transpose(2, 0, 1) / 255.0
    )
    lines_rel = record.get("lines_sampled") or record.get("lines")
    if not lines_rel:
        raise ValueError(f"record {record['index']} names no line file")
    segments = read_segments(_resolve(base, lines_rel))
    lines = torch.from_numpy(
        segment_features(segments, width, height).astype(np.float32)
    )
    if record.get("labels"):
        labels = read_labels(_resolve(base, record["labels"]))
        if len(labels) != len(segments):
            raise ValueError(
                f"record {record['index']}: {len(labels)} labels for {len(segments)} lines"
            )
    else:
        labels = np.full((len(segments), 2), -1, dtype=np.int64)
    return Sample(
        index=int(record["index"]),
        image=image,
        lines=lines,
        labels_z=torch.from_numpy(labels[:, 0].copy()),
        labels_h=torch.from_numpy(labels[:, 1].copy()),
        zenith=torch.tensor(calib["zenith"], dtype=torch.float64),
        horizon=torch.tensor(calib["horizon"], dtype=torch.float64),
        up=torch.from_numpy(
            up_target(calib["zenith"], float(calib["fov_deg"]), width, height)
        ),
        fov_deg=float(calib["fov_deg"]),
        width=width,
        height=height,
    )


def load_dataset(manifest_path) -> tuple:
    """Header plus all records of a manifest as Samples."""
    manifest_path = Path(manifest_path)
    header, records = read_manifest(manifest_path)
    base = manifest_path.parent
    return header, [load_sample(r, base) for r in records]
