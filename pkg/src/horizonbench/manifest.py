"""Scene manifests: JSON-lines records plus a header with the run config.

Line 1 is a header object carrying the tool name, the config echo, its
sha256 (over canonical JSON), and the geometric conventions of the run.
Every following line is one scene record. All paths inside a manifest are
relative to the manifest's directory, which keeps reruns byte-identical
regardless of where the output tree lives. Writes are atomic
(write-temp-then-rename), so a crashed run never leaves a torn file.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import CalibGT, CameraFrame, HomLine, HomPoint

MANIFEST_KIND = "scene_manifest"

CONVENTIONS = {
    "axes": "pixels y-down, origin top-left",
    "fov": "vertical degrees, focal = (h/2)/tan(fov/2)",
    "principal_point": "image center",
    "rotation": "Rz(roll) Rx(pitch) Ry(-yaw), world vertical = y",
    "label_frame": "centered, scaled by h/2",
}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("ascii")).hexdigest()


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class SceneRecord:
    """One synthesized view: pose, ground truth, and relative artifact paths."""

    index: int
    image: str | None
    camera: CameraFrame
    yaw_deg: float
    calib: CalibGT
    lines: str | None = None
    lines_sampled: str | None = None
    labels: str | None = None
    pseudo_vps: str | None = None
    seed: int = 0
    label_partial: bool = False

    def to_obj(self) -> dict:
        c = self.camera
        g = self.calib
        return {
            "index": self.index,
            "image": self.image,
            "camera": {
                "fov_deg": c.fov_deg,
                "pitch_deg": c.pitch_deg,
                "roll_deg": c.roll_deg,
                "width": c.width,
                "height": c.height,
            },
            "yaw_deg": self.yaw_deg,
            "calib": {
                "zenith": [float(x) for x in g.zenith.unit()],
                "horizon": [float(x) for x in g.horizon.unit()],
                "fov_deg": g.fov_deg,
                "width": g.width,
                "height": g.height,
            },
            "lines": self.lines,
            "lines_sampled": self.lines_sampled,
            "labels": self.labels,
            "pseudo_vps": self.pseudo_vps,
            "seed": self.seed,
            "label_partial": self.label_partial,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "SceneRecord":
        try:
            cam = obj["camera"]
            camera = CameraFrame(
                float(cam["fov_deg"]),
                float(cam["pitch_deg"]),
                float(cam["roll_deg"]),
                int(cam["width"]),
                int(cam["height"]),
            )
            cal = obj["calib"]
            calib = CalibGT(
                HomPoint(np.asarray(cal["zenith"], dtype=float)),
                HomLine(np.asarray(cal["horizon"], dtype=float)),
                float(cal["fov_deg"]),
                int(cal["width"]),
                int(cal["height"]),
            )
            return cls(
                index=int(obj["index"]),
                image=obj.get("image"),
                camera=camera,
                yaw_deg=float(obj["yaw_deg"]),
                calib=calib,
                lines=obj.get("lines"),
                lines_sampled=obj.get("lines_sampled"),
                labels=obj.get("labels"),
                pseudo_vps=obj.get("pseudo_vps"),
                seed=int(obj.get("seed", 0)),
                label_partial=bool(obj.get("label_partial", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad scene record {obj.get('index', '?')}: {exc}") from exc


def write_manifest(path, config: dict, records) -> str:
    """Write header + records as JSON lines; returns the config hash."""
    sha = config_hash(config)
    header = {
        "kind": MANIFEST_KIND,
        "version": 1,
        "tool": "horizonbench",
        "config": config,
        "config_sha256": sha,
        "conventions": CONVENTIONS,
    }
    rows = [canonical_json(header)]
    rows.extend(canonical_json(r.to_obj()) for r in records)
    atomic_write_text(path, "\n".join(rows) + "\n")
    return sha


def read_manifest(path):
    """Returns (header_dict, list[SceneRecord])."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not raw:
        raise DataError(f"manifest {path} is empty")
    try:
        header = json.loads(raw[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:1: bad JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("kind") != MANIFEST_KIND:
        raise DataError(f"{path} is not a scene manifest")
    records = []
    for ln, row in enumerate(raw[1:], start=2):
        try:
            obj = json.loads(row)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{ln}: bad JSON: {exc}") from exc
        records.append(SceneRecord.from_obj(obj))
    if [r.index for r in records] != list(range(len(records))):
        raise DataError(f"{path}: record indices must be 0..n-1 in order")
    return header, records
