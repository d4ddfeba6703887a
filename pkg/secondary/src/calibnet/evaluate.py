"""Prediction-file output in the evaluator's JSONL format."""

from __future__ import annotations

import json
import os
from pathlib import Path

import torch

from .data import load_dataset
from .model import CalibNet

THRESHOLD = 0.5


def classify(scores: torch.Tensor, threshold: float = THRESHOLD) -> torch.Tensor:
    """Boolean decisions per line: positive iff score >= threshold.

    A score exactly at the threshold counts as positive.
    """
    return scores >= threshold


def evaluate(model: CalibNet, manifest_path, out_path, threshold: float = THRESHOLD) -> Path:
    """Run the model over every manifest record and write predictions.

    Rows carry the estimated zenith point, horizon line, and fov in the
    manifest's pixel coordinates, plus the indices of lines classified as
    vertically / horizontally convergent. The header ties the file to the
    manifest through its config hash.
    """
    header, samples = load_dataset(manifest_path)
    out_path = Path(out_path)
    model.eval()
    rows = [{"kind": "predictions", "manifest_sha256": header["config_sha256"]}]
    with torch.no_grad():
        for sample in samples:
            out = model(sample.image, sample.lines)
            rows.append(
                {
                    "index": sample.index,
                    "zenith": [float(v) for v in out.zenith],
                    "horizon": [float(v) for v in out.horizon],
                    "fov_deg": float(out.fov[0]),
                    "lines_vertical": torch.nonzero(
                        classify(out.scores_z, threshold), as_tuple=False
                    ).flatten().tolist(),
                    "lines_horizontal": torch.nonzero(
                        classify(out.scores_h, threshold), as_tuple=False
                    ).flatten().tolist(),
                }
            )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    os.replace(tmp, out_path)
    return out_path
