"""Single-process training loop and the per-batch loss step."""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

import torch

from .config import ModelConfig, TrainConfig
from .data import Sample, load_dataset
from .losses import LossBreakdown, combine, loss_bce, loss_fov, loss_horizon, loss_zenith
from .model import CalibNet, ForwardOutput, build_model

TERM_KEYS = ("l_z", "l_h", "l_f", "l_zc", "l_hc")


class TrainingDivergedError(RuntimeError):
    """Raised when the total loss stops being finite."""

    def __init__(self, message: str, breakdown: LossBreakdown | None = None):
        super().__init__(message)
        self.breakdown = breakdown


def _output_terms(out: ForwardOutput, sample: Sample) -> dict:
    # the zenith term compares camera-frame directions, the same angle the
    # up-direction metric reports (pixel-frame vectors hide it behind the
    # focal-length anisotropy)
    return {
        "l_z": loss_zenith(sample.up, out.up),
        "l_h": loss_horizon(sample.horizon, out.horizon, sample.width),
        "l_f": loss_fov(sample.fov_deg, out.fov[0]),
        "l_zc": loss_bce(sample.labels_z, out.scores_z)[0],
        "l_hc": loss_bce(sample.labels_h, out.scores_h)[0],
    }


def sample_losses(model: CalibNet, sample: Sample) -> dict:
    """The five loss terms for one sample.

    With per-layer supervision the terms from every decoder layer are
    summed; otherwise only the final outputs contribute.
    """
    out = model(sample.image, sample.lines)
    if out.per_layer is None:
        return _output_terms(out, sample)
    terms = {k: None for k in TERM_KEYS}
    for layer_out in out.per_layer:
        for k, v in _output_terms(layer_out, sample).items():
            terms[k] = v if terms[k] is None else terms[k] + v
    return terms


def batch_losses(model: CalibNet, batch) -> dict:
    """Mean of each term over a non-empty batch of samples."""
    if not batch:
        raise ValueError("batch must be non-empty")
    acc = {k: 0.0 for k in TERM_KEYS}
    for sample in batch:
        for k, v in sample_losses(model, sample).items():
            acc[k] = acc[k] + v
    return {k: v / len(batch) for k, v in acc.items()}


def train_step(
    model: CalibNet,
    batch,
    weights: dict | None = None,
    optimizer: torch.optim.Optimizer | None = None,
) -> LossBreakdown:
    """One forward/backward pass over a batch.

    Returns the batch-mean loss breakdown (unweighted terms, weighted
    total). When an optimizer is given, backpropagates the total and
    steps it. A non-finite total aborts before any parameter update.
    """
    terms = batch_losses(model, batch)
    total, breakdown = combine(
        terms["l_z"], terms["l_h"], terms["l_f"], terms["l_zc"], terms["l_hc"],
        weights=weights,
    )
    if not torch.isfinite(total.detach()):
        raise TrainingDivergedError(
            f"non-finite loss: {breakdown}", breakdown=breakdown
        )
    if optimizer is not None:
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
    return breakdown


def _batches(samples, batch_size: int, steps: int, generator: torch.Generator):
    """Yield `steps` batches; full dataset per step unless batch_size > 0."""
    if batch_size <= 0 or batch_size >= len(samples):
        for _ in range(steps):
            yield samples
        return
    order = []
    for _ in range(steps):
        if len(order) < batch_size:
            perm = torch.randperm(len(samples), generator=generator).tolist()
            order.extend(perm)
        take, order = order[:batch_size], order[batch_size:]
        yield [samples[i] for i in take]


def save_checkpoint(model: CalibNet, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(
        {
            "model_config": dataclasses.asdict(model.cfg),
            "state_dict": model.state_dict(),
        },
        tmp,
    )
    os.replace(tmp, path)


def load_checkpoint(path) -> CalibNet:
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        # torch surfaces corrupt files as a zoo of unpickling/zip errors
        raise ValueError(f"{path} is not a readable checkpoint: {exc}") from exc
    if (
        not isinstance(payload, dict)
        or "model_config" not in payload
        or "state_dict" not in payload
    ):
        raise ValueError(f"{path} is not a calibnet checkpoint")
    cfg = ModelConfig.from_dict(payload["model_config"])
    model = build_model(cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def train(model_cfg: ModelConfig, train_cfg: TrainConfig) -> tuple:
    """Train a fresh model per the config; returns (model, history).

    Writes model.pt and loss_log.jsonl into train_cfg.out_dir. History is
    one LossBreakdown per step. Divergence aborts with the step number in
    the message and nothing half-written.
    """
    torch.manual_seed(train_cfg.seed)
    _, samples = load_dataset(train_cfg.manifest)
    if not samples:
        raise ValueError(f"{train_cfg.manifest} has no records")
    model = build_model(model_cfg)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.lr)
    gen = torch.Generator().manual_seed(train_cfg.seed)
    history = []
    for step, batch in enumerate(
        _batches(samples, train_cfg.batch_size, train_cfg.steps, gen)
    ):
        try:
            history.append(
                train_step(model, batch, weights=train_cfg.weights or None,
                           optimizer=optimizer)
            )
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(
                f"step {step}: {exc}", breakdown=exc.breakdown
            ) from None

    out_dir = Path(train_cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out_dir / "model.pt")
    log_tmp = out_dir / "loss_log.jsonl.tmp"
    with open(log_tmp, "w", encoding="utf-8") as f:
        for step, b in enumerate(history):
            row = {"step": step, **dataclasses.asdict(b)}
            f.write(json.dumps(row) + "\n")
    os.replace(log_tmp, out_dir / "loss_log.jsonl")
    model.eval()
    return model, history
