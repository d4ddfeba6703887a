"""The calibration network.

A convolutional backbone turns the image into a /32 feature map whose
tokens pass through a self-attention encoder. The decoder then transforms
three learned parameter queries together with one token per input line
segment; feed-forward heads read calibration estimates off the parameter
tokens and convergence scores off the line tokens. Line tokens carry no
positional encoding, so the network is permutation-equivariant in the
lines by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import torch
from torch import nn

from .config import ModelConfig, N_QUERIES

log = logging.getLogger(__name__)


@dataclass
class ForwardOutput:
    """Per-sample network outputs.

    zenith is an unnormalized homogeneous image point, horizon a
    homogeneous line reconstructed from the two predicted boundary
    heights, fov a one-element tensor in degrees. scores_z / scores_h
    hold one probability per input line. up is the raw zenith-head
    output: the zenith direction in camera coordinates, which the
    predicted intrinsics map to the pixel-frame zenith. per_layer
    carries one ForwardOutput per decoder layer (final layer last)
    when the model was built with per_layer_supervision, else None.
    """

    zenith: torch.Tensor
    horizon: torch.Tensor
    fov: torch.Tensor
    scores_z: torch.Tensor
    scores_h: torch.Tensor
    boundary_fracs: torch.Tensor
    up: torch.Tensor
    per_layer: tuple | None = None


def sine_positions(h: int, w: int, d: int, ref: torch.Tensor) -> torch.Tensor:
    """2D sine/cosine positions for an h x w grid, shape (h*w, d).

    Half the channels encode the row coordinate, half the column, each as
    interleaved sin/cos over a geometric frequency ladder.
    """
    half = d // 2
    n_freq = half // 2
    device, dtype = ref.device, ref.dtype
    freq = torch.pow(
        torch.tensor(10000.0, device=device, dtype=dtype),
        torch.arange(n_freq, device=device, dtype=dtype) / max(n_freq, 1),
    )
    ys = torch.arange(h, device=device, dtype=dtype) / max(h, 1) * (2.0 * math.pi)
    xs = torch.arange(w, device=device, dtype=dtype) / max(w, 1) * (2.0 * math.pi)

    def ladder(coord):  # (k,) -> (k, half)
        ang = coord[:, None] / freq[None, :]
        return torch.stack((ang.sin(), ang.cos()), dim=2).flatten(1)

    py = ladder(ys)[:, None, :].expand(h, w, half)
    px = ladder(xs)[None, :, :].expand(h, w, half)
    return torch.cat((py, px), dim=2).reshape(h * w, d)


def conv_backbone(channels_out: int) -> nn.Sequential:
    """Five stride-2 stages: H x W input becomes H/32 x W/32 features."""
    if channels_out % 8:
        raise ValueError("backbone_channels must be divisible by 8")
    widths = [3, 32, 64, 96, 128, channels_out]
    stages = []
    for c_in, c_out in zip(widths[:-1], widths[1:]):
        stages += [
            nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1),
            nn.GroupNorm(8, c_out),
            nn.ReLU(inplace=True),
        ]
    return nn.Sequential(*stages)


def residual_backbone() -> nn.Module:
    """Standard 50-layer residual backbone up to its /32 stage.

    Full-scale option; needs torchvision and is not exercised by the
    test suite.
    """
    try:
        from torchvision.models import resnet50
    except ImportError as exc:  # pragma: no cover
        raise RuntimeError(
            "the resnet50 backbone requires torchvision; install the [full] extra"
        ) from exc
    net = resnet50(weights=None)
    return nn.Sequential(*list(net.children())[:-2])


class EncoderBlock(nn.Module):
    """Post-norm self-attention block; positions enter queries and keys."""

    def __init__(self, d: int, heads: int, ffn_dim: int):
        super().__init__()
        self.attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm1 = nn.LayerNorm(d)
        self.norm2 = nn.LayerNorm(d)
        self.ffn = nn.Sequential(
            nn.Linear(d, ffn_dim), nn.ReLU(inplace=True), nn.Linear(ffn_dim, d)
        )

    def forward(self, x, pos):
        q = x + pos
        a, _ = self.attn(q, q, x, need_weights=False)
        x = self.norm1(x + a)
        return self.norm2(x + self.ffn(x))


class DecoderLayer(nn.Module):
    """Self-attention over the token set, cross-attention into the image."""

    def __init__(self, d: int, heads: int, ffn_dim: int):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.cross_attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm1 = nn.LayerNorm(d)
        self.norm2 = nn.LayerNorm(d)
        self.norm3 = nn.LayerNorm(d)
        self.ffn = nn.Sequential(
            nn.Linear(d, ffn_dim), nn.ReLU(inplace=True), nn.Linear(ffn_dim, d)
        )

    def forward(self, tokens, memory, mem_pos):
        a, _ = self.self_attn(tokens, tokens, tokens, need_weights=False)
        t = self.norm1(tokens + a)
        a, _ = self.cross_attn(t, memory + mem_pos, memory, need_weights=False)
        t = self.norm2(t + a)
        return self.norm3(t + self.ffn(t))


def _mlp(d: int, out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(d, d),
        nn.ReLU(inplace=True),
        nn.Linear(d, d),
        nn.ReLU(inplace=True),
        nn.Linear(d, out),
    )


def _make_heads(d: int) -> nn.ModuleDict:
    heads = nn.ModuleDict(
        {
            "zenith": _mlp(d, 3),
            "horizon": _mlp(d, 2),
            "fov": _mlp(d, 1),
            "class_z": _mlp(d, 2),
            "class_h": _mlp(d, 2),
        }
    )
    # start the horizon heights at mid-image rather than the top edge
    nn.init.constant_(heads["horizon"][-1].bias, 0.5)
    return heads


class CalibNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        if cfg.backbone == "conv":
            self.backbone = conv_backbone(cfg.backbone_channels)
            backbone_out = cfg.backbone_channels
        else:
            self.backbone = residual_backbone()
            backbone_out = 2048
        self.input_proj = nn.Conv2d(backbone_out, cfg.d, kernel_size=1)
        self.line_proj = nn.Linear(6, cfg.d)
        self.queries = nn.Parameter(torch.empty(N_QUERIES, cfg.d))
        nn.init.normal_(self.queries, std=0.02)
        self.encoder = nn.ModuleList(
            EncoderBlock(cfg.d, cfg.heads, cfg.ffn_width)
            for _ in range(cfg.encoder_blocks)
        )
        self.decoder = nn.ModuleList(
            DecoderLayer(cfg.d, cfg.heads, cfg.ffn_width)
            for _ in range(cfg.decoder_layers)
        )
        if cfg.duplicate_heads:
            self.layer_heads = nn.ModuleList(
                _make_heads(cfg.d) for _ in range(cfg.decoder_layers)
            )
            self.heads = self.layer_heads[-1]
        else:
            self.heads = _make_heads(cfg.d)
            self.layer_heads = None

    def _heads_for(self, layer_index: int) -> nn.ModuleDict:
        if self.layer_heads is not None:
            return self.layer_heads[layer_index]
        return self.heads

    def _read_heads(self, heads, tokens, width, height) -> ForwardOutput:
        param_tok, line_tok = tokens[:N_QUERIES], tokens[N_QUERIES:]
        up = heads["zenith"](param_tok[0])
        fracs = heads["horizon"](param_tok[1])
        fov = 90.0 * torch.sigmoid(heads["fov"](param_tok[2]))
        # pixel-frame zenith through the predicted intrinsics: K @ up
        f_px = (height / 2.0) / torch.tan(fov[0] * (math.pi / 360.0))
        zenith = torch.stack(
            (
                f_px * up[0] + (width / 2.0) * up[2],
                f_px * up[1] + (height / 2.0) * up[2],
                up[2],
            )
        )
        b_l = fracs[0] * height
        b_r = fracs[1] * height
        w = torch.as_tensor(float(width), dtype=b_l.dtype, device=b_l.device)
        horizon = torch.stack((b_l - b_r, w, -b_l * w))
        scores_z = torch.softmax(heads["class_z"](line_tok), dim=-1)[:, 1]
        scores_h = torch.softmax(heads["class_h"](line_tok), dim=-1)[:, 1]
        return ForwardOutput(zenith, horizon, fov, scores_z, scores_h, fracs, up)

    def forward(self, image: torch.Tensor, lines: torch.Tensor) -> ForwardOutput:
        """Run one sample: image (3, H, W), line features (n, 6)."""
        if image.dim() != 3 or image.shape[0] != 3:
            raise ValueError(f"image must be (3, H, W), got {tuple(image.shape)}")
        h0, w0 = int(image.shape[1]), int(image.shape[2])
        if h0 % 32 or w0 % 32:
            raise ValueError(f"image sides must be multiples of 32, got {h0}x{w0}")
        lines = torch.as_tensor(lines, dtype=image.dtype, device=image.device)
        if lines.dim() != 2 or lines.shape[1] != 6:
            raise ValueError(f"lines must be (n, 6), got {tuple(lines.shape)}")
        n = lines.shape[0]
        if n > self.cfg.max_lines:
            raise ValueError(f"{n} lines exceed max_lines={self.cfg.max_lines}")

        feats = self.backbone(image.unsqueeze(0))
        mem = self.input_proj(feats).flatten(2).transpose(1, 2)  # (1, hw, d)
        pos = sine_positions(
            feats.shape[2], feats.shape[3], self.cfg.d, mem
        ).unsqueeze(0)
        for block in self.encoder:
            mem = block(mem, pos)

        tokens = torch.cat((self.queries.to(image.dtype), self.line_proj(lines)))
        tokens = tokens.unsqueeze(0)
        states = []
        for layer in self.decoder:
            tokens = layer(tokens, mem, pos)
            states.append(tokens[0])

        out = self._read_heads(
            self._heads_for(len(states) - 1), states[-1], w0, h0
        )
        if self.cfg.per_layer_supervision:
            out.per_layer = tuple(
                self._read_heads(self._heads_for(i), s, w0, h0)
                for i, s in enumerate(states)
            )
        return out


def build_model(cfg: ModelConfig) -> CalibNet:
    """Construct the network and report its parameter count."""
    model = CalibNet(cfg)
    model.param_count = sum(p.numel() for p in model.parameters())
    log.info("calibnet model: %d parameters", model.param_count)
    return model
