"""Forward-pass shape contracts and permutation behavior of the network."""

import logging
import math

import pytest
import torch

from calibnet.config import ModelConfig
from calibnet.model import CalibNet, ForwardOutput, build_model, sine_positions


@pytest.fixture(autouse=True)
def _no_grad():
    with torch.no_grad():
        yield


def _toy(**overrides) -> CalibNet:
    torch.manual_seed(11)
    return build_model(ModelConfig.from_dict(overrides))


def _inputs(n: int, seed: int = 3, size: int = 64):
    g = torch.Generator().manual_seed(seed)
    image = torch.rand((3, size, size), generator=g)
    lines = torch.randn((n, 6), generator=g) * 0.5
    return image, lines


def test_forward_output_shapes():
    model = _toy()
    image, lines = _inputs(10)
    out = model(image, lines)
    assert isinstance(out, ForwardOutput)
    assert out.zenith.shape == (3,)
    assert out.up.shape == (3,)
    assert out.horizon.shape == (3,)
    assert out.fov.shape == (1,)
    assert out.scores_z.shape == (10,)
    assert out.scores_h.shape == (10,)
    assert out.per_layer is None
    assert 0.0 < float(out.fov) < 90.0
    assert torch.all((out.scores_z >= 0) & (out.scores_z <= 1))
    assert torch.all((out.scores_h >= 0) & (out.scores_h <= 1))


def test_zenith_is_up_through_intrinsics():
    model = _toy()
    image, lines = _inputs(4)
    out = model(image, lines)
    f = (64 / 2.0) / math.tan(math.radians(float(out.fov)) / 2.0)
    expect = torch.stack(
        (
            f * out.up[0] + 32.0 * out.up[2],
            f * out.up[1] + 32.0 * out.up[2],
            out.up[2],
        )
    )
    assert torch.allclose(out.zenith, expect, atol=1e-5)


def test_zero_lines_still_produces_calibration():
    model = _toy()
    image, lines = _inputs(0)
    out = model(image, lines)
    assert out.zenith.shape == (3,)
    assert out.horizon.shape == (3,)
    assert out.fov.shape == (1,)
    assert out.scores_z.shape == (0,)
    assert out.scores_h.shape == (0,)


def test_per_layer_supervision_copies():
    model = _toy(per_layer_supervision=True, decoder_layers=2)
    image, lines = _inputs(4)
    out = model(image, lines)
    assert out.per_layer is not None and len(out.per_layer) == 2
    for layer_out in out.per_layer:
        assert layer_out.zenith.shape == (3,)
        assert layer_out.scores_z.shape == (4,)
        assert layer_out.per_layer is None
    # the final per-layer copy is the same tensors as the top-level output
    assert torch.equal(out.per_layer[-1].zenith, out.zenith)
    assert torch.equal(out.per_layer[-1].scores_h, out.scores_h)


def test_duplicated_heads_differ_per_layer():
    model = _toy(per_layer_supervision=True, duplicate_heads=True)
    image, lines = _inputs(4)
    out = model(image, lines)
    assert len(out.per_layer) == 2
    # separate head weights: intermediate-layer outputs come from different FFNs
    assert not torch.equal(out.per_layer[0].zenith, out.per_layer[1].zenith)
    assert torch.equal(out.per_layer[-1].zenith, out.zenith)


def test_horizon_passes_through_predicted_boundary_points():
    model = _toy()
    image, lines = _inputs(5)
    out = model(image, lines)
    h = out.horizon.double()
    height, width = 64.0, 64.0
    b_l = float(out.boundary_fracs[0]) * height
    b_r = float(out.boundary_fracs[1]) * height
    p_l = torch.tensor([0.0, b_l, 1.0], dtype=torch.float64)
    p_r = torch.tensor([width, b_r, 1.0], dtype=torch.float64)
    assert abs(float(h @ p_l)) < 1e-4
    assert abs(float(h @ p_r)) < 1e-4


def test_input_validation():
    model = _toy(max_lines=16)
    image, lines = _inputs(4)
    with pytest.raises(ValueError):
        model(image[0], lines)
    with pytest.raises(ValueError):
        model(torch.rand(3, 60, 64), lines)
    with pytest.raises(ValueError):
        model(image, torch.rand(4, 5))
    with pytest.raises(ValueError):
        model(image, torch.rand(17, 6))


def test_build_model_reports_parameter_count(caplog):
    with caplog.at_level(logging.INFO, logger="calibnet.model"):
        model = build_model(ModelConfig.toy())
    assert model.param_count == sum(p.numel() for p in model.parameters())
    assert any("parameters" in r.message for r in caplog.records)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d=65, heads=4)
    with pytest.raises(ValueError):
        ModelConfig(d=6, heads=2)  # not divisible by 4
    with pytest.raises(ValueError):
        ModelConfig(backbone="vgg")
    with pytest.raises(ValueError):
        ModelConfig(duplicate_heads=True)
    with pytest.raises(ValueError):
        ModelConfig.from_dict({"nope": 1})
    full = ModelConfig.full()
    assert (full.d, full.heads, full.decoder_layers) == (256, 8, 6)


def test_sine_positions_shape_and_range():
    ref = torch.zeros(1, dtype=torch.float64)
    pos = sine_positions(2, 2, 64, ref)
    assert pos.shape == (4, 64)
    assert torch.all(pos.abs() <= 1.0)
    # distinct grid cells get distinct encodings
    assert not torch.equal(pos[0], pos[3])
