"""Training losses and evaluation metrics for horizon/zenith calibration.

Losses: cosine zenith distance, boundary-point L1 horizon offset (pixels),
absolute fov difference (degrees), masked binary cross-entropy over ternary
convergence labels. Metrics: angular errors of the recovered pose, the
height-normalized horizon offset, and the area under its cumulative error
curve (percent of the [0, x_max] box).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import (
    CalibGT,
    calib_to_camera,
    fov_focal,
    horizon_boundary_points,
    up_direction_from_zenith,
    _coords,
)

BCE_EPS = 1e-7

DEFAULT_AUC_XMAX = 0.25


class BceLoss(NamedTuple):
    value: float
    n_valid: int


@dataclass(frozen=True)
class LossBreakdown:
    l_z: float
    l_h: float
    l_f: float
    l_zc: float
    l_hc: float
    total: float


def total_loss(l_z: float, l_h: float, l_f: float, l_zc: float, l_hc: float) -> LossBreakdown:
    """Unweighted sum of the five terms; total is exactly their float sum."""
    parts = (float(l_z), float(l_h), float(l_f), float(l_zc), float(l_hc))
    return LossBreakdown(*parts, total=parts[0] + parts[1] + parts[2] + parts[3] + parts[4])


def loss_zenith(z_true, z_pred) -> float:
    """1 - |cos angle| of the two homogeneous zenith vectors; in [0, 1]."""
    a = _coords(z_true)
    b = _coords(z_pred)
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(1.0 - min(c, 1.0))


def loss_horizon(h_true, h_pred, width: int) -> float:
    """Max L1 offset of the two horizon lines at the image side edges x=0 and
    x=width, in pixels. Symmetric in the two lines."""
    (l0, r0) = horizon_boundary_points(h_true, width)
    (l1, r1) = horizon_boundary_points(h_pred, width)
    return float(max(np.abs(l1 - l0).sum(), np.abs(r1 - r0).sum()))


def loss_fov(fov_true: float, fov_pred: float) -> float:
    """Absolute field-of-view difference in degrees."""
    return float(abs(fov_pred - fov_true))


def loss_bce(labels, scores) -> BceLoss:
    """Binary cross-entropy over entries whose label is not -1.

    Scores are clamped to [eps, 1-eps] before the logs. Returns the mean and
    the number of contributing entries; an all-masked input gives (0.0, 0).
    """
    c = np.asarray([int(v) for v in labels])
    s = np.asarray(scores, dtype=float)
    if c.shape != s.shape:
        raise ValueError(f"labels and scores must align, got {c.shape} vs {s.shape}")
    if np.any((s < 0.0) | (s > 1.0)):
        raise ValueError("scores must lie in [0, 1]")
    mask = c != -1
    n = int(mask.sum())
    if n == 0:
        return BceLoss(0.0, 0)
    cv = c[mask].astype(float)
    sv = np.clip(s[mask], BCE_EPS, 1.0 - BCE_EPS)
    val = -(cv * np.log(sv) + (1.0 - cv) * np.log(1.0 - sv)).mean()
    return BceLoss(float(val), n)


class AngleErrors(NamedTuple):
    up_deg: float
    pitch_deg: float
    roll_deg: float
    fov_deg: float


def angle_errors(gt: CalibGT, est: CalibGT) -> AngleErrors:
    """Absolute angular errors between two calibrations of the same image.

    The up error is the angle between the 3D up directions recovered from
    the two zeniths (each through its own intrinsics); pitch/roll/fov errors
    are absolute differences of the recovered camera angles.
    """
    if (gt.width, gt.height) != (est.width, est.height):
        raise ValueError("calibrations describe different image sizes")
    cam_gt = calib_to_camera(gt)
    cam_est = calib_to_camera(est)
    up_gt = up_direction_from_zenith(gt.zenith, cam_gt.focal_px, cam_gt.center)
    up_est = up_direction_from_zenith(est.zenith, cam_est.focal_px, cam_est.center)
    # atan2 form: exact 0 for identical vectors, well conditioned near 0 and pi
    ang = math.atan2(
        float(np.linalg.norm(np.cross(up_gt, up_est))), float(up_gt @ up_est)
    )
    return AngleErrors(
        up_deg=math.degrees(ang),
        pitch_deg=abs(cam_est.pitch_deg - cam_gt.pitch_deg),
        roll_deg=abs(cam_est.roll_deg - cam_gt.roll_deg),
        fov_deg=abs(cam_est.fov_deg - cam_gt.fov_deg),
    )


class HorizonError(NamedTuple):
    value: float  # max boundary offset divided by image height


def horizon_error(h_true, h_pred, width: int, height: int) -> HorizonError:
    """Height-normalized variant of loss_horizon, the quantity the AUC uses."""
    if height <= 0:
        raise ValueError("height must be positive")
    return HorizonError(loss_horizon(h_true, h_pred, width) / float(height))


def auc_cumulative(errors, x_max: float = DEFAULT_AUC_XMAX) -> float:
    """Area under the cumulative error curve on [0, x_max], in percent.

    The empirical CDF of the errors is integrated over [0, x_max] and
    normalized by x_max; each error e contributes max(0, x_max - e). Errors
    beyond x_max therefore contribute nothing, and all-zero errors give 100.
    """
    e = np.asarray(list(errors), dtype=float)
    if e.size == 0:
        raise ValueError("errors must be non-empty")
    if np.any(e < 0.0) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be finite and non-negative")
    if x_max <= 0.0:
        raise ValueError(f"x_max must be positive, got {x_max}")
    return float(np.clip(x_max - e, 0.0, None).sum() / (e.size * x_max) * 100.0)


def cumulative_curve(errors, x_max: float = DEFAULT_AUC_XMAX):
    """Step points (x, percent-below-or-equal) of the empirical CDF on
    [0, x_max], suitable for plotting. Starts at x=0 and ends at x=x_max."""
    e = np.sort(np.asarray(list(errors), dtype=float))
    if e.size == 0:
        raise ValueError("errors must be non-empty")
    n = e.size
    pts = [(0.0, float((e <= 0.0).sum()) / n * 100.0)]
    for x in np.unique(e):
        if x <= 0.0 or x > x_max:
            continue
        frac_before = float((e < x).sum()) / n * 100.0
        frac_at = float((e <= x).sum()) / n * 100.0
        pts.append((float(x), frac_before))
        pts.append((float(x), frac_at))
    pts.append((float(x_max), float((e <= x_max).sum()) / n * 100.0))
    return pts
