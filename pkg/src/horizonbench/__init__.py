"""Single-view horizon/zenith calibration toolkit.

Synthesizes calibrated perspective views from panoramas, derives ternary
line-convergence labels against the zenith and pseudo horizontal vanishing
points, and scores calibration predictions (angular errors, horizon offset,
cumulative-error AUC). See the README for the file formats and CLI.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    CalibGT,
    CameraFrame,
    CanonicalFrame,
    HomLine,
    HomPoint,
    LineSegment,
    calib_to_camera,
    camera_to_calib,
    canonical_unit,
    focal_fov,
    fov_focal,
    hom_equal,
    horizon_boundary_points,
    line_feature,
    line_from_endpoints,
    point_line_distance,
    up_direction_from_zenith,
)
from .labeling import (  # noqa: F401
    ImageLabels,
    LabelSet,
    LineLabel,
    PseudoVPs,
    Thresholds,
    consensus_mass,
    filter_horizon_candidates,
    label_image,
    label_line,
    label_set,
    pseudo_vp_pipeline,
    select_pseudo_vps,
    vp_candidates,
)
from .metrics import (  # noqa: F401
    AngleErrors,
    BceLoss,
    HorizonError,
    LossBreakdown,
    angle_errors,
    auc_cumulative,
    cumulative_curve,
    horizon_error,
    loss_bce,
    loss_fov,
    loss_horizon,
    loss_zenith,
    total_loss,
)
