"""Homogeneous image primitives and the pinhole camera model.

Conventions used everywhere in this package:

- Pixel coordinates are y-down with the origin at the top-left corner.
- Points and lines are homogeneous 3-vectors; a point with third component 0
  is a direction (point at infinity). Equality is up to nonzero scale.
- The principal point sits at the image center (w/2, h/2), pixels are square,
  and the field of view is vertical: focal_px = (h/2) / tan(fov/2).
- World-to-camera rotation is R = Rz(roll) @ Rx(pitch); the world vertical
  axis is u = (0, 1, 0). The zenith vanishing point is K R u and the horizon
  is the vanishing line K^-T R u. With pitch = 0 the zenith is a direction
  (third component exactly 0) and the horizon passes through the center.

Angle arguments are degrees unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePoseError,
    DegenerateSegmentError,
    UnsupportedPoseError,
    VerticalHorizonError,
)

WORLD_UP = np.array([0.0, 1.0, 0.0])

# |cos| tolerance for projective equality of unit vectors
HOM_EQ_TOL = 1e-9

# point_line_distance(horizon, zenith) below this means the pose is degenerate;
# consistent poses measure >= ~4e-3 in pixel coordinates
POSE_INCIDENCE_EPS = 1e-12


def _vec3(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components: {arr}")
    if not arr.any():
        raise ValueError(f"{name} must not be the zero vector")
    return arr


@dataclass(frozen=True, eq=False)
class HomPoint:
    """Homogeneous image point (x, y, w); w == 0 means point at infinity."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _vec3(self.coords, "point"))

    @property
    def at_infinity(self) -> bool:
        return self.coords[2] == 0.0

    def to_pixel(self) -> np.ndarray:
        """Dehomogenize to (x, y). Raises for points at infinity."""
        w = self.coords[2]
        if w == 0.0:
            raise ValueError("point at infinity has no pixel coordinates")
        return self.coords[:2] / w

    def unit(self) -> np.ndarray:
        return canonical_unit(self.coords)

    def same_as(self, other, tol: float = HOM_EQ_TOL) -> bool:
        return hom_equal(self.coords, _coords(other), tol)


@dataclass(frozen=True, eq=False)
class HomLine:
    """Homogeneous image line (a, b, c): the locus a*x + b*y + c*w = 0."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _vec3(self.coords, "line"))

    def unit(self) -> np.ndarray:
        return canonical_unit(self.coords)

    def same_as(self, other, tol: float = HOM_EQ_TOL) -> bool:
        return hom_equal(self.coords, _coords(other), tol)

    def y_at(self, x: float) -> float:
        a, b, c = self.coords
        if b == 0.0:
            raise VerticalHorizonError("line is vertical; y(x) undefined")
        return float(-(a * x + c) / b)


def _coords(v) -> np.ndarray:
    if isinstance(v, (HomPoint, HomLine)):
        return v.coords
    return _vec3(v)


def hom_equal(a, b, tol: float = HOM_EQ_TOL) -> bool:
    """Projective equality: |cos angle| of the two vectors within tol of 1.

    Works uniformly for finite points, directions, and lines.
    """
    va, vb = _coords(a), _coords(b)
    c = abs(float(va @ vb)) / (np.linalg.norm(va) * np.linalg.norm(vb))
    return 1.0 - c <= tol


def canonical_unit(v) -> np.ndarray:
    """Unit-normalize with a deterministic sign: largest-|.| component > 0."""
    arr = _coords(v)
    u = arr / np.linalg.norm(arr)
    i = int(np.argmax(np.abs(u)))
    if u[i] < 0:
        u = -u
    return u


@dataclass(frozen=True)
class LineSegment:
    """Image line segment with distinct endpoints, pixel coordinates."""

    p0: tuple
    p1: tuple

    def __post_init__(self):
        a = np.asarray(self.p0, dtype=float)
        b = np.asarray(self.p1, dtype=float)
        if a.shape != (2,) or b.shape != (2,):
            raise ValueError("segment endpoints must be 2-vectors")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("segment endpoints must be finite")
        if np.array_equal(a, b):
            raise DegenerateSegmentError(f"zero-length segment at {tuple(a)}")
        object.__setattr__(self, "p0", (float(a[0]), float(a[1])))
        object.__setattr__(self, "p1", (float(b[0]), float(b[1])))

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def line(self) -> HomLine:
        return line_from_endpoints(self.p0, self.p1)


@dataclass(frozen=True)
class CameraFrame:
    """Camera pose and intrinsics: vertical fov, pitch, roll (deg), size (px)."""

    fov_deg: float
    pitch_deg: float
    roll_deg: float
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError(f"fov must be in (0, 180), got {self.fov_deg}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        for name in ("fov_deg", "pitch_deg", "roll_deg"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def focal_px(self) -> float:
        return fov_focal(self.fov_deg, self.height)

    @property
    def center(self) -> tuple:
        return (self.width / 2.0, self.height / 2.0)


@dataclass(frozen=True)
class CalibGT:
    """Calibration target: zenith point, horizon line, vertical fov, size."""

    zenith: HomPoint
    horizon: HomLine
    fov_deg: float
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError(f"fov must be in (0, 180), got {self.fov_deg}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")


def fov_focal(fov_deg: float, height: int) -> float:
    """Vertical field of view (deg) -> focal length in pixels."""
    if not (0.0 < fov_deg < 180.0):
        raise ValueError(f"fov must be in (0, 180), got {fov_deg}")
    return (height / 2.0) / math.tan(math.radians(fov_deg) / 2.0)


def focal_fov(focal_px: float, height: int) -> float:
    """Focal length in pixels -> vertical field of view (deg)."""
    if focal_px <= 0.0:
        raise ValueError(f"focal must be positive, got {focal_px}")
    return math.degrees(2.0 * math.atan((height / 2.0) / focal_px))


def rot_x(deg: float) -> np.ndarray:
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def intrinsics(focal_px: float, cx: float, cy: float) -> np.ndarray:
    return np.array([[focal_px, 0.0, cx], [0.0, focal_px, cy], [0.0, 0.0, 1.0]])


def intrinsics_inv(focal_px: float, cx: float, cy: float) -> np.ndarray:
    f = focal_px
    return np.array([[1.0 / f, 0.0, -cx / f], [0.0, 1.0 / f, -cy / f], [0.0, 0.0, 1.0]])


def line_from_endpoints(p0, p1) -> HomLine:
    """Join of two pixel points: cross product of (x, y, 1) homogeneous lifts."""
    a = np.asarray(p0, dtype=float)
    b = np.asarray(p1, dtype=float)
    if a.shape != (2,) or b.shape != (2,):
        raise ValueError("endpoints must be 2-vectors")
    if np.array_equal(a, b):
        raise DegenerateSegmentError(f"coincident endpoints {tuple(a)}")
    l = np.cross(np.append(a, 1.0), np.append(b, 1.0))
    return HomLine(l)


def point_line_distance(l, v) -> float:
    """|v . l| / (||l|| ||v||): cosine-style incidence measure in [0, 1].

    Scale invariant in both arguments and defined for points at infinity.
    Note this is not the Euclidean pixel distance; its angular reading
    depends on the coordinate frame the inputs live in (see CanonicalFrame).
    """
    lv = _coords(l)
    vv = _coords(v)
    return float(abs(lv @ vv) / (np.linalg.norm(lv) * np.linalg.norm(vv)))


def line_feature(l) -> np.ndarray:
    """Sign-invariant 6-vector (a2, ab, ac, b2, bc, c2) of the unit line.

    These are the upper-triangle entries of the rank-1 outer product, so the
    line is recoverable (up to sign) as the dominant eigenvector.
    """
    u = _coords(l)
    u = u / np.linalg.norm(u)
    a, b, c = u
    return np.array([a * a, a * b, a * c, b * b, b * c, c * c])


def feature_matrix(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (6,):
        raise ValueError("feature must be a 6-vector")
    return np.array(
        [[s[0], s[1], s[2]], [s[1], s[3], s[4]], [s[2], s[4], s[5]]]
    )


def feature_to_line(s) -> HomLine:
    """Recover the unit line (up to sign) from its outer-product feature."""
    m = feature_matrix(s)
    w, vecs = np.linalg.eigh(m)
    return HomLine(vecs[:, int(np.argmax(w))])


def camera_to_calib(cam: CameraFrame) -> CalibGT:
    """Closed-form zenith and horizon for a camera pose.

    Raises UnsupportedPoseError for |pitch| >= 90.
    """
    if abs(cam.pitch_deg) >= 90.0:
        raise UnsupportedPoseError(f"|pitch| must be < 90, got {cam.pitch_deg}")
    cx, cy = cam.center
    k = intrinsics(cam.focal_px, cx, cy)
    k_inv = intrinsics_inv(cam.focal_px, cx, cy)
    r = rot_z(cam.roll_deg) @ rot_x(cam.pitch_deg)
    ru = r @ WORLD_UP
    zenith = HomPoint(k @ ru)
    horizon = HomLine(k_inv.T @ ru)
    return CalibGT(zenith, horizon, cam.fov_deg, cam.width, cam.height)


def calib_to_camera(g: CalibGT) -> CameraFrame:
    """Recover (fov, pitch, roll) from a calibration target.

    The angles come from the zenith and the stored fov; the horizon is only
    checked for consistency (zenith incident on it means no |pitch| < 90 pose
    exists). Exact inverse of camera_to_calib for consistent inputs.
    """
    if point_line_distance(g.horizon, g.zenith) < POSE_INCIDENCE_EPS:
        raise DegeneratePoseError("zenith lies on the horizon")
    f = fov_focal(g.fov_deg, g.height)
    k_inv = intrinsics_inv(f, g.width / 2.0, g.height / 2.0)
    v = k_inv @ g.zenith.coords
    v = v / np.linalg.norm(v)
    # the true vertical direction has y-component cos(roll)cos(pitch) > 0
    if v[1] < 0:
        v = -v
    cos_pitch = math.hypot(v[0], v[1])
    if cos_pitch < 1e-12:
        raise UnsupportedPoseError("zenith at the principal point: |pitch| = 90")
    pitch = math.degrees(math.atan2(v[2], cos_pitch))
    roll = math.degrees(math.atan2(-v[0], v[1]))
    return CameraFrame(g.fov_deg, pitch, roll, g.width, g.height)


def up_direction_from_zenith(z, focal_px: float, center) -> np.ndarray:
    """Unit 3D up direction for a zenith point, sign such that y <= 0.

    In y-down camera coordinates "up" has a non-positive y component. The tie
    at y == 0 (horizontal direction) resolves to non-negative z.
    """
    if focal_px <= 0.0:
        raise ValueError(f"focal must be positive, got {focal_px}")
    cx, cy = float(center[0]), float(center[1])
    v = intrinsics_inv(focal_px, cx, cy) @ _coords(z)
    v = v / np.linalg.norm(v)
    if v[1] > 0 or (v[1] == 0 and v[2] < 0):
        v = -v
    return v


def horizon_boundary_points(h, width: int) -> tuple:
    """Intersections of a horizon line with the image side edges x=0, x=width.

    Returns ((0, y_left), (width, y_right)). Raises VerticalHorizonError when
    the line has no finite intersection with vertical edges (b == 0).
    """
    hv = _coords(h)
    if hv[1] == 0.0:
        raise VerticalHorizonError("horizon parallel to image sides")
    a, b, c = hv
    y0 = -(c) / b
    y1 = -(a * width + c) / b
    return (np.array([0.0, float(y0)]), np.array([float(width), float(y1)]))


@dataclass(frozen=True)
class CanonicalFrame:
    """Centered, half-height-scaled image coordinates.

    The convergence-labeling quantities (candidate filtering, consensus,
    ternary labels) are computed in this frame: origin at the principal
    point, both axes divided by height/2. It needs no focal length, so it is
    equally available at training and inference time, and it makes the
    cosine-style distance behave like an angular measure for image-scale
    points (at fov = 90 the sin thresholds are exact sines of ray angles).
    """

    cx: float
    cy: float
    scale: float

    @classmethod
    def for_image(cls, width: int, height: int) -> "CanonicalFrame":
        if width <= 0 or height <= 0:
            raise ValueError("image size must be positive")
        return cls(width / 2.0, height / 2.0, height / 2.0)

    def point_to(self, p) -> HomPoint:
        x, y, w = _coords(p)
        return HomPoint(
            np.array([(x - self.cx * w) / self.scale, (y - self.cy * w) / self.scale, w])
        )

    def point_from(self, p) -> HomPoint:
        x, y, w = _coords(p)
        return HomPoint(
            np.array([x * self.scale + self.cx * w, y * self.scale + self.cy * w, w])
        )

    def line_to(self, l) -> HomLine:
        a, b, c = _coords(l)
        return HomLine(
            np.array([a * self.scale, b * self.scale, a * self.cx + b * self.cy + c])
        )

    def line_from(self, l) -> HomLine:
        a, b, c = _coords(l)
        return HomLine(
            np.array(
                [a / self.scale, b / self.scale, c - (a * self.cx + b * self.cy) / self.scale]
            )
        )

    def segment_to(self, s: LineSegment) -> LineSegment:
        return LineSegment(
            ((s.p0[0] - self.cx) / self.scale, (s.p0[1] - self.cy) / self.scale),
            ((s.p1[0] - self.cx) / self.scale, (s.p1[1] - self.cy) / self.scale),
        )
