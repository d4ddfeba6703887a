"""Synthetic dataset generation and line-segment ingest.

Cameras are sampled uniformly per profile, a perspective crop is rectified
out of an equirectangular panorama, and ground truth comes from the same
pose in closed form. The bundled procedural panorama is a checkerboard cube
room whose wall-grid edges double as exact Manhattan line segments, so the
whole pipeline (including labels) runs offline with known geometry.

Panorama convention: longitude in [-pi, pi) left-to-right across the width,
latitude in [-pi/2, pi/2] top-to-bottom down the height. A direction at
longitude lon / latitude lat is (cos lat sin lon, sin lat, cos lat cos lon)
in world coordinates (y is the vertical axis, consistent with the camera
model: the world-to-camera rotation is Rz(roll) Rx(pitch) Ry(-yaw), so the
output center pixel looks exactly along (lon=yaw, lat=pitch)).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import (
    CameraFrame,
    LineSegment,
    intrinsics,
    intrinsics_inv,
    rot_x,
    rot_y,
    rot_z,
)

log = logging.getLogger(__name__)

OUTPUT_SIZE = 512

MAX_SEGMENTS = 512

MIN_SEGMENT_PX = 2.0


@dataclass(frozen=True)
class SampleRanges:
    """Closed uniform sampling ranges, degrees. Degenerate (lo == hi) allowed."""

    fov: tuple
    pitch: tuple
    roll: tuple

    def __post_init__(self):
        for name in ("fov", "pitch", "roll"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range inverted: {lo} > {hi}")
        if not (0.0 < self.fov[0] and self.fov[1] < 180.0):
            raise ValueError(f"fov range must stay inside (0, 180): {self.fov}")


PROFILES = {
    "gsv": SampleRanges(fov=(40.0, 80.0), pitch=(-30.0, 40.0), roll=(-20.0, 20.0)),
    "sun360": SampleRanges(fov=(40.0, 90.0), pitch=(-30.0, 40.0), roll=(-20.0, 20.0)),
}


def sample_camera(
    ranges: SampleRanges,
    seed,
    width: int = OUTPUT_SIZE,
    height: int = OUTPUT_SIZE,
) -> CameraFrame:
    """Draw fov, pitch, roll (in that order) uniformly from the ranges."""
    rng = np.random.default_rng(seed)
    fov = float(rng.uniform(*ranges.fov))
    pitch = float(rng.uniform(*ranges.pitch))
    roll = float(rng.uniform(*ranges.roll))
    return CameraFrame(fov, pitch, roll, width, height)


def camera_rotation(cam: CameraFrame, yaw_deg: float) -> np.ndarray:
    """World-to-camera rotation including the yaw about the vertical axis."""
    return rot_z(cam.roll_deg) @ rot_x(cam.pitch_deg) @ rot_y(-yaw_deg)


def lonlat_to_ray(lon: float, lat: float) -> np.ndarray:
    cl = math.cos(lat)
    return np.array([cl * math.sin(lon), math.sin(lat), cl * math.cos(lon)])


def ray_to_lonlat(d) -> tuple:
    v = np.asarray(d, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero direction")
    v = v / n
    return (math.atan2(v[0], v[2]), math.asin(np.clip(v[1], -1.0, 1.0)))


def pixel_rays(cam: CameraFrame, yaw_deg: float) -> np.ndarray:
    """(H, W, 3) array of unit world rays through each pixel coordinate.

    Pixel index equals continuous coordinate, so the ray of the pixel at
    (w/2, h/2) is exactly the (yaw, pitch) view direction.
    """
    cx, cy = cam.center
    f = cam.focal_px
    xs = np.arange(cam.width, dtype=float)
    ys = np.arange(cam.height, dtype=float)
    gx, gy = np.meshgrid(xs, ys)
    v = np.stack([(gx - cx) / f, (gy - cy) / f, np.ones_like(gx)], axis=-1)
    r_t = camera_rotation(cam, yaw_deg).T
    world = v @ r_t.T
    return world / np.linalg.norm(world, axis=-1, keepdims=True)


def _bilinear_wrap(pano: np.ndarray, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Bilinear sample with longitude wraparound and latitude clamp."""
    hp, wp = pano.shape[:2]
    x0 = np.floor(fx).astype(int)
    y0 = np.floor(fy).astype(int)
    wx = (fx - x0)[..., None]
    wy = (fy - y0)[..., None]
    x0 = np.mod(x0, wp)
    x1 = np.mod(x0 + 1, wp)
    y0 = np.clip(y0, 0, hp - 1)
    y1 = np.clip(y0 + 1, 0, hp - 1)
    p = pano.astype(float)
    top = (1.0 - wx) * p[y0, x0] + wx * p[y0, x1]
    bot = (1.0 - wx) * p[y1, x0] + wx * p[y1, x1]
    return (1.0 - wy) * top + wy * bot


def rectify_equirect(pano: np.ndarray, cam: CameraFrame, yaw_deg: float) -> np.ndarray:
    """Render the perspective view of an equirectangular panorama, uint8."""
    pano = np.asarray(pano)
    if pano.ndim != 3 or pano.shape[2] != 3:
        raise DataError(f"panorama must be HxWx3, got shape {pano.shape}")
    hp, wp = pano.shape[:2]
    if wp != 2 * hp:
        log.warning("panorama aspect is %dx%d, expected width = 2 x height", wp, hp)
    rays = pixel_rays(cam, yaw_deg)
    lon = np.arctan2(rays[..., 0], rays[..., 2])
    lat = np.arcsin(np.clip(rays[..., 1], -1.0, 1.0))
    fx = np.mod((lon + math.pi) / (2.0 * math.pi) * wp, wp)
    fy = np.clip((lat + math.pi / 2.0) / math.pi * (hp - 1), 0.0, hp - 1.0)
    out = _bilinear_wrap(pano, fx, fy)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# procedural checkerboard cube room


@dataclass(frozen=True)
class CheckerRoom:
    """Axis-aligned cube of half-size `size` around the viewer, walls painted
    with a `cell`-pitch checkerboard whose grid edges are exact Manhattan
    lines (vertical on the walls, horizontal on walls, floor and ceiling)."""

    size: float = 4.0
    cell: float = 1.0

    def __post_init__(self):
        if self.size <= 0 or self.cell <= 0:
            raise ValueError("size and cell must be positive")
        if (2.0 * self.size / self.cell) != round(2.0 * self.size / self.cell):
            raise ValueError("cell must evenly divide the wall extent")

    FACE_BASE = {
        0: (200, 150, 130),  # x walls
        1: (140, 170, 210),  # floor / ceiling
        2: (160, 200, 150),  # z walls
    }

    def ray_colors(self, dirs: np.ndarray) -> np.ndarray:
        """Color of the first wall hit for each unit direction; vectorized."""
        d = np.asarray(dirs, dtype=float)
        eps = 1e-12
        t = self.size / np.maximum(np.abs(d), eps)  # per-axis distance to slab
        axis = np.argmin(t, axis=-1)
        t_hit = np.take_along_axis(t, axis[..., None], axis=-1)
        hit = d * t_hit
        out = np.zeros(d.shape[:-1] + (3,), dtype=float)
        for ax in range(3):
            sel = axis == ax
            if not sel.any():
                continue
            u_ax, v_ax = [a for a in range(3) if a != ax]
            u = hit[..., u_ax][sel]
            v = hit[..., v_ax][sel]
            parity = (
                np.floor(u / self.cell).astype(int) + np.floor(v / self.cell).astype(int)
            ) % 2
            base = np.array(self.FACE_BASE[ax], dtype=float)
            shade = np.where(parity[:, None] == 0, 1.0, 0.45)
            out[sel] = base * shade
        return out

    def panorama(self, height: int = 512) -> np.ndarray:
        """Equirectangular rendering of the room, (height, 2*height, 3) uint8."""
        if height < 2:
            raise ValueError("panorama height must be >= 2")
        wp = 2 * height
        lon = -math.pi + 2.0 * math.pi * np.arange(wp) / wp
        lat = -math.pi / 2.0 + math.pi * np.arange(height) / (height - 1)
        gl, gt = np.meshgrid(lon, lat)
        dirs = np.stack(
            [np.cos(gt) * np.sin(gl), np.sin(gt), np.cos(gt) * np.cos(gl)], axis=-1
        )
        return np.clip(np.rint(self.ray_colors(dirs)), 0, 255).astype(np.uint8)

    def edges(self):
        """All wall-grid edges as ((x,y,z), (x,y,z), axis) world segments.

        axis is the direction letter of the edge: 'y' for verticals, 'x'/'z'
        for horizontals.
        """
        s = self.size
        ticks = np.arange(-s, s + self.cell / 2, self.cell)
        out = []
        for side in (-s, s):
            for k in ticks:
                # walls x = side: verticals along y at z=k, horizontals along z at y=k
                out.append(((side, -s, k), (side, s, k), "y"))
                out.append(((side, k, -s), (side, k, s), "z"))
                # walls z = side
                out.append(((k, -s, side), (k, s, side), "y"))
                out.append(((k, side, -s), (k, side, s), "x"))
                # floor / ceiling y = side
                out.append(((k, side, -s), (k, side, s), "z"))
                out.append(((-s, side, k), (s, side, k), "x"))
        return out


def stripe_panorama(height: int, lon0_deg: float, half_width_deg: float) -> np.ndarray:
    """White vertical great-circle stripe |lon - lon0| < half width on black."""
    wp = 2 * height
    lon = -math.pi + 2.0 * math.pi * np.arange(wp) / wp
    delta = np.angle(np.exp(1j * (lon - math.radians(lon0_deg))))
    col = (np.abs(delta) < math.radians(half_width_deg)).astype(np.uint8) * 255
    pano = np.zeros((height, wp, 3), dtype=np.uint8)
    pano[:, :, :] = col[None, :, None]
    return pano


# ---------------------------------------------------------------------------
# projection of world segments


def project_segment(
    cam: CameraFrame,
    yaw_deg: float,
    p0,
    p1,
    min_depth: float = 1e-3,
    min_px: float = MIN_SEGMENT_PX,
) -> LineSegment | None:
    """Project a 3D world segment to an image segment, or None if invisible.

    The segment is clipped to depth >= min_depth in front of the camera and
    then to the image rectangle; results shorter than min_px are discarded.
    """
    r = camera_rotation(cam, yaw_deg)
    k = intrinsics(cam.focal_px, *cam.center)
    c0 = r @ np.asarray(p0, dtype=float)
    c1 = r @ np.asarray(p1, dtype=float)
    d0, d1 = c0[2], c1[2]
    t_lo, t_hi = 0.0, 1.0
    if d0 < min_depth and d1 < min_depth:
        return None
    if d0 != d1:
        t_cross = (min_depth - d0) / (d1 - d0)
        if d0 < min_depth:
            t_lo = t_cross
        elif d1 < min_depth:
            t_hi = t_cross
    a = k @ (c0 + t_lo * (c1 - c0))
    b = k @ (c0 + t_hi * (c1 - c0))
    pa = a[:2] / a[2]
    pb = b[:2] / b[2]
    clipped = _clip_to_rect(pa, pb, cam.width, cam.height)
    if clipped is None:
        return None
    qa, qb = clipped
    if math.hypot(qb[0] - qa[0], qb[1] - qa[1]) < min_px:
        return None
    return LineSegment(tuple(qa), tuple(qb))


def _clip_to_rect(p0, p1, width, height):
    """Liang-Barsky clip of a 2D segment to [0, width] x [0, height]."""
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, x0 - 0.0),
        (dx, width - x0),
        (-dy, y0 - 0.0),
        (dy, height - y0),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        t = q / p
        if p < 0.0:
            if t > t1:
                return None
            t0 = max(t0, t)
        else:
            if t < t0:
                return None
            t1 = min(t1, t)
    if t0 >= t1:
        return None
    return (
        (x0 + t0 * dx, y0 + t0 * dy),
        (x0 + t1 * dx, y0 + t1 * dy),
    )


_AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}


def manhattan_segments(
    cam: CameraFrame,
    yaw_deg: float,
    rng: np.random.Generator,
    n_segments: int,
    axis_weights=(0.38, 0.24, 0.38),
    max_tries: int = 20000,
):
    """Noiseless axis-aligned 3D segments projected fully inside the image.

    Returns (segments, axes) where axes[i] in 'xyz' names the world direction
    of segments[i]. Segments float freely in front of the camera; both
    endpoints must project inside the frame, so the produced scene is clean
    Manhattan structure with all three directions represented by default.
    """
    r = camera_rotation(cam, yaw_deg)
    forward = r.T @ np.array([0.0, 0.0, 1.0])
    segments = []
    axes = []
    tries = 0
    while len(segments) < n_segments and tries < max_tries:
        tries += 1
        axis = "xyz"[int(rng.choice(3, p=np.asarray(axis_weights) / sum(axis_weights)))]
        dist = rng.uniform(4.0, 12.0)
        center = forward * dist + rng.uniform(-3.5, 3.5, size=3)
        half = rng.uniform(0.3, 1.4)
        p0 = center - half * _AXES[axis]
        p1 = center + half * _AXES[axis]
        seg = _project_inside(cam, yaw_deg, r, p0, p1)
        if seg is not None:
            segments.append(seg)
            axes.append(axis)
    if len(segments) < n_segments:
        raise DataError(
            f"could not place {n_segments} segments in view (got {len(segments)})"
        )
    return segments, axes


def _project_inside(cam, yaw_deg, r, p0, p1, min_depth=0.25):
    k = intrinsics(cam.focal_px, *cam.center)
    c0, c1 = r @ p0, r @ p1
    if c0[2] < min_depth or c1[2] < min_depth:
        return None
    a = k @ c0
    b = k @ c1
    pa = a[:2] / a[2]
    pb = b[:2] / b[2]
    for p in (pa, pb):
        if not (0.0 <= p[0] < cam.width and 0.0 <= p[1] < cam.height):
            return None
    if math.hypot(*(pb - pa)) < MIN_SEGMENT_PX:
        return None
    return LineSegment(tuple(pa), tuple(pb))


def room_segments(
    cam: CameraFrame, yaw_deg: float, room: CheckerRoom | None = None
):
    """Project the room's grid edges into the view. Returns (segments, axes)."""
    room = room or CheckerRoom()
    segments = []
    axes = []
    for p0, p1, axis in room.edges():
        seg = project_segment(cam, yaw_deg, p0, p1)
        if seg is not None:
            segments.append(seg)
            axes.append(axis)
    return segments, axes


# ---------------------------------------------------------------------------
# line-segment files (plain-text detector output: x1 y1 x2 y2 [extras])


def parse_lsd(text: str, origin: str = "<string>"):
    """Parse whitespace-separated segment rows.

    Rows need at least 4 float columns (x1 y1 x2 y2); extra columns such as
    width/precision/NFA are ignored. Returns (segments, n_dropped) where
    dropped counts zero-length rows. Unparsable rows raise DataError with
    the row number.
    """
    segments = []
    dropped = 0
    for ln, raw in enumerate(text.splitlines(), start=1):
        row = raw.strip()
        if not row or row.startswith("#"):
            continue
        parts = row.split()
        if len(parts) < 4:
            raise DataError(f"{origin}:{ln}: expected at least 4 columns, got {len(parts)}")
        try:
            x1, y1, x2, y2 = (float(p) for p in parts[:4])
        except ValueError as exc:
            raise DataError(f"{origin}:{ln}: non-numeric coordinate in {row!r}") from exc
        if not all(math.isfinite(v) for v in (x1, y1, x2, y2)):
            raise DataError(f"{origin}:{ln}: non-finite coordinate in {row!r}")
        if (x1, y1) == (x2, y2):
            dropped += 1
            continue
        segments.append(LineSegment((x1, y1), (x2, y2)))
    return segments, dropped


def ingest_lsd(path):
    """Read a detector output file; logs a warning counting dropped rows."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read segment file {path}: {exc}") from exc
    segments, dropped = parse_lsd(text, origin=str(path))
    if dropped:
        log.warning("%s: dropped %d zero-length segment(s)", path, dropped)
    return segments


def write_lsd(path, segments) -> None:
    """Plain `x1 y1 x2 y2` rows, byte-deterministic float formatting."""
    rows = [
        f"{s.p0[0]!r} {s.p0[1]!r} {s.p1[0]!r} {s.p1[1]!r}" for s in segments
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(rows) + ("\n" if rows else ""))


def sample_lines(segments, max_n: int = MAX_SEGMENTS, seed=0):
    """At most max_n segments: all of them when they fit, otherwise a uniform
    draw without replacement, input order preserved. Deterministic per seed."""
    if max_n <= 0:
        raise ValueError(f"max_n must be positive, got {max_n}")
    if len(segments) <= max_n:
        return list(segments)
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(segments), size=max_n, replace=False))
    return [segments[i] for i in keep]
