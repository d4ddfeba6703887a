"""Convergence labels and pseudo horizontal vanishing points.

A line segment gets a ternary label against a vanishing point from the
cosine-style incidence measure d: 1 (convergent) when d <= delta0,
0 (non-convergent) when d >= delta1, and -1 (ignore) in between. Horizontal
VPs are picked greedily by length-weighted consensus from randomly sampled
pairwise intersections, restricted to candidates near the horizon.

All distances here are computed on whatever coordinates the caller passes;
the intended frame for image data is CanonicalFrame (see geometry). The
pipeline helpers at the bottom handle that transform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import DataError, InsufficientStructureError, NoCandidatesError
from .geometry import (
    CanonicalFrame,
    HomLine,
    HomPoint,
    LineSegment,
    canonical_unit,
    point_line_distance,
)

# unit-cross norm below this means the two lines are near-coincident
NEAR_PARALLEL_EPS = 1e-8

DEFAULT_CANDIDATE_COUNT = 2000


class LineLabel(IntEnum):
    CONVERGENT = 1
    NON_CONVERGENT = 0
    IGNORE = -1


@dataclass(frozen=True)
class Thresholds:
    """Label and consensus gates; defaults are sines of 2, 5 and 2.5 degrees."""

    delta0: float = math.sin(math.radians(2.0))
    delta1: float = math.sin(math.radians(5.0))
    delta: float = math.sin(math.radians(2.5))

    def __post_init__(self):
        if not (0.0 < self.delta0 < self.delta < self.delta1 < 1.0):
            raise ValueError(
                f"need 0 < delta0 < delta < delta1 < 1, got "
                f"({self.delta0}, {self.delta}, {self.delta1})"
            )


@dataclass(frozen=True)
class LabelSet:
    """Per-segment ternary labels: cz against the zenith, ch against the
    better of the two pseudo horizontal VPs."""

    cz: tuple
    ch: tuple

    def __post_init__(self):
        if len(self.cz) != len(self.ch):
            raise ValueError("cz and ch must have equal length")
        object.__setattr__(self, "cz", tuple(LineLabel(v) for v in self.cz))
        object.__setattr__(self, "ch", tuple(LineLabel(v) for v in self.ch))

    def __len__(self) -> int:
        return len(self.cz)


@dataclass(frozen=True)
class PseudoVPs:
    """Greedy consensus result. support* hold indices into the segment list
    (disjoint by construction); v1 is None when only one VP was recovered."""

    v0: HomPoint | None
    support0: tuple
    v1: HomPoint | None = None
    support1: tuple = ()
    mass0: float = 0.0
    mass1: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "support0", tuple(int(i) for i in self.support0))
        object.__setattr__(self, "support1", tuple(int(i) for i in self.support1))


def label_line(l, v, t: Thresholds) -> LineLabel:
    """Ternary convergence label of line l against vanishing point v."""
    d = point_line_distance(l, v)
    if d <= t.delta0:
        return LineLabel.CONVERGENT
    if d >= t.delta1:
        return LineLabel.NON_CONVERGENT
    return LineLabel.IGNORE


def label_set(lines, zenith, v0, v1, t: Thresholds) -> LabelSet:
    """Labels for a list of lines: cz against zenith, ch as the numeric max
    of the labels against v0 and v1 (max(-1, 0) = 0: a clear miss beats an
    ambiguous one). Pass v1=None to label against v0 alone."""
    cz = []
    ch = []
    for l in lines:
        cz.append(label_line(l, zenith, t))
        c0 = label_line(l, v0, t)
        if v1 is not None:
            ch.append(LineLabel(max(int(c0), int(label_line(l, v1, t)))))
        else:
            ch.append(c0)
    return LabelSet(tuple(cz), tuple(ch))


def _unit_lines(segments) -> np.ndarray:
    return np.stack([canonical_unit(s.line.coords) for s in segments])


def vp_candidates(
    segments,
    count: int = DEFAULT_CANDIDATE_COUNT,
    seed: int = 0,
    replace: bool = True,
) -> list:
    """VP candidates: cross products of uniformly sampled segment-line pairs.

    Pairs whose unit lines are near-coincident (cross norm < 1e-8) are
    excluded up front, which is equivalent to skip-and-resample but cannot
    stall. Deterministic for a given seed. ``replace=False`` draws distinct
    pairs instead (count must not exceed the number of usable pairs).
    """
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    n = len(segments)
    if n < 2:
        raise NoCandidatesError(f"need at least 2 segments, got {n}")
    units = _unit_lines(segments)
    ia, ib = np.triu_indices(n, k=1)
    crosses = np.cross(units[ia], units[ib])
    norms = np.linalg.norm(crosses, axis=1)
    usable = norms >= NEAR_PARALLEL_EPS
    if not usable.any():
        raise NoCandidatesError("all segment pairs are near-coincident")
    crosses = crosses[usable]
    rng = np.random.default_rng(seed)
    if replace:
        picks = rng.integers(0, len(crosses), size=count)
    else:
        if count > len(crosses):
            raise ValueError(
                f"count={count} exceeds {len(crosses)} usable pairs with replace=False"
            )
        picks = rng.choice(len(crosses), size=count, replace=False)
    return [HomPoint(crosses[i]) for i in picks]


def filter_horizon_candidates(candidates, horizon, delta: float) -> list:
    """Keep candidates with d(horizon, v) < delta, preserving order."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    return [v for v in candidates if point_line_distance(horizon, v) < delta]


def consensus_mass(v, segments, delta: float):
    """Length-weighted support of candidate v: indices of segments whose line
    passes within delta of v, and the sum of their lengths."""
    support = []
    mass = 0.0
    for i, s in enumerate(segments):
        if point_line_distance(s.line, v) < delta:
            support.append(i)
            mass += s.length
    return mass, tuple(support)


def select_pseudo_vps(candidates, segments, delta: float) -> PseudoVPs:
    """Two-round greedy: v0 takes the largest mass, its supporting segments
    are removed, v1 takes the largest remaining mass. Ties break to the
    lowest candidate index. Raises InsufficientStructureError (carrying the
    partial result) when fewer than two candidates exist or the second round
    finds no support."""
    m = len(candidates)
    if m == 0:
        raise InsufficientStructureError(
            "no candidates survived filtering", partial=PseudoVPs(None, ())
        )
    units = np.stack([seg.line.coords for seg in segments]) if segments else np.zeros((0, 3))
    if len(segments):
        units = units / np.linalg.norm(units, axis=1, keepdims=True)
    lengths = np.array([seg.length for seg in segments])
    cand = np.stack([c.coords for c in candidates])
    cand = cand / np.linalg.norm(cand, axis=1, keepdims=True)
    # distances: |L . V^T|, segments x candidates
    dist = np.abs(units @ cand.T) if len(segments) else np.zeros((0, m))
    inlier = dist < delta

    # column-wise reduction instead of a matmul: matmul rounding depends on
    # the column's lane position, which can split exact ties between
    # duplicate candidates by one ulp and defeat the lowest-index tie rule
    masses0 = (lengths[:, None] * inlier).sum(axis=0) if len(segments) else np.zeros(m)
    i0 = int(np.argmax(masses0))
    support0 = tuple(int(i) for i in np.flatnonzero(inlier[:, i0]))
    v0 = candidates[i0]
    mass0 = float(masses0[i0])

    if m < 2:
        raise InsufficientStructureError(
            "fewer than 2 candidates survived filtering",
            partial=PseudoVPs(v0, support0, mass0=mass0),
        )

    remaining = np.ones(len(segments), dtype=bool)
    remaining[list(support0)] = False
    masses1 = (
        ((lengths * remaining)[:, None] * inlier).sum(axis=0)
        if len(segments)
        else np.zeros(m)
    )
    i1 = int(np.argmax(masses1))
    if masses1[i1] <= 0.0:
        raise InsufficientStructureError(
            "no support for a second vanishing point",
            partial=PseudoVPs(v0, support0, mass0=mass0),
        )
    support1 = tuple(
        int(i) for i in np.flatnonzero(inlier[:, i1] & remaining)
    )
    return PseudoVPs(
        v0, support0, candidates[i1], support1, mass0=mass0, mass1=float(masses1[i1])
    )


def pseudo_vp_pipeline(
    segments,
    horizon,
    count: int = DEFAULT_CANDIDATE_COUNT,
    seed: int = 0,
    t: Thresholds | None = None,
) -> PseudoVPs:
    """Candidates -> horizon filter -> greedy consensus, all at threshold
    t.delta. Operates on the coordinates as given; see label_image for the
    wrapper that moves image data into the canonical frame first."""
    t = t or Thresholds()
    cands = vp_candidates(segments, count=count, seed=seed)
    near = filter_horizon_candidates(cands, horizon, t.delta)
    if not near:
        raise InsufficientStructureError(
            "no candidates near the horizon", partial=PseudoVPs(None, ())
        )
    return select_pseudo_vps(near, segments, t.delta)


@dataclass(frozen=True)
class ImageLabels:
    """Labeling result for one image, VPs reported in pixel coordinates."""

    labels: LabelSet
    vps: PseudoVPs
    partial: bool = False


def label_image(
    segments,
    zenith,
    horizon,
    width: int,
    height: int,
    count: int = DEFAULT_CANDIDATE_COUNT,
    seed: int = 0,
    t: Thresholds | None = None,
) -> ImageLabels:
    """Full labeling for one image given pixel-frame inputs.

    Transforms segments, zenith and horizon into the canonical frame, runs
    the pseudo-VP pipeline and the ternary labeling there, then maps the VPs
    back to pixel coordinates. A failed second round degrades to single-VP
    ch labels and flags the result partial; other degeneracies propagate.
    """
    t = t or Thresholds()
    frame = CanonicalFrame.for_image(width, height)
    segs_c = [frame.segment_to(s) for s in segments]
    z_c = frame.point_to(zenith)
    h_c = frame.line_to(horizon)
    partial = False
    try:
        vps = pseudo_vp_pipeline(segs_c, h_c, count=count, seed=seed, t=t)
    except InsufficientStructureError as err:
        if err.partial is None or err.partial.v0 is None:
            raise
        vps = err.partial
        partial = True
    lines_c = [s.line for s in segs_c]
    labels = label_set(lines_c, z_c, vps.v0, vps.v1, t)
    vps_px = PseudoVPs(
        frame.point_from(vps.v0) if vps.v0 is not None else None,
        vps.support0,
        frame.point_from(vps.v1) if vps.v1 is not None else None,
        vps.support1,
        mass0=vps.mass0,
        mass1=vps.mass1,
    )
    return ImageLabels(labels, vps_px, partial)


def write_labels(path, labels: LabelSet, config_sha256: str | None = None) -> None:
    """Text format: one `index cz ch` row per segment; `#` lines are comments."""
    rows = []
    if config_sha256:
        rows.append(f"# config_sha256={config_sha256}")
    for i, (a, b) in enumerate(zip(labels.cz, labels.ch)):
        rows.append(f"{i} {int(a)} {int(b)}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(rows) + "\n")


def read_labels(path) -> LabelSet:
    cz, ch = [], []
    with open(path, "r", encoding="ascii") as fh:
        for ln, raw in enumerate(fh, start=1):
            row = raw.strip()
            if not row or row.startswith("#"):
                continue
            parts = row.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{ln}: expected 'index cz ch', got {row!r}")
            try:
                idx, a, b = (int(p) for p in parts)
            except ValueError as exc:
                raise DataError(f"{path}:{ln}: non-integer field in {row!r}") from exc
            if idx != len(cz):
                raise DataError(f"{path}:{ln}: index {idx} out of order")
            if a not in (-1, 0, 1) or b not in (-1, 0, 1):
                raise DataError(f"{path}:{ln}: labels must be in {{-1,0,1}}")
            cz.append(a)
            ch.append(b)
    return LabelSet(tuple(cz), tuple(ch))


def _vp_json(v: HomPoint | None):
    return None if v is None else [float(x) for x in v.unit()]


def pseudo_vps_to_json(vps: PseudoVPs, config_sha256: str | None = None) -> str:
    """Canonical JSON, pixel-frame coordinates unit-normalized with a fixed
    sign rule, so identical results serialize to identical bytes."""
    obj = {
        "kind": "pseudo_vps",
        "frame": "pixel",
        "v0": _vp_json(vps.v0),
        "support0": list(vps.support0),
        "v1": _vp_json(vps.v1),
        "support1": list(vps.support1),
        "mass0": float(vps.mass0),
        "mass1": float(vps.mass1),
    }
    if config_sha256:
        obj["config_sha256"] = config_sha256
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def pseudo_vps_from_json(text: str) -> PseudoVPs:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"bad pseudo-VP JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("kind") != "pseudo_vps":
        raise DataError("not a pseudo_vps document")
    v0 = obj.get("v0")
    v1 = obj.get("v1")
    return PseudoVPs(
        HomPoint(np.asarray(v0, dtype=float)) if v0 is not None else None,
        tuple(obj.get("support0", ())),
        HomPoint(np.asarray(v1, dtype=float)) if v1 is not None else None,
        tuple(obj.get("support1", ())),
        mass0=float(obj.get("mass0", 0.0)),
        mass1=float(obj.get("mass1", 0.0)),
    )
