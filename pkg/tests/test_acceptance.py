"""End-to-end acceptance checks for the toolkit.

Each test exercises one headline guarantee at its stated tolerance and prints
a single summary line so the acceptance run reads as a checklist.
"""
import json
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from horizonbench.cli import main
from horizonbench.errors import InsufficientStructureError
from horizonbench.geometry import (
    CanonicalFrame,
    HomLine,
    HomPoint,
    calib_to_camera,
    camera_to_calib,
    intrinsics,
    intrinsics_inv,
    line_from_endpoints,
    point_line_distance,
)
from horizonbench.labeling import (
    LineLabel,
    Thresholds,
    filter_horizon_candidates,
    label_line,
    pseudo_vp_pipeline,
    select_pseudo_vps,
    vp_candidates,
)
from horizonbench.manifest import read_manifest
from horizonbench.metrics import auc_cumulative, loss_bce, loss_horizon
from horizonbench.report import read_report_csv
from horizonbench.synth import (
    PROFILES,
    SampleRanges,
    camera_rotation,
    manhattan_segments,
    sample_camera,
)

SIZE = 512


def _pass(name, detail=""):
    suffix = f" ({detail})" if detail else ""
    print(f"[acceptance] {name}: PASS{suffix}")


# ---------------------------------------------------------------------------
# camera round trip


def test_round_trip_10k_cameras_under_5s():
    n = 10_000
    profiles = (PROFILES["gsv"], PROFILES["sun360"])
    worst = 0.0
    start = time.perf_counter()
    for i in range(n):
        cam = sample_camera(profiles[i % 2], 100_000 + i, SIZE, SIZE)
        back = calib_to_camera(camera_to_calib(cam))
        worst = max(
            worst,
            abs(back.pitch_deg - cam.pitch_deg),
            abs(back.roll_deg - cam.roll_deg),
            abs(back.fov_deg - cam.fov_deg),
        )
    elapsed = time.perf_counter() - start
    assert worst <= 1e-6
    assert elapsed < 5.0
    _pass("camera round trip", f"10,000 cameras, worst {worst:.2e} deg, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# join incidence and distance scale-invariance


def test_incidence_and_scale_invariance_10k():
    rng = np.random.default_rng(515151)
    worst_inc = 0.0
    worst_scale = 0.0
    for _ in range(10_000):
        p0 = rng.uniform(-1000.0, 1000.0, size=2)
        p1 = rng.uniform(-1000.0, 1000.0, size=2)
        line = line_from_endpoints(p0, p1)
        for p in (p0, p1):
            v = HomPoint((p[0], p[1], 1.0))
            worst_inc = max(worst_inc, point_line_distance(line, v))
        v = HomPoint(rng.uniform(-10.0, 10.0, size=3))
        d0 = point_line_distance(line, v)
        lam, mu = rng.uniform(1e-3, 1e3, size=2) * rng.choice([-1.0, 1.0], size=2)
        d1 = point_line_distance(HomLine(lam * line.coords), HomPoint(mu * v.coords))
        worst_scale = max(worst_scale, abs(d1 - d0))
    assert worst_inc <= 1e-9
    assert worst_scale <= 1e-9
    _pass(
        "incidence / scale invariance",
        f"10,000 inputs, worst {max(worst_inc, worst_scale):.2e}",
    )


# ---------------------------------------------------------------------------
# pseudo-VP recovery on procedural Manhattan scenes

RECOVERY_RANGES = SampleRanges((40.0, 80.0), (-30.0, 40.0), (-20.0, 20.0))


def _ray_angle_deg(cam, v_px, true_dir):
    kinv = intrinsics_inv(cam.focal_px, *cam.center)
    r = kinv @ np.asarray(v_px.coords, dtype=float)
    r = r / np.linalg.norm(r)
    t = np.asarray(true_dir, dtype=float)
    t = t / np.linalg.norm(t)
    return math.degrees(math.acos(min(1.0, abs(float(r @ t)))))


def _clean_manhattan_scene(rng, n_lo, n_hi, delta):
    """Horizontal-dominant Manhattan scene with unambiguous pencils.

    Rejects scenes where any line sits within twice the consensus gate of
    the other axis's vanishing point, and scenes whose vertical mass rivals
    a horizontal axis, so that recovery failures indicate implementation
    bugs rather than scene ambiguity.
    """
    while True:
        cam = sample_camera(RECOVERY_RANGES, rng, SIZE, SIZE)
        yaw = float(rng.uniform(0.0, 360.0))
        n = int(rng.integers(n_lo, n_hi + 1))
        segs, axes = manhattan_segments(
            cam, yaw, rng, n, axis_weights=(0.42, 0.16, 0.42))
        if axes.count("x") < 4 or axes.count("z") < 4:
            continue
        frame = CanonicalFrame.for_image(SIZE, SIZE)
        rmat = camera_rotation(cam, yaw)
        k = intrinsics(cam.focal_px, *cam.center)
        vpx = frame.point_to(HomPoint(k @ rmat @ np.array([1.0, 0.0, 0.0])))
        vpz = frame.point_to(HomPoint(k @ rmat @ np.array([0.0, 0.0, 1.0])))
        segs_c = [frame.segment_to(s) for s in segs]
        mass = {"x": 0.0, "y": 0.0, "z": 0.0}
        ambiguous = False
        for s, ax in zip(segs_c, axes):
            mass[ax] += s.length
            others = {"x": (vpz,), "z": (vpx,), "y": (vpx, vpz)}[ax]
            if any(point_line_distance(s.line, v) < 2.0 * delta for v in others):
                ambiguous = True
                break
        if ambiguous or min(mass["x"], mass["z"]) <= 1.2 * mass["y"]:
            continue
        return cam, yaw, segs_c, frame, rmat


def test_pseudo_vp_recovery_100_scenes():
    rng = np.random.default_rng(4100)
    t = Thresholds()
    recovered = 0
    worst = 0.0
    for i in range(100):
        cam, yaw, segs_c, frame, rmat = _clean_manhattan_scene(rng, 20, 60, t.delta)
        calib = camera_to_calib(cam)
        h_c = frame.line_to(calib.horizon)
        try:
            vps = pseudo_vp_pipeline(segs_c, h_c, count=2000, seed=i, t=t)
        except InsufficientStructureError:
            continue
        if vps.v1 is None:
            continue
        dx = rmat @ np.array([1.0, 0.0, 0.0])
        dz = rmat @ np.array([0.0, 0.0, 1.0])
        v0 = frame.point_from(vps.v0)
        v1 = frame.point_from(vps.v1)
        a = max(_ray_angle_deg(cam, v0, dx), _ray_angle_deg(cam, v1, dz))
        b = max(_ray_angle_deg(cam, v0, dz), _ray_angle_deg(cam, v1, dx))
        err = min(a, b)
        if err < 1.0:
            recovered += 1
            worst = max(worst, err)
    assert recovered >= 99
    _pass(
        "pseudo-VP recovery",
        f"{recovered}/100 scenes within 1 deg, worst hit {worst:.2e} deg",
    )


def _greedy_oracle(cands, segs, delta):
    """Pure-python two-round greedy, lowest index on ties, disjoint supports."""
    def unit3(v):
        nrm = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        return (v[0] / nrm, v[1] / nrm, v[2] / nrm)

    lines = [unit3(tuple(float(x) for x in s.line.coords)) for s in segs]
    cu = [unit3(tuple(float(x) for x in c.coords)) for c in cands]
    lengths = [s.length for s in segs]
    inl = [
        [abs(l[0] * c[0] + l[1] * c[1] + l[2] * c[2]) < delta for c in cu]
        for l in lines
    ]
    m = len(cu)
    n = len(segs)
    masses0 = [sum(lengths[i] for i in range(n) if inl[i][j]) for j in range(m)]
    i0 = masses0.index(max(masses0))
    sup0 = tuple(i for i in range(n) if inl[i][i0])
    rem = [i for i in range(n) if i not in sup0]
    masses1 = [sum(lengths[i] for i in rem if inl[i][j]) for j in range(m)]
    i1 = masses1.index(max(masses1))
    if masses1[i1] <= 0.0:
        return i0, sup0, masses0[i0], None, None, None
    sup1 = tuple(i for i in rem if inl[i][i1])
    return i0, sup0, masses0[i0], i1, sup1, masses1[i1]


def test_greedy_selection_matches_bruteforce_oracle():
    rng = np.random.default_rng(8100)
    t = Thresholds()
    compared = 0
    partials = 0
    for i in range(25):
        while True:
            cam = sample_camera(RECOVERY_RANGES, rng, SIZE, SIZE)
            yaw = float(rng.uniform(0.0, 360.0))
            n = int(rng.integers(6, 13))
            segs, axes = manhattan_segments(
                cam, yaw, rng, n, axis_weights=(0.42, 0.16, 0.42))
            if axes.count("x") < 2 or axes.count("z") < 2:
                continue
            calib = camera_to_calib(cam)
            frame = CanonicalFrame.for_image(SIZE, SIZE)
            segs_c = [frame.segment_to(s) for s in segs]
            h_c = frame.line_to(calib.horizon)
            cands = vp_candidates(segs_c, count=30, seed=2000 + i)
            near = filter_horizon_candidates(cands, h_c, t.delta)
            if len(near) >= 2:
                break
        o0, os0, om0, o1, os1, om1 = _greedy_oracle(near, segs_c, t.delta)
        try:
            got = select_pseudo_vps(near, segs_c, t.delta)
        except InsufficientStructureError as err:
            partials += 1
            assert o1 is None
            assert err.partial is not None
            assert err.partial.v0 is near[o0]
            assert err.partial.support0 == os0
            continue
        assert got.v0 is near[o0]
        assert got.support0 == os0
        assert got.mass0 == pytest.approx(om0, rel=1e-12)
        assert o1 is not None
        assert got.v1 is near[o1]
        assert got.support1 == os1
        assert got.mass1 == pytest.approx(om1, rel=1e-12)
        compared += 1
    _pass(
        "greedy vs brute force",
        f"{compared} full + {partials} partial scenes identical",
    )


# ---------------------------------------------------------------------------
# ternary labeling against direct re-evaluation

T = Thresholds()


def _label_oracle(d, t):
    if d <= t.delta0:
        return LineLabel.CONVERGENT
    if d >= t.delta1:
        return LineLabel.NON_CONVERGENT
    return LineLabel.IGNORE


def test_labeling_matches_reevaluation():
    v = HomPoint((1.0, 0.0, 0.0))
    checked = 0
    # swept grid of distances through both bands
    for d in np.linspace(0.0, 0.15, 601):
        line = HomLine((float(d), math.sqrt(1.0 - float(d) ** 2), 0.0))
        got = label_line(line, v, T)
        assert got is _label_oracle(point_line_distance(line, v), T)
        checked += 1
    # random lines and points
    rng = np.random.default_rng(424242)
    for _ in range(2000):
        line = HomLine(rng.uniform(-5.0, 5.0, size=3))
        point = HomPoint(rng.uniform(-5.0, 5.0, size=3))
        got = label_line(line, point, T)
        assert got is _label_oracle(point_line_distance(line, point), T)
        checked += 1
    # exact-threshold floats under the boundary rule
    for target, want in ((T.delta0, LineLabel.CONVERGENT),
                         (T.delta1, LineLabel.NON_CONVERGENT)):
        line, point = _exact_distance_pair(target)
        assert point_line_distance(line, point) == target
        assert label_line(line, point, T) is want
        checked += 1
    inside0 = float(np.nextafter(T.delta0, 1.0))
    line = HomLine((inside0, math.sqrt(1.0 - inside0 ** 2), 0.0))
    if point_line_distance(line, v) > T.delta0:
        assert label_line(line, v, T) is LineLabel.IGNORE
        checked += 1
    _pass("labeling re-evaluation", f"{checked} distances incl. exact thresholds")


def _exact_distance_pair(target):
    """Search ulp-neighbors for a line whose computed distance to (1, 0, 0)
    equals the target float exactly."""
    v = HomPoint((1.0, 0.0, 0.0))
    c = math.sqrt(1.0 - target * target)
    for k in range(-200, 201):
        ck = c
        for _ in range(abs(k)):
            ck = np.nextafter(ck, 2.0 if k > 0 else 0.0)
        line = HomLine((target, float(ck), 0.0))
        if point_line_distance(line, v) == target:
            return line, v
    raise AssertionError(f"no ulp neighbor reproduces {target} exactly")


# ---------------------------------------------------------------------------
# loss golden values


def test_loss_golden_values():
    bce_a = loss_bce([1, 0], [0.5, 0.5]).value
    assert bce_a == pytest.approx(0.693147, abs=1e-6)
    bce_b = loss_bce([1, 0, -1], [0.9, 0.2, 0.99]).value
    assert bce_b == pytest.approx(0.164252, abs=1e-6)

    flat = HomLine((0.0, 1.0, -256.0))
    shifted = HomLine((0.0, 1.0, -246.0))
    assert loss_horizon(flat, shifted, SIZE) == pytest.approx(10.0, abs=1e-6)
    tilted = HomLine((0.02, -1.0, 250.88))
    assert loss_horizon(flat, tilted, SIZE) == pytest.approx(5.12, abs=1e-6)

    assert auc_cumulative([0.125], x_max=0.25) == pytest.approx(50.0, abs=1e-6)
    _pass("loss goldens", "bce 0.693147 / 0.164252, horizon 10 / 5.12, auc 50")


# ---------------------------------------------------------------------------
# AUC integration vs exact rational oracle


def test_auc_monotonicity_and_exact_integration_1000():
    rng = np.random.default_rng(606060)
    x_max = 0.25
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        errs = [float(x) for x in rng.uniform(0.0, 0.5, size=n)]
        exact = (
            sum(max(Fraction(0), Fraction(x_max) - Fraction(e)) for e in errs)
            / (n * Fraction(x_max))
            * 100
        )
        got = auc_cumulative(errs, x_max=x_max)
        assert got == pytest.approx(float(exact), abs=1e-9)
        improved = [e * float(rng.uniform(0.0, 1.0)) for e in errs]
        assert auc_cumulative(improved, x_max=x_max) >= got
    _pass("auc integration", "1,000 lists vs rational oracle, monotone")


# ---------------------------------------------------------------------------
# end-to-end determinism and the perfect-prediction fixture


def _run(*argv):
    return main([str(a) for a in argv])


def _echo_predictions(manifest_path, pred_path):
    header, records = read_manifest(manifest_path)
    rows = [{"kind": "predictions", "manifest_sha256": header["config_sha256"]}]
    for rec in records:
        rows.append(
            {
                "index": rec.index,
                "fov_deg": rec.calib.fov_deg,
                "zenith": [float(x) for x in rec.calib.zenith.coords],
                "horizon": [float(x) for x in rec.calib.horizon.coords],
            }
        )
    with open(pred_path, "w") as fh:
        for obj in rows:
            fh.write(json.dumps(obj) + "\n")


def test_cli_chain_is_deterministic_across_runs_and_workers(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def chain(root, workers):
        monkeypatch.setenv("HORIZONBENCH_WORKERS", str(workers))
        os.makedirs(root, exist_ok=True)
        assert _run("synth", "--out", f"{root}/syn", "--count", 3, "--seed", 5,
                    "--size", 128, "--pano-height", 256) == 0
        assert _run("label", "--manifest", f"{root}/syn/manifest.jsonl",
                    "--out", f"{root}/lab") == 0
        _echo_predictions(f"{root}/syn/manifest.jsonl", f"{root}/pred.jsonl")
        assert _run("eval", "--manifest", f"{root}/syn/manifest.jsonl",
                    "--predictions", f"{root}/pred.jsonl",
                    "--out", f"{root}/evl") == 0

    chain("runA", workers=1)
    chain("runB", workers=1)
    chain("runC", workers=8)
    compared = 0
    paths = [
        "syn/manifest.jsonl",
        "lab/manifest.jsonl",
        "evl/report.csv",
        "evl/report.json",
    ]
    for i in range(3):
        paths.append(f"lab/lines_sampled/{i:06d}.txt")
        paths.append(f"lab/labels/{i:06d}.txt")
        paths.append(f"lab/pseudo_vps/{i:06d}.json")
    for rel in paths:
        a = (tmp_path / "runA" / rel).read_bytes()
        b = (tmp_path / "runB" / rel).read_bytes()
        c = (tmp_path / "runC" / rel).read_bytes()
        assert a == b, rel
        assert a == c, rel
        compared += 1
    _pass("pipeline determinism", f"{compared} artifacts byte-identical, workers 1 vs 8")


def test_perfect_predictions_score_zero_error_and_full_auc(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("HORIZONBENCH_WORKERS", raising=False)
    syn = tmp_path / "syn"
    assert _run("synth", "--out", syn, "--count", 2, "--seed", 5,
                "--size", 128, "--pano-height", 256) == 0
    pred = tmp_path / "pred.jsonl"
    _echo_predictions(syn / "manifest.jsonl", pred)
    evl = tmp_path / "evl"
    assert _run("eval", "--manifest", syn / "manifest.jsonl",
                "--predictions", pred, "--out", evl) == 0
    out = capsys.readouterr().out
    assert "AUC 100.00%" in out
    rep = read_report_csv(evl / "report.csv")
    for name in ("up_err_deg", "pitch_err_deg", "roll_err_deg", "fov_err_deg",
                 "horizon_err_px", "horizon_err"):
        assert rep.column(name).tolist() == [0.0, 0.0]
    agg = json.loads((evl / "report.json").read_text())["aggregates"]
    assert agg["auc_percent"] == 100.0
    _pass("perfect predictions", "all error columns 0.0, AUC 100.00%")
