"""Command-line interface: synth, label, eval, report.

Exit codes: 0 success, 2 configuration error (bad flags, unknown profile,
mismatched input pairing), 3 data error (unreadable or malformed inputs),
4 geometry degeneracy. Record-level failures are collected into
<out>/errors.log and the worst category decides the exit code (geometry
outranks data). Record processing is parallel over a bounded thread pool
(HORIZONBENCH_WORKERS, default min(4, cpus)); outputs are ordered by record
index, so results do not depend on the worker count.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from PIL import Image

from . import __version__
from .errors import (
    ConfigError,
    DataError,
    GeometryDegeneracyError,
    ToolkitError,
)
from .geometry import CalibGT, CameraFrame, HomLine, HomPoint, camera_to_calib
from .labeling import (
    DEFAULT_CANDIDATE_COUNT,
    Thresholds,
    label_image,
    pseudo_vps_to_json,
    write_labels,
)
from .manifest import (
    SceneRecord,
    atomic_write_bytes,
    atomic_write_text,
    config_hash,
    read_manifest,
    write_manifest,
)
from .metrics import (
    DEFAULT_AUC_XMAX,
    angle_errors,
    horizon_error,
    loss_horizon,
)
from .report import (
    EvalReport,
    EvalRow,
    read_report_csv,
    write_curve_csv,
    write_curve_svg,
    write_report_csv,
    write_report_json,
)
from .synth import (
    MAX_SEGMENTS,
    OUTPUT_SIZE,
    PROFILES,
    CheckerRoom,
    camera_rotation,  # noqa: F401  (re-exported for scripting convenience)
    ingest_lsd,
    rectify_equirect,
    room_segments,
    sample_camera,
    sample_lines,
    write_lsd,
)

WORKERS_ENV = "HORIZONBENCH_WORKERS"

BUILTIN_PANORAMA = "builtin:checker-room"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def map_indexed(fn, items):
    """Run fn(i, item) over a thread pool; results ordered by index.

    Returns (results, errors): results[i] is None where errors hold
    (index, exception) instead.
    """
    n = len(items)
    results = [None] * n
    errors = []
    workers = worker_count()
    if workers == 1:
        for i, item in enumerate(items):
            try:
                results[i] = fn(i, item)
            except ToolkitError as exc:
                errors.append((i, exc))
        return results, errors
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, i, item): i for i, item in enumerate(items)}
        for fut, i in futures.items():
            try:
                results[i] = fut.result()
            except ToolkitError as exc:
                errors.append((i, exc))
    errors.sort(key=lambda e: e[0])
    return results, errors


def _fail_records(out_dir, errors):
    """Write the per-record error log and return the worst exit code."""
    lines = [f"record {i}: {type(exc).__name__}: {exc}" for i, exc in errors]
    atomic_write_text(os.path.join(out_dir, "errors.log"), "\n".join(lines) + "\n")
    for row in lines:
        print(row, file=sys.stderr)
    worst = 3
    for _, exc in errors:
        if isinstance(exc, GeometryDegeneracyError):
            worst = 4
    return worst


def _save_png(path, array) -> None:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    if args.profile not in PROFILES:
        raise ConfigError(f"unknown profile {args.profile!r}; choose from {sorted(PROFILES)}")
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    ranges = PROFILES[args.profile]
    out = args.out
    os.makedirs(os.path.join(out, "images"), exist_ok=True)

    if args.panorama:
        try:
            pano = np.asarray(Image.open(args.panorama).convert("RGB"))
        except OSError as exc:
            raise DataError(f"cannot read panorama {args.panorama}: {exc}") from exc
        pano_name = os.path.basename(args.panorama)
        synth_lines = False
    else:
        pano = CheckerRoom().panorama(args.pano_height)
        pano_name = BUILTIN_PANORAMA
        synth_lines = True
        os.makedirs(os.path.join(out, "lines"), exist_ok=True)

    config = {
        "cmd": "synth",
        "version": __version__,
        "profile": args.profile,
        "count": args.count,
        "seed": args.seed,
        "size": args.size,
        "panorama": pano_name,
        "pano_height": args.pano_height,
    }

    def build(i, _):
        rng = np.random.default_rng([args.seed, i])
        cam = sample_camera(ranges, rng, width=args.size, height=args.size)
        yaw = float(rng.uniform(0.0, 360.0))
        image_rel = f"images/{i:06d}.png"
        _save_png(os.path.join(out, image_rel), rectify_equirect(pano, cam, yaw))
        lines_rel = None
        if synth_lines:
            segments, _axes = room_segments(cam, yaw)
            lines_rel = f"lines/{i:06d}.txt"
            write_lsd(os.path.join(out, lines_rel), segments)
        return SceneRecord(
            index=i,
            image=image_rel,
            camera=cam,
            yaw_deg=yaw,
            calib=camera_to_calib(cam),
            lines=lines_rel,
            seed=i,
        )

    records, errors = map_indexed(build, list(range(args.count)))
    if errors:
        return _fail_records(out, errors)
    write_manifest(os.path.join(out, "manifest.jsonl"), config, records)
    print(f"wrote {len(records)} records to {out}")
    return 0


# ---------------------------------------------------------------------------
# label


def cmd_label(args) -> int:
    header, records = read_manifest(args.manifest)
    manifest_dir = os.path.dirname(os.path.abspath(args.manifest))
    out = args.out
    for sub in ("lines_sampled", "labels", "pseudo_vps"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    try:
        t = Thresholds(args.delta0, args.delta1, args.delta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.max_lines < 1:
        raise ConfigError("--max-lines must be >= 1")
    config = {
        "cmd": "label",
        "version": __version__,
        "seed": args.seed,
        "count": args.count,
        "delta0": t.delta0,
        "delta1": t.delta1,
        "delta": t.delta,
        "max_lines": args.max_lines,
        "source_manifest_sha256": header["config_sha256"],
    }
    sha = config_hash(config)
    out_abs = os.path.abspath(out)

    def relocate(rel: str | None) -> str | None:
        if rel is None:
            return None
        return os.path.relpath(os.path.join(manifest_dir, rel), out_abs).replace(
            os.sep, "/"
        )

    def build(i, rec: SceneRecord):
        if rec.lines is None:
            raise DataError(
                f"record {i} has no line file; run a detector and fill 'lines'"
            )
        segments = ingest_lsd(os.path.join(manifest_dir, rec.lines))
        seeds = np.random.SeedSequence([args.seed, i]).generate_state(2)
        segments = sample_lines(segments, args.max_lines, seed=int(seeds[0]))
        result = label_image(
            segments,
            rec.calib.zenith,
            rec.calib.horizon,
            rec.camera.width,
            rec.camera.height,
            count=args.count,
            seed=int(seeds[1]),
            t=t,
        )
        sampled_rel = f"lines_sampled/{i:06d}.txt"
        labels_rel = f"labels/{i:06d}.txt"
        vps_rel = f"pseudo_vps/{i:06d}.json"
        write_lsd(os.path.join(out, sampled_rel), segments)
        write_labels(os.path.join(out, labels_rel), result.labels, config_sha256=sha)
        atomic_write_text(
            os.path.join(out, vps_rel),
            pseudo_vps_to_json(result.vps, config_sha256=sha) + "\n",
        )
        return SceneRecord(
            index=rec.index,
            image=relocate(rec.image),
            camera=rec.camera,
            yaw_deg=rec.yaw_deg,
            calib=rec.calib,
            lines=relocate(rec.lines),
            lines_sampled=sampled_rel,
            labels=labels_rel,
            pseudo_vps=vps_rel,
            seed=rec.seed,
            label_partial=result.partial,
        )

    out_records, errors = map_indexed(build, records)
    if errors:
        return _fail_records(out, errors)
    write_manifest(os.path.join(out, "manifest.jsonl"), config, out_records)
    n_partial = sum(1 for r in out_records if r.label_partial)
    note = f" ({n_partial} partial)" if n_partial else ""
    print(f"labeled {len(out_records)} records{note} in {out}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _load_predictions(path):
    """JSON-lines: optional header {kind: predictions, ...}, then one object
    per image carrying 'index' plus either calibration targets (zenith,
    horizon, fov_deg) or camera angles (fov_deg, pitch_deg, roll_deg)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read predictions {path}: {exc}") from exc
    header = None
    rows = {}
    for ln, row in enumerate(raw, start=1):
        try:
            obj = json.loads(row)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{ln}: bad JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise DataError(f"{path}:{ln}: expected an object")
        if ln == 1 and obj.get("kind") == "predictions":
            header = obj
            continue
        if "index" not in obj:
            raise DataError(f"{path}:{ln}: prediction missing 'index'")
        idx = int(obj["index"])
        if idx in rows:
            raise DataError(f"{path}:{ln}: duplicate prediction for index {idx}")
        rows[idx] = obj
    return header, rows


def _prediction_calib(obj, width: int, height: int) -> CalibGT:
    has_calib = "zenith" in obj and "horizon" in obj
    has_cam = "pitch_deg" in obj and "roll_deg" in obj
    if "fov_deg" not in obj or not (has_calib or has_cam):
        raise DataError(
            f"prediction {obj.get('index')}: need fov_deg plus either "
            f"zenith+horizon or pitch_deg+roll_deg"
        )
    try:
        if has_calib:
            return CalibGT(
                HomPoint(np.asarray(obj["zenith"], dtype=float)),
                HomLine(np.asarray(obj["horizon"], dtype=float)),
                float(obj["fov_deg"]),
                width,
                height,
            )
        cam = CameraFrame(
            float(obj["fov_deg"]),
            float(obj["pitch_deg"]),
            float(obj["roll_deg"]),
            width,
            height,
        )
    except ValueError as exc:
        raise DataError(f"prediction {obj.get('index')}: {exc}") from exc
    return camera_to_calib(cam)


def cmd_eval(args) -> int:
    header, records = read_manifest(args.manifest)
    pred_header, preds = _load_predictions(args.predictions)
    if pred_header is not None and "manifest_sha256" in pred_header:
        if pred_header["manifest_sha256"] != header["config_sha256"] and not args.force:
            raise ConfigError(
                "predictions were produced against a different manifest "
                f"({pred_header['manifest_sha256'][:12]} != "
                f"{header['config_sha256'][:12]}); pass --force to evaluate anyway"
            )
    extra = sorted(set(preds) - {r.index for r in records})
    if extra:
        print(f"warning: ignoring predictions for unknown indices {extra}", file=sys.stderr)
    os.makedirs(args.out, exist_ok=True)
    config = {
        "cmd": "eval",
        "version": __version__,
        "auc_max": args.auc_max,
        "manifest_sha256": header["config_sha256"],
    }
    sha = config_hash(config)

    def build(i, rec: SceneRecord) -> EvalRow:
        if rec.index not in preds:
            raise DataError(f"no prediction for record {rec.index}")
        est = _prediction_calib(preds[rec.index], rec.camera.width, rec.camera.height)
        gt = rec.calib
        ang = angle_errors(gt, est)
        h_px = loss_horizon(gt.horizon, est.horizon, rec.camera.width)
        h_norm = horizon_error(
            gt.horizon, est.horizon, rec.camera.width, rec.camera.height
        ).value
        return EvalRow(
            rec.index,
            rec.image or "",
            ang.up_deg,
            ang.pitch_deg,
            ang.roll_deg,
            ang.fov_deg,
            h_px,
            h_norm,
        )

    rows, errors = map_indexed(build, records)
    if errors:
        return _fail_records(args.out, errors)
    rep = EvalReport(tuple(rows), x_max=args.auc_max)
    write_report_csv(os.path.join(args.out, "report.csv"), rep, sha)
    write_report_json(os.path.join(args.out, "report.json"), rep, config, sha)
    agg = rep.aggregates()
    print(
        f"evaluated {agg['n_images']} images: "
        f"AUC {agg['auc_percent']:.2f}% at x_max {args.auc_max!r}"
    )
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    rep = read_report_csv(args.report, x_max=args.auc_max)
    os.makedirs(args.out, exist_ok=True)
    config = {
        "cmd": "report",
        "version": __version__,
        "auc_max": args.auc_max,
        "source": os.path.basename(args.report),
    }
    sha = config_hash(config)
    write_curve_csv(os.path.join(args.out, "curve.csv"), rep, sha)
    write_curve_svg(os.path.join(args.out, "curve.svg"), rep)
    print(f"wrote curve files for {len(rep.rows)} images to {args.out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="horizonbench",
        description="Synthesize calibrated views, label line convergence, evaluate predictions.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="render perspective crops with ground truth")
    ps.add_argument("--out", required=True)
    ps.add_argument("--profile", default="gsv", help="sampling profile: gsv or sun360")
    ps.add_argument("--count", type=int, default=1)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--size", type=int, default=OUTPUT_SIZE, help="output image side, px")
    ps.add_argument("--panorama", default=None, help="equirect image; default builtin room")
    ps.add_argument("--pano-height", type=int, default=512, dest="pano_height")
    ps.set_defaults(fn=cmd_synth)

    pl = sub.add_parser("label", help="convergence labels and pseudo VPs for a manifest")
    pl.add_argument("--manifest", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--count", type=int, default=DEFAULT_CANDIDATE_COUNT)
    pl.add_argument("--delta0", type=float, default=Thresholds().delta0)
    pl.add_argument("--delta1", type=float, default=Thresholds().delta1)
    pl.add_argument("--delta", type=float, default=Thresholds().delta)
    pl.add_argument("--max-lines", type=int, default=MAX_SEGMENTS, dest="max_lines")
    pl.set_defaults(fn=cmd_label)

    pe = sub.add_parser("eval", help="score predictions against a manifest")
    pe.add_argument("--manifest", required=True)
    pe.add_argument("--predictions", required=True)
    pe.add_argument("--out", required=True)
    pe.add_argument("--auc-max", type=float, default=DEFAULT_AUC_XMAX, dest="auc_max")
    pe.add_argument("--force", action="store_true", help="evaluate despite hash mismatch")
    pe.set_defaults(fn=cmd_eval)

    pr = sub.add_parser("report", help="cumulative curve files from a report CSV")
    pr.add_argument("--report", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--auc-max", type=float, default=DEFAULT_AUC_XMAX, dest="auc_max")
    pr.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
