"""Evaluation reports: per-image CSV, aggregate JSON, cumulative curve files.

Float columns are serialized with repr (shortest round-trip form), which is
deterministic, and the SVG is assembled by hand so the bytes depend only on
the data. CSV files carry the config hash in a leading comment row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .manifest import atomic_write_text, canonical_json
from .metrics import DEFAULT_AUC_XMAX, auc_cumulative, cumulative_curve

CSV_COLUMNS = (
    "index",
    "image",
    "up_err_deg",
    "pitch_err_deg",
    "roll_err_deg",
    "fov_err_deg",
    "horizon_err_px",
    "horizon_err",
)

ERROR_COLUMNS = CSV_COLUMNS[2:]


@dataclass(frozen=True)
class EvalRow:
    index: int
    image: str
    up_err_deg: float
    pitch_err_deg: float
    roll_err_deg: float
    fov_err_deg: float
    horizon_err_px: float
    horizon_err: float


@dataclass(frozen=True)
class EvalReport:
    """Per-image error rows plus the AUC ceiling used for aggregation."""

    rows: tuple
    x_max: float = DEFAULT_AUC_XMAX

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def aggregates(self) -> dict:
        """Mean/median per error column plus the horizon AUC percentage.

        Recomputable from the rows alone; the report JSON stores exactly this.
        """
        if not self.rows:
            raise DataError("empty report has no aggregates")
        cols = {}
        for name in ERROR_COLUMNS:
            v = self.column(name)
            cols[name] = {"mean": float(v.mean()), "median": float(np.median(v))}
        return {
            "n_images": len(self.rows),
            "x_max": self.x_max,
            "columns": cols,
            "auc_percent": auc_cumulative(self.column("horizon_err"), self.x_max),
        }


def _fmt(v) -> str:
    return repr(float(v))


def write_report_csv(path, report: EvalReport, config_sha256: str) -> None:
    rows = [f"# config_sha256={config_sha256}", ",".join(CSV_COLUMNS)]
    for r in report.rows:
        rows.append(
            ",".join(
                [
                    str(r.index),
                    r.image,
                    _fmt(r.up_err_deg),
                    _fmt(r.pitch_err_deg),
                    _fmt(r.roll_err_deg),
                    _fmt(r.fov_err_deg),
                    _fmt(r.horizon_err_px),
                    _fmt(r.horizon_err),
                ]
            )
        )
    atomic_write_text(path, "\n".join(rows) + "\n")


def read_report_csv(path, x_max: float = DEFAULT_AUC_XMAX) -> EvalReport:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    body = [ln for ln in raw if not ln.startswith("#")]
    if not body:
        raise DataError(f"report {path} is empty")
    header = body[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise DataError(f"{path}: unexpected columns {header}")
    rows = []
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise DataError(f"{path}: malformed row {ln!r}")
        try:
            rows.append(
                EvalRow(
                    int(parts[0]),
                    parts[1],
                    *(float(p) for p in parts[2:]),
                )
            )
        except ValueError as exc:
            raise DataError(f"{path}: malformed row {ln!r}") from exc
    if not rows:
        raise DataError(f"report {path} has no data rows")
    return EvalReport(tuple(rows), x_max)


def write_report_json(path, report: EvalReport, config: dict, config_sha256: str) -> None:
    obj = {
        "kind": "eval_report",
        "config": config,
        "config_sha256": config_sha256,
        "aggregates": report.aggregates(),
    }
    atomic_write_text(path, canonical_json(obj) + "\n")


def write_curve_csv(path, report: EvalReport, config_sha256: str) -> None:
    pts = cumulative_curve(report.column("horizon_err"), report.x_max)
    rows = [f"# config_sha256={config_sha256}", "horizon_err,percent"]
    rows.extend(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
    atomic_write_text(path, "\n".join(rows) + "\n")


SVG_W, SVG_H = 480, 360
SVG_M = 48  # margin


def write_curve_svg(path, report: EvalReport, title: str = "horizon error CDF") -> None:
    """Minimal, dependency-free step plot of the cumulative curve."""
    pts = cumulative_curve(report.column("horizon_err"), report.x_max)
    auc = auc_cumulative(report.column("horizon_err"), report.x_max)
    w, h, m = SVG_W, SVG_H, SVG_M

    def sx(x):
        return m + x / report.x_max * (w - 2 * m)

    def sy(y):
        return h - m - y / 100.0 * (h - 2 * m)

    poly = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{m}" y1="{h-m}" x2="{w-m}" y2="{h-m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h-m}" stroke="black"/>',
        f'<polyline points="{poly}" fill="none" stroke="#1f6fb2" stroke-width="2"/>',
        f'<text x="{w/2:.0f}" y="{h-m/4:.0f}" text-anchor="middle" font-size="12">'
        f"horizon error (fraction of height, max {report.x_max!r})</text>",
        f'<text x="{m/3:.0f}" y="{h/2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 {m/3:.0f} {h/2:.0f})">images below error (%)</text>',
        f'<text x="{w/2:.0f}" y="{m/2:.0f}" text-anchor="middle" font-size="13">'
        f"{title}: AUC {auc:.2f}%</text>",
        "</svg>",
    ]
    atomic_write_text(path, "\n".join(parts) + "\n")
