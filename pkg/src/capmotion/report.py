"""Rendered artifacts: SVG charts, provenance records, text summaries.

Charts are hand-built SVG strings — deterministic output, no plotting
dependency.  Report JSON stays byte-identical across reruns of the same
config + seed; everything volatile (timestamps, library versions) goes
into a separate provenance file.
"""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .evaluation import EvalReport
from .ingest import atomic_write_text

__all__ = [
    "confusion_heatmap_svg",
    "counting_summary_svg",
    "provenance_record",
    "write_eval_artifacts",
    "write_count_artifacts",
    "text_summary",
]

_CELL = 46
_LEFT = 130
_TOP = 40
_BOTTOM = 120


def _shade(frac: float) -> str:
    """White -> deep blue, linear in the row-normalized count."""
    frac = min(max(frac, 0.0), 1.0)
    r = int(round(255 + (31 - 255) * frac))
    g = int(round(255 + (111 - 255) * frac))
    b = int(round(255 + (181 - 255) * frac))
    return f"rgb({r},{g},{b})"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def confusion_heatmap_svg(confusion: Sequence[Sequence[int]],
                          classes: Sequence[str]) -> str:
    """Row-normalized confusion heatmap with counts printed per cell."""
    M = np.asarray(confusion, dtype=np.int64)
    k = len(classes)
    if M.shape != (k, k):
        raise ValueError("confusion matrix shape does not match class list")
    width = _LEFT + k * _CELL + 20
    height = _TOP + k * _CELL + _BOTTOM
    rows = M.sum(axis=1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="monospace" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{_LEFT}" y="18" font-size="13">predicted &#8594;  (rows: true class, '
        f'row-normalized shading)</text>',
    ]
    for i, cls in enumerate(classes):
        y = _TOP + i * _CELL
        parts.append(
            f'<text x="{_LEFT - 6}" y="{y + _CELL / 2 + 4:.0f}" '
            f'text-anchor="end">{_esc(str(cls)[:16])}</text>')
        for j in range(k):
            x = _LEFT + j * _CELL
            frac = (M[i, j] / rows[i]) if rows[i] > 0 else 0.0
            parts.append(
                f'<rect x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" '
                f'fill="{_shade(frac)}" stroke="#999"/>')
            color = "white" if frac > 0.55 else "black"
            parts.append(
                f'<text x="{x + _CELL / 2}" y="{y + _CELL / 2 + 4:.0f}" '
                f'text-anchor="middle" fill="{color}">{int(M[i, j])}</text>')
    for j, cls in enumerate(classes):
        x = _LEFT + j * _CELL + _CELL / 2
        y = _TOP + k * _CELL + 12
        parts.append(
            f'<text x="{x:.0f}" y="{y}" text-anchor="end" '
            f'transform="rotate(-45 {x:.0f} {y})">{_esc(str(cls)[:16])}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _five_numbers(values: Sequence[float]) -> tuple[float, float, float, float, float]:
    v = np.asarray(sorted(values), dtype=np.float64)
    return (float(v[0]),
            float(np.quantile(v, 0.25)),
            float(np.quantile(v, 0.5)),
            float(np.quantile(v, 0.75)),
            float(v[-1]))


def counting_summary_svg(count_report: dict) -> str:
    """Horizontal box summary of per-segment counting accuracy by class."""
    segments = count_report.get("segments", [])
    by_class: dict[str, list[float]] = {}
    for seg in segments:
        by_class.setdefault(seg["class"], []).append(float(seg["accuracy"]))
    classes = sorted(by_class)
    if not classes:
        raise ValueError("count report has no segments")
    row_h = 34
    left = 150
    plot_w = 420
    width = left + plot_w + 30
    height = 70 + row_h * len(classes)
    lo_axis = min(0.0, min(min(v) for v in by_class.values()))
    hi_axis = 1.05

    def sx(v: float) -> float:
        return left + (v - lo_axis) / (hi_axis - lo_axis) * plot_w

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="monospace" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="18" font-size="13">counting accuracy per class '
        f'({_esc(str(count_report.get("source", "?")))})</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        if tick < lo_axis:
            continue
        x = sx(tick)
        parts.append(f'<line x1="{x:.1f}" y1="34" x2="{x:.1f}" '
                     f'y2="{height - 26}" stroke="#ddd"/>')
        parts.append(f'<text x="{x:.1f}" y="{height - 10}" '
                     f'text-anchor="middle">{tick:.2f}</text>')
    for i, cls in enumerate(classes):
        y = 48 + i * row_h
        lo, q1, med, q3, hi = _five_numbers(by_class[cls])
        parts.append(f'<text x="{left - 6}" y="{y + 4}" '
                     f'text-anchor="end">{_esc(cls[:18])}</text>')
        parts.append(f'<line x1="{sx(lo):.1f}" y1="{y}" x2="{sx(hi):.1f}" '
                     f'y2="{y}" stroke="#555"/>')
        parts.append(f'<rect x="{sx(q1):.1f}" y="{y - 8}" '
                     f'width="{max(sx(q3) - sx(q1), 1.0):.1f}" height="16" '
                     f'fill="#9ec9e8" stroke="#1f6fb5"/>')
        parts.append(f'<line x1="{sx(med):.1f}" y1="{y - 8}" x2="{sx(med):.1f}" '
                     f'y2="{y + 8}" stroke="#1f6fb5" stroke-width="2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def provenance_record(config_doc: dict, seed: int) -> dict:
    """Everything volatile about a run, kept out of the report itself."""
    blob = json.dumps(config_doc, sort_keys=True).encode()
    return {
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "seed": int(seed),
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": sys.version.split()[0],
        "platform": platform.platform(),
    }


def text_summary(report: EvalReport) -> str:
    lines = [
        f"scheme={report.scheme} model={report.model_kind} "
        f"subset={report.feature_subset} labels={report.label_set_id}",
        f"macro-F {report.macro_f:.4f}   hamming {report.hamming:.4f}   "
        f"folds {len(report.per_fold)}",
    ]
    for c in report.classes:
        pc = report.per_class[c]
        lines.append(f"  {c:>20s}  P {pc['precision']:.3f}  R {pc['recall']:.3f}  "
                     f"F1 {pc['f1']:.3f}  n={pc['support']}")
    return "\n".join(lines) + "\n"


def write_eval_artifacts(report: EvalReport, out_dir: str | Path,
                         config_doc: dict) -> list[Path]:
    """Write report.json (deterministic), confusion.svg, provenance.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out / "report.json"
    atomic_write_text(p, report.to_json())
    paths.append(p)
    p = out / "confusion.svg"
    atomic_write_text(p, confusion_heatmap_svg(report.confusion, report.classes))
    paths.append(p)
    p = out / "provenance.json"
    atomic_write_text(p, json.dumps(provenance_record(config_doc, report.seed),
                                    sort_keys=True, indent=2) + "\n")
    paths.append(p)
    return paths


def write_count_artifacts(count_report: dict, out_dir: str | Path,
                          config_doc: dict, seed: int) -> list[Path]:
    """Write count.json (deterministic), counting.svg, provenance.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out / "count.json"
    atomic_write_text(p, json.dumps(count_report, sort_keys=True, indent=2) + "\n")
    paths.append(p)
    p = out / "counting.svg"
    atomic_write_text(p, counting_summary_svg(count_report))
    paths.append(p)
    p = out / "provenance.json"
    atomic_write_text(p, json.dumps(provenance_record(config_doc, seed),
                                    sort_keys=True, indent=2) + "\n")
    paths.append(p)
    return paths
