"""Report and table emission: JSON with stable key order, CSV, simple SVG."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DataError

__all__ = ["Report", "emit_report", "load_report", "emit_csv", "emit_svg_chart",
           "to_jsonable"]

SCHEMA_VERSION = "1"


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, tuples, dataclass-likes."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class Report:
    """Envelope for every CLI run: config echo, results, warnings, timing."""

    command: str
    config: dict[str, Any]
    results: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable({
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "warnings": self.warnings,
            "timing": self.timing,
        })

    def payload(self) -> dict[str, Any]:
        """Everything except timing; the determinism contract covers this."""
        d = self.to_dict()
        d.pop("timing", None)
        return d


def emit_report(report: Report, path: str) -> None:
    text = json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def load_report(path: str) -> dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load report {path}: {exc}") from exc


def emit_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(str(h) for h in header))
        fh.write("\n")
        for row in rows:
            fh.write(",".join("" if v is None else repr(v) if isinstance(v, float)
                              else str(v) for v in row))
            fh.write("\n")


def emit_svg_chart(path: str, curves: Sequence[tuple[str, Sequence[float], Sequence[float]]],
                   title: str = "", loglog: bool = False,
                   width: int = 720, height: int = 480) -> None:
    """Minimal polyline chart; one curve per (label, xs, ys) triple."""
    pad = 50
    pts = []
    for _, xs, ys in curves:
        for x, y in zip(xs, ys):
            if loglog and (x <= 0 or y <= 0):
                continue
            if math.isfinite(x) and math.isfinite(y):
                pts.append((math.log10(x), math.log10(y)) if loglog else (float(x), float(y)))
    if not pts:
        raise DataError("nothing to plot")
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    sx = (width - 2 * pad) / (x1 - x0 or 1.0)
    sy = (height - 2 * pad) / (y1 - y0 or 1.0)

    def map_pt(x, y):
        if loglog:
            x, y = math.log10(x), math.log10(y)
        return (pad + (x - x0) * sx, height - pad - (y - y0) * sy)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{pad}" y="{pad}" width="{width-2*pad}" height="{height-2*pad}" '
        'fill="none" stroke="#999"/>',
    ]
    for i, (label, xs, ys) in enumerate(curves):
        color = palette[i % len(palette)]
        coords = [
            map_pt(x, y) for x, y in zip(xs, ys)
            if (not loglog or (x > 0 and y > 0)) and math.isfinite(x) and math.isfinite(y)
        ]
        if not coords:
            continue
        path_d = " ".join(f"{px:.2f},{py:.2f}" for px, py in coords)
        parts.append(f'<polyline points="{path_d}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        parts.append(
            f'<text x="{width-pad-5}" y="{pad+16*(i+1)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
