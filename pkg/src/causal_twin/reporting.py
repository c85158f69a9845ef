"""Run manifests and plot-ready exports of robustness curves."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__

FORMAT_VERSIONS = {"causal-twin-scm": 1, "causal-twin-model": 1}
PLOT_METRICS = ("precision", "recall", "f1", "accuracy", "balanced_accuracy", "specificity")


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    """What a run consumed and produced.

    Everything except ``timing`` is a function of the inputs, so two runs with
    the same inputs differ only in that field.
    """

    command: str
    config_hash: str
    seeds: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    format_versions: dict = field(default_factory=lambda: dict(FORMAT_VERSIONS))
    package_version: str = __version__
    python: str = field(default_factory=platform.python_version)
    timing: dict = field(default_factory=dict)

    def add_input(self, label: str, path: str | Path) -> None:
        self.inputs[label] = {"path": Path(path).name, "sha256": file_digest(path)}

    def add_output(self, label: str, path: str | Path) -> None:
        self.outputs[label] = {"path": Path(path).name, "sha256": file_digest(path)}

    def to_dict(self, with_timing: bool = True) -> dict:
        d = asdict(self)
        if not with_timing:
            d.pop("timing")
        return d

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


class PlotDataError(ValueError):
    pass


def _read_curve(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PlotDataError(f"{path}: empty curve file")
    header = rows[0]
    for need in ("sample_index", "step", "delta"):
        if need not in header:
            raise PlotDataError(f"{path}: missing column {need!r}")
    body = [r for r in rows[1:] if r]
    if any(len(r) != len(header) for r in body):
        raise PlotDataError(f"{path}: ragged rows")
    return header, body


def emit_curve_plotdata(curve_csv: str | Path, out_csv: str | Path,
                        metrics: Sequence[str] = PLOT_METRICS, svg: str | Path | None = None,
                        tau: float | None = None, svg_metric: str = "precision") -> int:
    """Long-format (window, metric) rows from a stream curve CSV; returns the row count."""
    header, body = _read_curve(curve_csv)
    series: dict[str, list[tuple[int, int, float]]] = {}
    for m in metrics:
        col = f"rwa_{m}"
        if col not in header:
            raise PlotDataError(f"curve has no column {col!r}")
        j = header.index(col)
        pts = []
        for r in body:
            if r[j] == "":
                continue
            try:
                pts.append((int(r[0]), float(r[j])))
            except ValueError:
                raise PlotDataError(f"non-numeric value {r[j]!r} in column {col!r}") from None
        if not pts:
            raise PlotDataError(f"column {col!r} has no values")
        first = pts[0][0]
        series[m] = [(s - first, s, v) for s, v in pts]
    n = 0
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["window_index", "sample_index", "metric", "value"])
        for m in metrics:
            for w, s, v in series[m]:
                out.writerow([w, s, m, format(v, ".6g")])
                n += 1
    if svg is not None:
        if svg_metric not in series:
            raise PlotDataError(f"metric {svg_metric!r} was not exported")
        Path(svg).write_text(render_svg(series[svg_metric], svg_metric, tau), encoding="utf-8")
    return n


def render_svg(points: Sequence[tuple[int, int, float]], label: str,
               tau: float | None = None, width: int = 800, height: int = 300) -> str:
    """A bare line chart: y spans [0, 1], x spans the cumulative sample index."""
    pad = 40
    xs = [p[1] for p in points]
    lo, hi = min(xs), max(xs)
    span = max(hi - lo, 1)

    def sx(x):
        return pad + (x - lo) / span * (width - 2 * pad)

    def sy(y):
        return height - pad - min(max(y, 0.0), 1.0) * (height - 2 * pad)

    poly = " ".join(f"{sx(s):.2f},{sy(v):.2f}" for _, s, v in points)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
             'stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<polyline id="series-{label}" fill="none" stroke="steelblue" stroke-width="1.5" '
             f'points="{poly}"/>']
    if tau is not None:
        parts.append(f'<line id="tau" x1="{pad}" y1="{sy(tau):.2f}" x2="{width - pad}" '
                     f'y2="{sy(tau):.2f}" stroke="red" stroke-dasharray="6,4"/>')
        parts.append(f'<text x="{width - pad}" y="{sy(tau) - 4:.2f}" font-size="11" '
                     f'text-anchor="end">tau = {tau:g}</text>')
    parts.append(f'<text x="{pad}" y="{pad - 10}" font-size="12">rolling {label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
