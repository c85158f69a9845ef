"""Conventional drift monitors: JS / KS per feature, PCA reconstruction error,
supervised detection under label delay, and a marginal-stability audit."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .tabular import Dataset
from .validation import ks_2samp

logger = logging.getLogger(__name__)

DEFAULT_DELAYS = {"instant": 0, "1_week": 4, "1_month": 18, "1_year": 219}
MULTIPLE_TESTING_NOTE = ("per-step KS p-values are uncorrected; with many features x steps, "
                         "about 5% of tests fall below 0.05 by chance")


@dataclass(frozen=True)
class MonitorConfig:
    js_threshold: float = 0.1
    ks_alpha: float = 0.05
    pca_components: int = 5
    pca_sigma_mult: float = 3.0
    supervised_drop: float = 0.05
    label_delay_steps: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_DELAYS))
    numeric_bins: int = 10
    reference_n: int = 3000

    def __post_init__(self):
        if self.js_threshold <= 0:
            raise ValueError("js_threshold must be positive")
        if self.pca_components < 1:
            raise ValueError("pca_components must be >= 1")
        if self.supervised_drop <= 0:
            raise ValueError("supervised_drop must be positive")
        if any(d < 0 for d in self.label_delay_steps.values()):
            raise ValueError("label delays must be non-negative")


def js_divergence(p_ref: Sequence[float], p_cur: Sequence[float]) -> float:
    """Jensen-Shannon divergence in bits, so the result lies in [0, 1]."""
    p = np.asarray(p_ref, dtype=float)
    q = np.asarray(p_cur, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("histograms must share one support")
    if (p < 0).any() or (q < 0).any() or p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("histogram cannot be normalized")
    p, q = p / p.sum(), q / q.sum()
    m = (p + q) / 2

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(a[nz] / m[nz])))

    return min(1.0, max(0.0, 0.5 * kl(p) + 0.5 * kl(q)))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    if len(a) < 5 or len(b) < 5:
        raise ValueError("KS needs at least 5 observations per sample")
    return ks_2samp(a, b)


def histogram(values: np.ndarray, n_levels: int | None = None,
              edges: np.ndarray | None = None) -> np.ndarray:
    """Counts over categorical levels, or over ``edges`` plus one overflow bin per side."""
    values = np.asarray(values, dtype=float)
    if n_levels is not None:
        return np.bincount(values.astype(int), minlength=n_levels).astype(float)
    idx = np.searchsorted(edges, values, side="right")
    # the top edge belongs to the last regular bin
    idx[values == edges[-1]] = len(edges) - 1
    return np.bincount(idx, minlength=len(edges) + 1).astype(float)


def numeric_edges(reference: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(np.min(reference)), float(np.max(reference))
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, bins + 1)


@dataclass(frozen=True)
class PcaMonitor:
    columns: tuple
    mean: np.ndarray
    scale: np.ndarray
    axes: np.ndarray
    threshold: float
    ref_mu: float
    ref_sigma: float

    def errors(self, ds: Dataset) -> np.ndarray:
        x = (ds.select(list(self.columns)).values - self.mean) / self.scale
        recon = (x @ self.axes) @ self.axes.T
        return np.mean((x - recon) ** 2, axis=1)


def pca_monitor_fit(reference: Dataset, components: int = 5, sigma_mult: float = 3.0,
                    exclude: Sequence[str] = ()) -> PcaMonitor:
    cols = [n for n in reference.names if n not in exclude]
    x = reference.select(cols).values
    std = x.std(axis=0)
    keep = std > 0
    for name in np.array(cols)[~keep]:
        logger.warning("PCA monitor excludes zero-variance column %s", name)
    cols = [c for c, k in zip(cols, keep) if k]
    if reference.n_rows <= components:
        raise ValueError("reference needs more rows than components")
    if components > len(cols):
        raise ValueError("more components than usable columns")
    x = x[:, keep]
    mean, scale = x.mean(axis=0), std[keep]
    z = (x - mean) / scale
    vals, vecs = np.linalg.eigh(np.cov(z, rowvar=False))
    order = np.argsort(vals)[::-1][:components]
    axes = vecs[:, order]
    err = np.mean((z - (z @ axes) @ axes.T) ** 2, axis=1)
    mu, sigma = float(err.mean()), float(err.std())
    return PcaMonitor(tuple(cols), mean, scale, axes, mu + sigma_mult * sigma, mu, sigma)


@dataclass(frozen=True)
class StepMonitor:
    k: int
    delta: float
    js: dict
    ks_p: dict
    js_alert: bool
    pca_error: float
    pca_alert: bool
    max_ks: float
    min_ks_p: float
    any_ks_below_alpha: bool
    precision: float
    f1: float
    supervised: dict


@dataclass
class MonitorReport:
    features: list
    steps: list
    delays: dict
    pca_threshold: float
    footnote: str = MULTIPLE_TESTING_NOTE

    def first_alert(self, delay: str) -> int | None:
        for s in self.steps:
            if s.supervised[delay]:
                return s.k
        return None

    def to_csv(self, path: str | Path) -> None:
        names = list(self.delays)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["step", "delta", "precision", "f1"]
                         + [f"js_{f}" for f in self.features]
                         + [f"ks_p_{f}" for f in self.features]
                         + ["js_alert", "pca_error", "pca_threshold", "pca_alert",
                            "max_ks", "min_ks_p", "any_ks_p_below_alpha"]
                         + [f"supervised_{d}" for d in names])
            for s in self.steps:
                out.writerow([s.k, _f(s.delta), _f(s.precision), _f(s.f1)]
                             + [_f(s.js[f]) for f in self.features]
                             + [_f(s.ks_p[f]) for f in self.features]
                             + [_b(s.js_alert), _f(s.pca_error), _f(self.pca_threshold),
                                _b(s.pca_alert), _f(s.max_ks), _f(s.min_ks_p),
                                _b(s.any_ks_below_alpha)]
                             + [_b(s.supervised[d]) for d in names])


def _f(x: float) -> str:
    return format(float(x), ".6g")


def _b(x: bool) -> str:
    return "true" if x else "false"


def supervised_delay_detector(precision: Sequence[float], baseline_precision: float,
                              cfg: MonitorConfig) -> dict[str, list[bool]]:
    """Alert at step k when the precision observed with delay d (step k-d) has
    dropped by more than ``cfg.supervised_drop`` in absolute terms."""
    prec = np.asarray(precision, dtype=float)
    out = {}
    for name, d in cfg.label_delay_steps.items():
        flags = []
        for k in range(len(prec)):
            seen = k - d
            flags.append(bool(seen >= 0 and baseline_precision - prec[seen] > cfg.supervised_drop))
        out[name] = flags
    return out


def monitor_stream(step_data: Sequence[Dataset], reference: Dataset, cfg: MonitorConfig,
                   target: str, deltas: Sequence[float] | None = None,
                   precision: Sequence[float] | None = None,
                   f1: Sequence[float] | None = None) -> MonitorReport:
    """Run every monitor against each per-step dataset."""
    ref_schema = [c.to_dict() for c in reference.columns]
    for ds in step_data:
        if [c.to_dict() for c in ds.columns] != ref_schema:
            raise ValueError("step dataset schema differs from the reference")
    features = sorted(n for n in reference.names if n != target)
    bins = {}
    for name in features:
        spec = reference.spec(name)
        if spec.is_categorical:
            bins[name] = (spec.n_levels, None)
        else:
            bins[name] = (None, numeric_edges(reference.column(name), cfg.numeric_bins))
    ref_hist = {n: histogram(reference.column(n), *bins[n]) for n in features}
    pca = pca_monitor_fit(reference, cfg.pca_components, cfg.pca_sigma_mult, exclude=(target,))

    n = len(step_data)
    deltas = list(deltas) if deltas is not None else [0.0] * n
    prec = list(precision) if precision is not None else [float("nan")] * n
    f1s = list(f1) if f1 is not None else [float("nan")] * n
    sup = (supervised_delay_detector(prec, prec[0], cfg) if precision is not None
           else {d: [False] * n for d in cfg.label_delay_steps})
    steps = []
    for k, ds in enumerate(step_data):
        js = {f: js_divergence(ref_hist[f], histogram(ds.column(f), *bins[f])) for f in features}
        ks = {f: ks_two_sample(reference.column(f), ds.column(f)) for f in features}
        err = float(pca.errors(ds).mean())
        steps.append(StepMonitor(
            k, float(deltas[k]), js, {f: ks[f][1] for f in features},
            max(js.values()) > cfg.js_threshold, err, err > pca.threshold,
            max(v[0] for v in ks.values()), min(v[1] for v in ks.values()),
            any(v[1] < cfg.ks_alpha for v in ks.values()), float(prec[k]), float(f1s[k]),
            {d: sup[d][k] for d in cfg.label_delay_steps}))
    return MonitorReport(features, steps, dict(cfg.label_delay_steps), pca.threshold)
