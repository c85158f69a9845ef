"""Causal parametric drift: scheduled interventions, robustness curves, breaking points."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifiers import (METRIC_NAMES, ClassifierUnderTest, MetricsVector, evaluate,
                          metrics_from_scores, predict_proba)
from .scm import Scm, intervene_scale, sample
from .tabular import Dataset

WINDOW_METRICS = ("accuracy", "balanced_accuracy", "recall", "specificity", "precision", "f1")
CONSECUTIVE = "consecutive_steps"
RWA = "rwa_consistent"


@dataclass(frozen=True)
class Threshold:
    metric: str = "precision"
    value: float = 0.7

    def __post_init__(self):
        if self.metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class DriftScenario:
    targets: tuple[tuple[str, str, float], ...]
    k_steps: int = 20
    baseline_n: int = 3000
    step_n: int = 200
    final_n: int = 3000
    threshold: Threshold = Threshold()
    window: int = 300
    step_eval_n: int = 500

    def __post_init__(self):
        object.__setattr__(self, "targets",
                           tuple((str(c), str(p), float(d)) for c, p, d in self.targets))
        if not self.targets:
            raise ValueError("a scenario needs at least one target")
        if self.k_steps < 1:
            raise ValueError("k_steps must be >= 1")
        if min(self.baseline_n, self.step_n, self.final_n, self.window, self.step_eval_n) < 1:
            raise ValueError("row counts and window must be >= 1")
        if isinstance(self.threshold, Mapping):
            object.__setattr__(self, "threshold", Threshold(**self.threshold))

    def delta(self, k: int, delta_max: float) -> float:
        return k * delta_max / self.k_steps

    def targets_at(self, k: int) -> list[tuple[str, str, float]]:
        return [(c, p, self.delta(k, d)) for c, p, d in self.targets]

    @property
    def stream_length(self) -> int:
        return self.baseline_n + (self.k_steps - 1) * self.step_n + self.final_n

    def segment_size(self, k: int) -> int:
        if k == 0:
            return self.baseline_n
        return self.final_n if k == self.k_steps else self.step_n

    def to_dict(self) -> dict:
        d = asdict(self)
        d["targets"] = [list(t) for t in self.targets]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DriftScenario":
        d = dict(d)
        d["targets"] = tuple(tuple(t) for t in d["targets"])
        if "threshold" in d:
            d["threshold"] = Threshold(**d["threshold"])
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DriftScenario":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class StepRecord:
    k: int
    delta: float
    metrics: MetricsVector


@dataclass
class RobustnessCurve:
    scenario: DriftScenario
    steps: list
    stream: dict = field(default_factory=dict)
    windows: dict = field(default_factory=dict)
    step_data: list = field(default_factory=list, repr=False)

    @property
    def deltas(self) -> list[float]:
        return [s.delta for s in self.steps]

    def step_metric(self, name: str) -> np.ndarray:
        return np.array([getattr(s.metrics, name) for s in self.steps])

    def write_stream_csv(self, path: str | Path) -> None:
        if not self.stream:
            raise ValueError("curve was computed without a stream")
        st, win, w = self.stream, self.windows, self.scenario.window
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["sample_index", "step", "delta", "y_true", "y_pred"]
                         + [f"rwa_{m}" for m in WINDOW_METRICS])
            for i in range(len(st["y_true"])):
                row = [i, int(st["step"][i]), _f(st["delta"][i]), int(st["y_true"][i]),
                       int(st["y_pred"][i])]
                if i >= w - 1:
                    row += [_f(win[m][i - w + 1]) for m in WINDOW_METRICS]
                else:
                    row += [""] * len(WINDOW_METRICS)
                out.writerow(row)

    def write_steps_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["step", "delta"] + list(METRIC_NAMES))
            for s in self.steps:
                out.writerow([s.k, _f(s.delta)] + [_f(getattr(s.metrics, m)) for m in METRIC_NAMES])


def _f(x: float) -> str:
    return format(float(x), ".6g")


def windowed_metrics(y_true: np.ndarray, y_pred: np.ndarray, window: int) -> dict:
    """Confusion-matrix metrics over every length-``window`` run of the stream."""
    if window > len(y_true):
        raise ValueError("window larger than stream")
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)

    def run(x):
        c = np.r_[0, np.cumsum(x)]
        return (c[window:] - c[:-window]).astype(float)

    tp = run((y_true == 1) & (y_pred == 1))
    tn = run((y_true == 0) & (y_pred == 0))
    fp = run((y_true == 0) & (y_pred == 1))
    fn = run((y_true == 1) & (y_pred == 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        spec = np.where(tn + fp > 0, tn / (tn + fp), 0.0)
        prec = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        f1 = np.where(prec + recall > 0, 2 * prec * recall / (prec + recall), 0.0)
    return {"accuracy": (tp + tn) / window, "balanced_accuracy": (recall + spec) / 2,
            "recall": recall, "specificity": spec, "precision": prec, "f1": f1}


def _check_targets(scm: Scm, sc: DriftScenario) -> None:
    intervene_scale(scm, sc.targets)  # raises on unknown edges or root targets


def run_scenario(scm: Scm, model: ClassifierUnderTest, sc: DriftScenario, seed: int,
                 stream: bool = True, keep_step_data: bool = False) -> RobustnessCurve:
    """Stream D_0, D_1..D_{K-1}, D_K and evaluate; per-step metrics use fresh draws."""
    _check_targets(scm, sc)
    target = model.target
    steps, step_data = [], []
    parts = []
    lead = sc.targets[0][2]
    for k in range(sc.k_steps + 1):
        twin = intervene_scale(scm, sc.targets_at(k)) if k else scm
        ev = sample(twin, sc.step_eval_n, (seed, 1, k))
        scores = predict_proba(model, ev)
        steps.append(StepRecord(k, sc.delta(k, lead), metrics_from_scores(ev.column(target), scores)))
        if keep_step_data:
            step_data.append(ev)
        if stream:
            seg = sample(twin, sc.segment_size(k), (seed, 0, k))
            parts.append((k, seg.column(target), predict_proba(model, seg) >= 0.5))
    curve = RobustnessCurve(sc, steps, step_data=step_data)
    if stream:
        y_true = np.concatenate([p[1] for p in parts]).astype(int)
        y_pred = np.concatenate([p[2] for p in parts]).astype(int)
        step = np.concatenate([np.full(len(p[1]), p[0]) for p in parts])
        curve.stream = {"step": step, "delta": np.array([sc.delta(k, lead) for k in step]),
                        "y_true": y_true, "y_pred": y_pred}
        curve.windows = windowed_metrics(y_true, y_pred, sc.window)
    return curve


@dataclass(frozen=True)
class BreakingPointEstimate:
    delta_crit: float
    rule: str
    found: bool
    step: int = -1


def breaking_point(curve: RobustnessCurve, tau: Threshold | None = None, rule: str = CONSECUTIVE,
                   m: int = 3) -> BreakingPointEstimate:
    """Smallest drift at which the metric falls below ``tau``.

    ``consecutive_steps``: first step k whose per-step metric and the next
    m-1 are all below tau. ``rwa_consistent``: first stream position from
    which the rolling-window metric stays below tau for a full window span
    (or until the stream ends); reported as that position's step.
    """
    tau = tau or curve.scenario.threshold
    if tau.metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {tau.metric!r}")
    if not curve.steps:
        raise ValueError("empty curve")
    name = f"{rule}({m})" if rule == CONSECUTIVE else rule
    if rule == CONSECUTIVE:
        below = curve.step_metric(tau.metric) < tau.value
        for k in range(len(below) - m + 1):
            if below[k:k + m].all():
                return BreakingPointEstimate(curve.steps[k].delta, name, True, curve.steps[k].k)
        return BreakingPointEstimate(float("nan"), name, False)
    if rule == RWA:
        if tau.metric not in WINDOW_METRICS:
            raise ValueError(f"{tau.metric!r} is not available as a windowed metric")
        if not curve.windows:
            raise ValueError("curve has no stream")
        below = curve.windows[tau.metric] < tau.value
        span = curve.scenario.window
        # number of consecutive below-tau windows starting at each position
        run = np.zeros(len(below) + 1, dtype=int)
        for i in range(len(below) - 1, -1, -1):
            run[i] = run[i + 1] + 1 if below[i] else 0
        for i in range(len(below)):
            if below[i] and (run[i] >= span or i + run[i] == len(below)):
                pos = i + span - 1  # stream index of the window's last sample
                k = int(curve.stream["step"][pos])
                return BreakingPointEstimate(float(curve.stream["delta"][pos]), name, True, k)
        return BreakingPointEstimate(float("nan"), name, False)
    raise ValueError(f"unknown rule {rule!r}")


@dataclass(frozen=True)
class BootstrapSummary:
    mean: float
    median: float
    std: float
    ci_lower: float
    ci_upper: float
    n_replications: int
    n_found: int
    estimates: tuple = ()

    @property
    def defined(self) -> bool:
        return self.n_found > 0


def percentile(x: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile (numpy's default definition)."""
    return float(np.percentile(np.asarray(x, dtype=float), q))


def summarize(estimates: Sequence[BreakingPointEstimate], b: int) -> BootstrapSummary:
    vals = np.array([e.delta_crit for e in estimates if e.found])
    if len(vals) == 0:
        nan = float("nan")
        return BootstrapSummary(nan, nan, nan, nan, nan, b, 0, tuple(estimates))
    std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return BootstrapSummary(float(vals.mean()), float(np.median(vals)), std,
                            percentile(vals, 2.5), percentile(vals, 97.5), b, len(vals),
                            tuple(estimates))


def bootstrap_breaking_point(scm: Scm, model: ClassifierUnderTest, sc: DriftScenario, b: int = 50,
                             base_seed: int = 0, m: int = 3) -> BootstrapSummary:
    if b < 2:
        raise ValueError("need at least 2 replications")
    est = []
    for r in range(b):
        curve = run_scenario(scm, model, sc, base_seed + r, stream=False)
        est.append(breaking_point(curve, sc.threshold, CONSECUTIVE, m))
    return summarize(est, b)


def write_bootstrap_csv(summary: BootstrapSummary, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["replication", "found", "delta_crit", "step"])
        for i, e in enumerate(summary.estimates):
            out.writerow([i, str(e.found).lower(), _f(e.delta_crit) if e.found else "", e.step])
        out.writerow([])
        out.writerow(["statistic", "value"])
        for k in ("mean", "median", "std", "ci_lower", "ci_upper"):
            out.writerow([k, _f(getattr(summary, k)) if summary.defined else "undefined"])
        out.writerow(["n_replications", summary.n_replications])
        out.writerow(["n_found", summary.n_found])


def shuffle_fraction(ds: Dataset, feature: str, fraction: float,
                     rng: np.random.Generator) -> Dataset:
    """Permute ``feature`` among a uniformly chosen ``fraction`` of rows."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    col = ds.column(feature).copy()
    rows = np.sort(rng.choice(ds.n_rows, size=int(round(fraction * ds.n_rows)), replace=False))
    col[rows] = col[rng.permutation(rows)]
    return ds.with_column(feature, col)


@dataclass(frozen=True)
class NoiseRecord:
    fraction: float
    delta: float
    noise: MetricsVector
    causal: MetricsVector

    @property
    def delta_precision(self) -> float:
        return self.causal.precision - self.noise.precision


def replacement_noise_baseline(scm: Scm, model: ClassifierUnderTest, fractions: Sequence[float],
                               feature: str, seed: int, n: int = 500,
                               scenario: DriftScenario | None = None) -> list[NoiseRecord]:
    """Shuffle ``feature`` in a fraction of a generated baseline.

    With a scenario, fraction f is paired with the causal drift at
    delta = f * delta_max evaluated on the same seed.
    """
    if feature not in scm.names:
        raise KeyError(f"unknown feature {feature!r}")
    if any(not 0.0 <= f <= 1.0 for f in fractions):
        raise ValueError("fractions must lie in [0, 1]")
    base = sample(scm, n, (seed, 2))
    out = []
    for i, f in enumerate(fractions):
        rng = np.random.default_rng([seed, 3, i])
        noisy = shuffle_fraction(base, feature, f, rng)
        mn = evaluate(model, noisy)
        if scenario is not None:
            targets = [(c, p, f * d) for c, p, d in scenario.targets]
            causal = evaluate(model, sample(intervene_scale(scm, targets), n, (seed, 2)))
            delta = f * scenario.targets[0][2]
        else:
            causal, delta = evaluate(model, base), 0.0
        out.append(NoiseRecord(float(f), delta, mn, causal))
    return out
