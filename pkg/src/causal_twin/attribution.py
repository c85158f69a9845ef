"""Shapley attributions ranked against causal distance, with per-feature drift sweeps."""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import ClassifierUnderTest, predict_proba
from .drift import CONSECUTIVE, DriftScenario, breaking_point, run_scenario
from .graph import causal_distance, shortest_paths
from .scm import Scm
from .tabular import Dataset

logger = logging.getLogger(__name__)

ROBUST = "robust"
UNTESTABLE = "untestable"


def _predict_rows(model: ClassifierUnderTest, template: Dataset, rows: np.ndarray) -> np.ndarray:
    return predict_proba(model, Dataset(template.columns, rows))


def _orderings(p: int, n_perms: int | None, rng: np.random.Generator) -> np.ndarray:
    if n_perms is None:
        return np.array(list(itertools.permutations(range(p))), dtype=int)
    if n_perms < 1:
        raise ValueError("n_perms must be >= 1")
    return np.array([rng.permutation(p) for _ in range(n_perms)], dtype=int)


def shapley_mc(model: ClassifierUnderTest, background: Dataset, x: np.ndarray,
               n_perms: int | None = 100, seed: int = 0) -> dict[str, float]:
    """Permutation-sampling Shapley values of the predicted probability.

    ``x`` is one encoded row in ``background``'s column order. Each sampled
    ordering is paired with one background row drawn at random. With
    ``n_perms=None`` every ordering is enumerated against every background
    row, which gives exact Shapley values of the background-averaged game.
    """
    return _shapley_rows(model, background, np.atleast_2d(x), n_perms, seed)[0]


def _shapley_rows(model, background: Dataset, xs: np.ndarray, n_perms, seed) -> list[dict]:
    if background.n_rows == 0:
        raise ValueError("background is empty")
    missing = [f for f in model.features if f not in background.names]
    if missing:
        raise ValueError(f"background lacks model features {missing}")
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != len(background.columns):
        raise ValueError("row does not match the background schema")
    feats = list(model.features)
    cols = np.array([background.index(f) for f in feats])
    p = len(feats)
    rng = np.random.default_rng(seed)
    bg = background.values
    out = []
    for x in xs:
        orders = _orderings(p, n_perms, rng)
        if n_perms is None:
            pairs = [(o, b) for o in orders for b in range(len(bg))]
        else:
            picks = rng.integers(0, len(bg), size=len(orders))
            pairs = list(zip(orders, picks))
        # row j of block i: background row with the first j ordered features taken from x
        block = np.repeat(bg[[b for _, b in pairs]], p + 1, axis=0)
        for i, (order, _) in enumerate(pairs):
            base = i * (p + 1)
            for j in range(1, p + 1):
                c = cols[order[:j]]
                block[base + j, c] = x[c]
        f = _predict_rows(model, background, block).reshape(len(pairs), p + 1)
        phi = np.zeros(p)
        for i, (order, _) in enumerate(pairs):
            phi[order] += np.diff(f[i])
        phi /= len(pairs)
        out.append({feats[j]: float(phi[j]) for j in range(p)})
    return out


def rank_features(model: ClassifierUnderTest, ds: Dataset, n_rows: int = 100,
                  n_perms: int = 200, seed: int = 0,
                  background: Dataset | None = None) -> list[tuple[str, float]]:
    """Features by mean |Shapley value| over ``n_rows`` sampled rows, descending."""
    if n_rows > ds.n_rows:
        raise ValueError("n_rows exceeds the dataset size")
    rng = np.random.default_rng([seed, 0])
    # canonical row order makes the ranking independent of the input row order
    canon = np.lexsort(ds.values.T[::-1])
    rows = canon[np.sort(rng.choice(ds.n_rows, size=n_rows, replace=False))]
    if background is None:
        background = ds.take(canon[np.sort(rng.choice(ds.n_rows, size=min(100, ds.n_rows),
                                                      replace=False))])
    phis = _shapley_rows(model, background, ds.values[rows], n_perms, seed + 1)
    means = {f: float(np.mean([abs(ph[f]) for ph in phis])) for f in model.features}
    return sorted(means.items(), key=lambda kv: (-kv[1], kv[0]))


def coefficient_strength(scm: Scm, child: str, parent: str) -> float:
    mech = scm.mechanisms[child]
    j = mech.parents.index(parent)
    if hasattr(mech, "coef"):
        return float(max(abs(row[j]) for row in mech.coef))
    return float(abs(mech.beta[j]))


@dataclass(frozen=True)
class AttributionRecord:
    feature: str
    mean_abs_attribution: float
    causal_distance: float
    drift_tested: bool
    delta_crit: float | str | None
    drifted_edge: tuple[str, str] | None = None
    rule: str = ""


@dataclass
class AttributionReport:
    records: list

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["feature", "mean_abs_attribution", "causal_distance", "drift_tested",
                          "delta_crit", "drifted_edge", "rule"])
            for r in self.records:
                dist = "inf" if r.causal_distance == math.inf else str(int(r.causal_distance))
                if r.delta_crit is None:
                    dc = ""
                elif isinstance(r.delta_crit, str):
                    dc = r.delta_crit
                else:
                    dc = format(r.delta_crit, ".6g")
                edge = f"{r.drifted_edge[0]}->{r.drifted_edge[1]}" if r.drifted_edge else ""
                out.writerow([r.feature, format(r.mean_abs_attribution, ".6g"), dist,
                              str(r.drift_tested).lower(), dc, edge, r.rule])


def drift_edge(scm: Scm, feature: str, target: str) -> tuple[str, str]:
    """Edge (parent, child) whose coefficient is scaled to drift ``feature``'s route to ``target``.

    Distance 1 drifts the feature's own edge. Longer routes drift the final hop
    (mediator -> target) of a shortest path; ties go to the mediator with the
    strongest fitted coefficient, then lexicographically.
    """
    d = causal_distance(scm.graph, feature, target)
    if d == math.inf or d == 0:
        raise ValueError(f"{feature!r} has no directed path to {target!r}")
    if d == 1:
        return feature, target
    mediators = sorted({p[-2] for p in shortest_paths(scm.graph, feature, target)})
    best = max(mediators, key=lambda m: coefficient_strength(scm, target, m))
    return best, target


def per_feature_drift_sweep(scm: Scm, model: ClassifierUnderTest,
                            features: Sequence[tuple[str, float]], target: str,
                            template: DriftScenario, delta_max: float = -0.5, seed: int = 0,
                            m: int = 3) -> AttributionReport:
    """Sweep each ranked feature's route to ``target`` and record its breaking point."""
    records = []
    for feature, attr in features:
        d = causal_distance(scm.graph, feature, target)
        if d == math.inf:
            records.append(AttributionRecord(feature, attr, d, False, UNTESTABLE))
            continue
        parent, child = drift_edge(scm, feature, target)
        logger.info("sweep %s: drifting %s -> %s", feature, parent, child)
        sc = replace(template, targets=((child, parent, delta_max),))
        curve = run_scenario(scm, model, sc, seed, stream=False)
        bp = breaking_point(curve, sc.threshold, CONSECUTIVE, m)
        records.append(AttributionRecord(feature, attr, d, True,
                                         bp.delta_crit if bp.found else ROBUST,
                                         (parent, child), bp.rule))
    return AttributionReport(records)
