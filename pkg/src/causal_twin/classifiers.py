"""Reference classifiers under test and the evaluation metric suite.

Two tree ensembles are provided: second-order gradient boosting on the
logistic loss (``gbt``) and a bagged random forest of fully grown Gini trees
(``random_forest``). Split search is exact over the distinct values each
feature takes in the training data; ties prefer the lowest feature index and
then the lowest threshold.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.special import expit

from .artifacts import read_artifact, write_artifact
from .tabular import Dataset

GBT = "gbt"
RANDOM_FOREST = "random_forest"
MODEL_FORMAT = "causal-twin-model"
MODEL_VERSION = 1


class SchemaMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GbtParams:
    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    gamma: float = 0.0


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    bootstrap: bool = True


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

@dataclass
class Tree:
    """Flat array tree. Leaves have ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            n = node[idx]
            go_left = x[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=np.int64),
                   np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=float))


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self) -> int:
        for lst, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1),
                       (self.right, -1), (self.value, 0.0)):
            lst.append(v)
        return len(self.feature) - 1

    def tree(self) -> Tree:
        return Tree(np.asarray(self.feature, dtype=np.int64), np.asarray(self.threshold),
                    np.asarray(self.left, dtype=np.int64), np.asarray(self.right, dtype=np.int64),
                    np.asarray(self.value))


class _Binned:
    """Feature matrix recoded to per-feature ranks of its distinct training values."""

    def __init__(self, x: np.ndarray):
        self.uniques = [np.unique(x[:, j]) for j in range(x.shape[1])]
        self.codes = np.column_stack([np.searchsorted(u, x[:, j])
                                      for j, u in enumerate(self.uniques)])
        self.n_bins = [len(u) for u in self.uniques]

    def threshold(self, j: int, b: int) -> float:
        # split between distinct values b and b+1: midpoint
        u = self.uniques[j]
        return float((u[b] + u[b + 1]) / 2.0)


def _best_split(binned: _Binned, rows: np.ndarray, feats, score_fn, stats: np.ndarray,
                min_leaf_ok):
    """Scan each feature's cumulative statistics; return (gain, j, bin) of the best split.

    ``stats`` is an (n, m) array of per-row additive statistics; ``score_fn``
    maps summed statistics (..., m) to a node score, larger is better.
    """
    best = (0.0, -1, -1)
    total = stats[rows].sum(axis=0)
    parent = score_fn(total)
    for j in feats:
        nb = binned.n_bins[j]
        if nb < 2:
            continue
        codes = binned.codes[rows, j]
        sr = stats[rows]
        hist = np.column_stack([np.bincount(codes, weights=sr[:, k], minlength=nb)
                                for k in range(sr.shape[1])])
        left = np.cumsum(hist, axis=0)[:-1]
        right = total - left
        ok = min_leaf_ok(left, right)
        if not ok.any():
            continue
        gain = score_fn(left) + score_fn(right) - parent
        gain = np.where(ok, gain, -np.inf)
        b = int(np.argmax(gain))
        if gain[b] > best[0] + 1e-12:
            best = (float(gain[b]), j, b)
    return best


def _grow_gbt_tree(binned: _Binned, g: np.ndarray, h: np.ndarray, hp: GbtParams) -> Tree:
    lam = hp.reg_lambda
    st = np.column_stack([g, h])

    def score(s):
        return s[..., 0] ** 2 / (s[..., 1] + lam)

    def ok(left, right):
        return (left[:, 1] >= hp.min_child_weight) & (right[:, 1] >= hp.min_child_weight)

    bld = _Builder()
    root = bld.add()
    stack = [(root, np.arange(len(g)), 0)]
    feats = range(binned.codes.shape[1])
    while stack:
        node, rows, depth = stack.pop()
        gs, hs = g[rows].sum(), h[rows].sum()
        bld.value[node] = -hp.learning_rate * gs / (hs + lam)
        if depth >= hp.max_depth or len(rows) < 2:
            continue
        gain, j, b = _best_split(binned, rows, feats, score, st, ok)
        if j < 0 or 0.5 * gain - hp.gamma <= 0:
            continue
        mask = binned.codes[rows, j] <= b
        bld.feature[node] = j
        bld.threshold[node] = binned.threshold(j, b)
        lft, rgt = bld.add(), bld.add()
        bld.left[node], bld.right[node] = lft, rgt
        stack.append((rgt, rows[~mask], depth + 1))
        stack.append((lft, rows[mask], depth + 1))
    return bld.tree()


def _grow_gini_tree(binned: _Binned, y: np.ndarray, rows: np.ndarray, hp: ForestParams,
                    n_feats: int, rng: np.random.Generator) -> Tree:
    p = binned.codes.shape[1]
    st = np.column_stack([np.ones(len(y)), y.astype(float)])

    def score(s):
        # negative weighted Gini impurity: -(n - (n1^2 + n0^2)/n)
        n, n1 = s[..., 0], s[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (n1 ** 2 + (n - n1) ** 2) / n - n
        return np.where(n > 0, val, 0.0)

    def ok(left, right):
        return (left[:, 0] >= hp.min_samples_leaf) & (right[:, 0] >= hp.min_samples_leaf)

    bld = _Builder()
    root = bld.add()
    stack = [(root, rows, 0)]
    while stack:
        node, r, depth = stack.pop()
        n1 = y[r].sum()
        bld.value[node] = n1 / len(r)
        if n1 == 0 or n1 == len(r) or len(r) < hp.min_samples_split:
            continue
        if hp.max_depth is not None and depth >= hp.max_depth:
            continue
        feats = np.sort(rng.choice(p, size=n_feats, replace=False))
        gain, j, b = _best_split(binned, r, feats, score, st, ok)
        if j < 0:
            continue
        mask = binned.codes[r, j] <= b
        bld.feature[node] = j
        bld.threshold[node] = binned.threshold(j, b)
        lft, rgt = bld.add(), bld.add()
        bld.left[node], bld.right[node] = lft, rgt
        stack.append((rgt, r[~mask], depth + 1))
        stack.append((lft, r[mask], depth + 1))
    return bld.tree()


# ---------------------------------------------------------------------------
# the classifier
# ---------------------------------------------------------------------------

def schema_fingerprint(ds: Dataset, features) -> str:
    blob = json.dumps([ds.spec(f).to_dict() for f in features], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ClassifierUnderTest:
    kind: str
    features: tuple[str, ...]
    target: str
    params: dict
    trees: list
    fingerprint: str
    base_score: float = 0.0
    train_loss: list = field(default_factory=list)

    def _matrix(self, ds: Dataset) -> np.ndarray:
        try:
            fp = schema_fingerprint(ds, self.features)
        except KeyError as e:
            raise SchemaMismatchError(str(e)) from None
        if fp != self.fingerprint:
            raise SchemaMismatchError("dataset schema does not match the training schema")
        return np.column_stack([ds.column(f) for f in self.features])

    def tree_outputs(self, ds: Dataset) -> np.ndarray:
        x = self._matrix(ds)
        return np.vstack([t.predict(x) for t in self.trees])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "features": list(self.features), "target": self.target,
                "params": self.params, "fingerprint": self.fingerprint,
                "base_score": self.base_score, "train_loss": self.train_loss,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassifierUnderTest":
        return cls(d["kind"], tuple(d["features"]), d["target"], dict(d["params"]),
                   [Tree.from_dict(t) for t in d["trees"]], d["fingerprint"],
                   float(d["base_score"]), list(d.get("train_loss", [])))


def _logloss(y: np.ndarray, margin: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def train(ds: Dataset, target: str, kind: str = GBT, hp=None, seed: int = 0) -> ClassifierUnderTest:
    if target not in ds.names:
        raise KeyError(f"unknown target {target!r}")
    y = ds.column(target)
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("target must be binary (encoded 0/1)")
    if len(np.unique(y)) < 2:
        raise ValueError("target has a single class")
    if ds.n_rows < 20:
        raise ValueError("need at least 20 rows to train")
    features = tuple(n for n in ds.names if n != target)
    x = np.column_stack([ds.column(f) for f in features])
    binned = _Binned(x)
    fp = schema_fingerprint(ds, features)
    if kind == GBT:
        hp = hp or GbtParams()
        margin = np.zeros(len(y))
        trees, losses = [], [_logloss(y, margin)]
        for _ in range(hp.n_rounds):
            p = expit(margin)
            tree = _grow_gbt_tree(binned, p - y, p * (1 - p), hp)
            margin = margin + tree.predict(x)
            trees.append(tree)
            losses.append(_logloss(y, margin))
        return ClassifierUnderTest(GBT, features, target, _params(hp), trees, fp, 0.0, losses)
    if kind == RANDOM_FOREST:
        hp = hp or ForestParams()
        rng = np.random.default_rng(seed)
        n_feats = max(1, int(math.sqrt(len(features))))
        trees = []
        for _ in range(hp.n_trees):
            rows = rng.integers(0, len(y), len(y)) if hp.bootstrap else np.arange(len(y))
            trees.append(_grow_gini_tree(binned, y, np.sort(rows), hp, n_feats, rng))
        return ClassifierUnderTest(RANDOM_FOREST, features, target, _params(hp), trees, fp)
    raise ValueError(f"unknown classifier kind {kind!r}")


def _params(hp) -> dict:
    return {f.name: getattr(hp, f.name) for f in fields(hp)}


def predict_proba(model: ClassifierUnderTest, ds: Dataset) -> np.ndarray:
    out = model.tree_outputs(ds)
    if model.kind == GBT:
        return expit(model.base_score + out.sum(axis=0))
    return out.mean(axis=0)


def predict(model: ClassifierUnderTest, ds: Dataset) -> np.ndarray:
    return (predict_proba(model, ds) >= 0.5).astype(int)


def save_model(model: ClassifierUnderTest, path: str | Path) -> None:
    write_artifact(path, MODEL_FORMAT, MODEL_VERSION, model.to_dict())


def load_model(path: str | Path) -> ClassifierUnderTest:
    return ClassifierUnderTest.from_dict(read_artifact(path, MODEL_FORMAT, MODEL_VERSION))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

METRIC_NAMES = ("accuracy", "balanced_accuracy", "recall", "specificity", "precision", "f1",
                "auroc", "pr_auc")


@dataclass(frozen=True)
class MetricsVector:
    accuracy: float
    balanced_accuracy: float
    recall: float
    specificity: float
    precision: float
    f1: float
    auroc: float = float("nan")
    pr_auc: float = float("nan")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_NAMES}


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else 0.0


def confusion_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    """Threshold metrics; an empty denominator yields 0 (e.g. precision with no positives)."""
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    recall = _ratio(tp, tp + fn)
    spec = _ratio(tn, tn + fp)
    prec = _ratio(tp, tp + fp)
    return {"accuracy": (tp + tn) / len(y_true), "balanced_accuracy": (recall + spec) / 2,
            "recall": recall, "specificity": spec, "precision": prec,
            "f1": _ratio(2 * prec * recall, prec + recall)}


def auroc(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney U / (n1 n0) with midranks for ties."""
    from scipy.stats import rankdata
    y_true = np.asarray(y_true).astype(int)
    n1 = int(y_true.sum())
    n0 = len(y_true) - n1
    if n1 == 0 or n0 == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[y_true == 1].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def pr_auc(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Average precision: step-wise area under the precision-recall curve."""
    y_true = np.asarray(y_true).astype(int)
    n1 = int(y_true.sum())
    if n1 == 0 or n1 == len(y_true):
        return float("nan")
    order = np.argsort(-np.asarray(scores), kind="stable")
    s = np.asarray(scores)[order]
    y = y_true[order]
    tps = np.cumsum(y)
    fps = np.cumsum(1 - y)
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]  # end of each tied score block
    tp, fp = tps[last], fps[last]
    precision = tp / (tp + fp)
    recall = tp / n1
    prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev) * precision))


def metrics_from_scores(y_true: np.ndarray, scores: np.ndarray) -> MetricsVector:
    if len(y_true) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    cm = confusion_metrics(y_true, (np.asarray(scores) >= 0.5).astype(int))
    return MetricsVector(**cm, auroc=auroc(y_true, scores), pr_auc=pr_auc(y_true, scores))


def evaluate(model: ClassifierUnderTest, ds: Dataset, target: str | None = None) -> MetricsVector:
    target = target or model.target
    if ds.n_rows == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return metrics_from_scores(ds.column(target), predict_proba(model, ds))
