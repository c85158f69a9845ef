"""Structural causal model twins: mechanism fitting, ancestral sampling, interventions.

Regression mechanisms take parent values in their encoded form (level index for
categorical parents, normalized value for numeric ones). With
``center_parents`` the linear predictor is ``b + beta . (pa - center)`` where
``center`` holds the training means of the parents, so scaling ``beta`` weakens
the dependence without moving the operating point of the child.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .artifacts import ArtifactError, read_artifact, write_artifact
from .graph import GraphError, MixedGraph, topological_order
from .tabular import ColumnSpec, Dataset

logger = logging.getLogger(__name__)

FORMAT_NAME = "causal-twin-scm"
FORMAT_VERSION = 1
GAUSSIAN_THRESHOLD = "gaussian_threshold"
MATCHED = "matched"
# Gaussian scale whose CDF best tracks the logistic sigmoid (probit/logit scaling)
PROBIT_LOGIT_SCALE = 1.702
BERNOULLI = "bernoulli"


class FitError(RuntimeError):
    pass


ScmFormatError = ArtifactError


def _vec(x) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(x, dtype=float).ravel())


# ---------------------------------------------------------------------------
# mechanisms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearGaussianMech:
    parents: tuple[str, ...]
    beta: tuple[float, ...]
    intercept: float
    sigma: float
    center: tuple[float, ...] = ()
    kind = "linear_gaussian"

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "beta", _vec(self.beta))
        object.__setattr__(self, "center", _vec(self.center) or (0.0,) * len(self.parents))
        if len(self.beta) != len(self.parents) or len(self.center) != len(self.parents):
            raise ValueError("beta/center length must match parents")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")

    def predictor(self, pa: np.ndarray) -> np.ndarray:
        return self.intercept + (pa - np.asarray(self.center)) @ np.asarray(self.beta)

    def draw(self, pa: np.ndarray, rng: np.random.Generator, link_noise: str) -> np.ndarray:
        return self.predictor(pa) + rng.normal(0.0, 1.0, len(pa)) * self.sigma

    def scaled(self, parent: str, factor: float) -> "LinearGaussianMech":
        b = list(self.beta)
        b[self.parents.index(parent)] *= factor
        return replace(self, beta=tuple(b))

    def n_params(self) -> int:
        return len(self.beta) + 2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parents": list(self.parents), "beta": list(self.beta),
                "intercept": self.intercept, "sigma": self.sigma, "center": list(self.center)}


@dataclass(frozen=True)
class BinaryLogisticMech:
    """Level 1 is produced when ``sigmoid(eta + eps) > 0.5``, eps ~ N(0, noise_sigma^2)."""

    parents: tuple[str, ...]
    beta: tuple[float, ...]
    intercept: float
    noise_sigma: float = 1.0
    center: tuple[float, ...] = ()
    kind = "binary_logistic"

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "beta", _vec(self.beta))
        object.__setattr__(self, "center", _vec(self.center) or (0.0,) * len(self.parents))
        if len(self.beta) != len(self.parents) or len(self.center) != len(self.parents):
            raise ValueError("beta/center length must match parents")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")

    def predictor(self, pa: np.ndarray) -> np.ndarray:
        return self.intercept + (pa - np.asarray(self.center)) @ np.asarray(self.beta)

    def prob(self, pa: np.ndarray) -> np.ndarray:
        return expit(self.predictor(pa))

    def draw(self, pa: np.ndarray, rng: np.random.Generator, link_noise: str) -> np.ndarray:
        eta = self.predictor(pa)
        u = rng.normal(0.0, 1.0, len(pa))
        if link_noise == BERNOULLI:
            return (rng.random(len(pa)) < expit(eta)).astype(float)
        return (expit(eta + self.noise_sigma * u) > 0.5).astype(float)

    def scaled(self, parent: str, factor: float) -> "BinaryLogisticMech":
        b = list(self.beta)
        b[self.parents.index(parent)] *= factor
        return replace(self, beta=tuple(b))

    def n_params(self) -> int:
        return len(self.beta) + 2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parents": list(self.parents), "beta": list(self.beta),
                "intercept": self.intercept, "noise_sigma": self.noise_sigma,
                "center": list(self.center)}


@dataclass(frozen=True)
class MultinomialSoftmaxMech:
    """K x |parents| coefficient matrix; level = argmax_k(eta_k + eps_k)."""

    parents: tuple[str, ...]
    coef: tuple[tuple[float, ...], ...]
    intercepts: tuple[float, ...]
    noise_sigma: float = 1.0
    center: tuple[float, ...] = ()
    kind = "multinomial_softmax"

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "intercepts", _vec(self.intercepts))
        k = len(self.intercepts)
        coef = np.asarray(self.coef, dtype=float).reshape(k, len(self.parents))
        object.__setattr__(self, "coef", tuple(_vec(r) for r in coef))
        object.__setattr__(self, "center", _vec(self.center) or (0.0,) * len(self.parents))
        if k < 3:
            raise ValueError("multinomial mechanism needs K >= 3")
        if len(self.center) != len(self.parents):
            raise ValueError("center length must match parents")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def n_levels(self) -> int:
        return len(self.intercepts)

    def predictor(self, pa: np.ndarray) -> np.ndarray:
        w = np.asarray(self.coef).reshape(self.n_levels, len(self.parents))
        return np.asarray(self.intercepts) + (pa - np.asarray(self.center)) @ w.T

    def prob(self, pa: np.ndarray) -> np.ndarray:
        return softmax(self.predictor(pa), axis=1)

    def draw(self, pa: np.ndarray, rng: np.random.Generator, link_noise: str) -> np.ndarray:
        eta = self.predictor(pa)
        u = rng.normal(0.0, 1.0, eta.shape)
        if link_noise == BERNOULLI:
            cdf = np.cumsum(softmax(eta, axis=1), axis=1)
            r = rng.random((len(pa), 1))
            return np.minimum((r > cdf).sum(axis=1), self.n_levels - 1).astype(float)
        # softmax is monotone, so the argmax of the noisy probabilities is the argmax of the scores
        return np.argmax(eta + self.noise_sigma * u, axis=1).astype(float)

    def scaled(self, parent: str, factor: float) -> "MultinomialSoftmaxMech":
        w = np.asarray(self.coef, dtype=float).reshape(self.n_levels, len(self.parents)).copy()
        w[:, self.parents.index(parent)] *= factor
        return replace(self, coef=tuple(_vec(r) for r in w))

    def n_params(self) -> int:
        return self.n_levels * (len(self.parents) + 1) + 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parents": list(self.parents),
                "coef": [list(r) for r in self.coef], "intercepts": list(self.intercepts),
                "noise_sigma": self.noise_sigma, "center": list(self.center)}


@dataclass(frozen=True)
class GmmRootMech:
    weights: tuple[float, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]
    variance_floor: float = 1e-6
    parents = ()
    kind = "gmm_root"

    def __post_init__(self):
        w, m, v = _vec(self.weights), _vec(self.means), _vec(self.variances)
        if not (len(w) == len(m) == len(v)) or not w:
            raise ValueError("weights, means and variances must have one equal, non-zero length")
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("GMM weights must form a simplex")
        if min(v) < self.variance_floor:
            raise ValueError("GMM variance below floor")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        from scipy.stats import norm
        x = np.asarray(x, dtype=float)[..., None]
        return (np.asarray(self.weights) *
                norm.cdf(x, np.asarray(self.means), np.sqrt(self.variances))).sum(-1)

    def draw(self, pa: np.ndarray, rng: np.random.Generator, link_noise: str) -> np.ndarray:
        n = len(pa)
        comp = rng.choice(self.n_components, size=n, p=np.asarray(self.weights))
        z = rng.normal(0.0, 1.0, n)
        return np.asarray(self.means)[comp] + np.sqrt(np.asarray(self.variances))[comp] * z

    def n_params(self) -> int:
        return 3 * self.n_components - 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": list(self.weights), "means": list(self.means),
                "variances": list(self.variances), "variance_floor": self.variance_floor}


@dataclass(frozen=True)
class EmpiricalRootMech:
    levels: tuple[str, ...]
    frequencies: tuple[float, ...]
    parents = ()
    kind = "empirical_root"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        f = _vec(self.frequencies)
        if len(f) != len(self.levels) or not f:
            raise ValueError("one frequency per level required")
        if min(f) < 0 or abs(sum(f) - 1.0) > 1e-9:
            raise ValueError("frequencies must form a simplex")
        object.__setattr__(self, "frequencies", f)

    def draw(self, pa: np.ndarray, rng: np.random.Generator, link_noise: str) -> np.ndarray:
        return rng.choice(len(self.levels), size=len(pa), p=np.asarray(self.frequencies)).astype(float)

    def n_params(self) -> int:
        return len(self.levels) - 1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels": list(self.levels),
                "frequencies": list(self.frequencies)}


MECHANISMS = {c.kind: c for c in (LinearGaussianMech, BinaryLogisticMech, MultinomialSoftmaxMech,
                                  GmmRootMech, EmpiricalRootMech)}
ROOT_KINDS = {"gmm_root", "empirical_root"}


def mechanism_from_dict(d: Mapping):
    d = dict(d)
    kind = d.pop("kind")
    if kind not in MECHANISMS:
        raise ScmFormatError(f"unknown mechanism kind {kind!r}")
    if kind == "multinomial_softmax":
        d["coef"] = tuple(tuple(r) for r in d["coef"])
    return MECHANISMS[kind](**d)


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    seed: int = 0
    max_components: int = 5
    variance_floor: float = 1e-6
    em_restarts: int = 5
    max_iter: int = 5000
    em_tol: float = 1e-6
    noise_sigma: float | str = 1.0
    link_noise: str = GAUSSIAN_THRESHOLD
    center_parents: bool = True
    ridge: float = 1.0

    def __post_init__(self):
        if self.link_noise not in (GAUSSIAN_THRESHOLD, BERNOULLI):
            raise ValueError(f"unknown link_noise {self.link_noise!r}")
        if self.max_components < 1 or self.em_restarts < 1 or self.max_iter < 1:
            raise ValueError("max_components, em_restarts and max_iter must be >= 1")
        if self.noise_sigma != MATCHED and not float(self.noise_sigma) >= 0:
            raise ValueError("noise_sigma must be >= 0 or 'matched'")
        if self.ridge < 0 or self.variance_floor <= 0:
            raise ValueError("ridge must be >= 0 and variance_floor > 0")

    def sigma_for(self, n_levels: int) -> float:
        """Pre-link noise scale for a categorical node.

        ``matched`` picks the scale under which the noisy threshold (binary) or
        noisy argmax (pairwise contrasts, hence the sqrt 2) reproduces the
        fitted logit probabilities as closely as a Gaussian can.
        """
        if self.noise_sigma != MATCHED:
            return float(self.noise_sigma)
        return PROBIT_LOGIT_SCALE if n_levels == 2 else PROBIT_LOGIT_SCALE / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class Scm:
    graph: MixedGraph
    columns: tuple[ColumnSpec, ...]
    mechanisms: Mapping[str, object]
    link_noise: str = GAUSSIAN_THRESHOLD
    fit_info: Mapping = field(default_factory=dict)

    def __post_init__(self):
        g = self.graph
        if not g.is_dag:
            raise GraphError("an SCM needs a fully directed graph")
        names = [c.name for c in self.columns]
        if set(names) != set(g.nodes) or len(names) != len(g.nodes):
            raise GraphError("graph nodes and columns differ")
        if set(self.mechanisms) != set(names):
            raise ValueError("every node needs exactly one mechanism")
        for c in self.columns:
            m = self.mechanisms[c.name]
            pa = g.parents(c.name)
            if set(m.parents) != set(pa) or len(m.parents) != len(pa):
                raise ValueError(f"mechanism parents of {c.name!r} do not match the graph")
            if bool(pa) == (m.kind in ROOT_KINDS):
                raise ValueError(f"node {c.name!r}: root/regression mechanism mismatch")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "mechanisms", dict(self.mechanisms))
        object.__setattr__(self, "order", topological_order(g))

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def mechanism(self, node: str):
        return self.mechanisms[node]

    def with_mechanisms(self, updates: Mapping[str, object]) -> "Scm":
        mechs = dict(self.mechanisms)
        mechs.update(updates)
        return Scm(self.graph, self.columns, mechs, self.link_noise, self.fit_info)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _fit_gmm_once(x: np.ndarray, c: int, rng: np.random.Generator, cfg: FitConfig):
    n = len(x)
    var0 = max(float(x.var()), cfg.variance_floor)
    means = np.sort(rng.choice(x, size=c, replace=False)) if c > 1 else np.array([x.mean()])
    variances = np.full(c, var0)
    weights = np.full(c, 1.0 / c)
    prev = -np.inf
    for it in range(1, cfg.max_iter + 1):
        logp = (np.log(weights) - 0.5 * np.log(2 * np.pi * variances)
                - 0.5 * (x[:, None] - means) ** 2 / variances)
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        resp = np.exp(logp - norm[:, None])
        nk = resp.sum(axis=0) + 1e-12
        weights = nk / n
        means = (resp * x[:, None]).sum(axis=0) / nk
        variances = np.maximum((resp * (x[:, None] - means) ** 2).sum(axis=0) / nk,
                               cfg.variance_floor)
        if abs(ll - prev) <= cfg.em_tol * n:  # change of the mean log-likelihood
            break
        prev = ll
    else:
        return None
    logp = (np.log(weights) - 0.5 * np.log(2 * np.pi * variances)
            - 0.5 * (x[:, None] - means) ** 2 / variances)
    ll = float(logsumexp(logp, axis=1).sum())
    return ll, weights / weights.sum(), means, variances, it


def fit_gmm(x: np.ndarray, cfg: FitConfig, rng: np.random.Generator) -> tuple[GmmRootMech, dict]:
    """EM with restarts per component count; the count is picked by BIC."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    best = None
    scores = {}
    for c in range(1, min(cfg.max_components, len(np.unique(x))) + 1):
        runs = [r for r in (_fit_gmm_once(x, c, rng, cfg)
                            for _ in range(1 if c == 1 else cfg.em_restarts)) if r is not None]
        if not runs:
            raise FitError(f"EM did not converge for {c} components within {cfg.max_iter} iterations")
        ll, w, m, v, _ = max(runs, key=lambda r: r[0])
        bic = -2.0 * ll + (3 * c - 1) * math.log(n)
        scores[c] = bic
        if best is None or bic < best[0]:
            best = (bic, ll, w, m, v)
    _, ll, w, m, v = best
    order = np.argsort(m, kind="stable")
    mech = GmmRootMech(tuple(w[order]), tuple(m[order]), tuple(v[order]), cfg.variance_floor)
    return mech, {"log_likelihood": ll, "bic": {str(k): s for k, s in scores.items()}}


def fit_logistic(x: np.ndarray, y: np.ndarray, ridge: float, tol: float = 1e-10,
                 max_iter: int = 200) -> tuple[np.ndarray, float, int]:
    """Ridge-penalized logistic regression by Newton / IRLS; intercept unpenalized."""
    n, p = x.shape
    xd = np.column_stack([np.ones(n), x])
    w = np.zeros(p + 1)
    pen = np.full(p + 1, ridge)
    pen[0] = 0.0
    for it in range(1, max_iter + 1):
        mu = expit(xd @ w)
        grad = xd.T @ (mu - y) + pen * w
        hess = (xd * (mu * (1 - mu))[:, None]).T @ xd + np.diag(pen) + 1e-10 * np.eye(p + 1)
        step = np.linalg.solve(hess, grad)
        w -= step
        if np.max(np.abs(step)) < tol:
            return w[1:], float(w[0]), it
    raise FitError("logistic regression did not converge")


def fit_softmax(x: np.ndarray, y: np.ndarray, k: int, ridge: float, tol: float = 1e-9,
                max_iter: int = 200) -> tuple[np.ndarray, np.ndarray, int]:
    """Full K-row multinomial logistic regression by Newton steps.

    The ridge makes the over-parametrized K-row form identifiable for the
    slopes; intercepts get a tiny penalty and are re-centred to sum to zero.
    """
    n, p = x.shape
    xd = np.column_stack([np.ones(n), x])
    d = p + 1
    w = np.zeros((k, d))
    onehot = np.eye(k)[y.astype(int)]
    pen = np.tile(np.r_[1e-6, np.full(p, ridge)], k)
    for it in range(1, max_iter + 1):
        prob = softmax(xd @ w.T, axis=1)
        grad = ((prob - onehot).T @ xd).ravel() + pen * w.ravel()
        hess = np.zeros((k * d, k * d))
        for a in range(k):
            for b in range(a, k):
                wt = prob[:, a] * ((a == b) - prob[:, b])
                block = (xd * wt[:, None]).T @ xd
                hess[a * d:(a + 1) * d, b * d:(b + 1) * d] = block
                hess[b * d:(b + 1) * d, a * d:(a + 1) * d] = block
        hess += np.diag(pen)
        step = np.linalg.lstsq(hess, grad, rcond=None)[0].reshape(k, d)
        step[:, 0] -= step[:, 0].mean()  # a common intercept shift leaves softmax unchanged
        w -= step
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise FitError("multinomial regression did not converge")
    w[:, 0] -= w[:, 0].mean()
    return w[:, 1:], w[:, 0], it


def fit_scm(ds: Dataset, g: MixedGraph, cfg: FitConfig = FitConfig()) -> Scm:
    if not g.is_dag:
        raise GraphError("fit_scm needs a DAG; finalize the discovered graph first")
    if set(g.nodes) != set(ds.names):
        raise GraphError("graph nodes and dataset columns differ")
    topological_order(g)  # raises on cycles
    rng = np.random.default_rng(cfg.seed)
    mechs: dict = {}
    info: dict = {"config": _config_dict(cfg), "nodes": {}}
    for spec in ds.columns:
        node = spec.name
        y = ds.column(node)
        pa = g.parents(node)
        if not pa:
            if spec.is_categorical:
                counts = np.bincount(y.astype(int), minlength=spec.n_levels).astype(float)
                mechs[node] = EmpiricalRootMech(spec.levels, tuple(counts / counts.sum()))
                info["nodes"][node] = {"counts": counts.tolist()}
            else:
                mechs[node], info["nodes"][node] = fit_gmm(y, cfg, rng)
            continue
        x = np.column_stack([ds.column(p) for p in pa])
        center = x.mean(axis=0) if cfg.center_parents else np.zeros(len(pa))
        xc = x - center
        if not spec.is_categorical:
            xd = np.column_stack([np.ones(len(y)), xc])
            coef = np.linalg.lstsq(xd, y, rcond=None)[0]
            resid = y - xd @ coef
            sigma = float(np.sqrt(np.mean(resid ** 2)))
            mechs[node] = LinearGaussianMech(tuple(pa), tuple(coef[1:]), float(coef[0]),
                                             sigma, tuple(center))
            info["nodes"][node] = {"residual_std": sigma}
            continue
        observed = np.unique(y)
        if len(observed) < 2:
            raise FitError(f"column {node!r} has a single observed level; cannot regress it")
        if spec.n_levels == 2:
            beta, b0, it = fit_logistic(xc, y, cfg.ridge)
            mechs[node] = BinaryLogisticMech(tuple(pa), tuple(beta), b0, cfg.sigma_for(2),
                                             tuple(center))
        else:
            coef, icpt, it = fit_softmax(xc, y, spec.n_levels, cfg.ridge)
            mechs[node] = MultinomialSoftmaxMech(tuple(pa), tuple(map(tuple, coef)), tuple(icpt),
                                                 cfg.sigma_for(spec.n_levels), tuple(center))
        info["nodes"][node] = {"newton_iterations": it}
    return Scm(g, ds.columns, mechs, cfg.link_noise, info)


def _config_dict(cfg: FitConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


# ---------------------------------------------------------------------------
# sampling and interventions
# ---------------------------------------------------------------------------

def sample(scm: Scm, n: int, seed: int | Sequence[int]) -> Dataset:
    """Ancestral sampling. Node ``i`` draws from its own stream seeded by
    ``(*seed, i)``, so editing one mechanism leaves every non-descendant
    bit-identical for a given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    key = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    names = scm.names
    out = np.zeros((n, len(names)))
    pos = {c: i for i, c in enumerate(names)}
    for node in scm.order:
        i = pos[node]
        mech = scm.mechanisms[node]
        pa = out[:, [pos[p] for p in mech.parents]] if mech.parents else np.zeros((n, 0))
        rng = np.random.default_rng(key + [i])
        vals = mech.draw(pa, rng, scm.link_noise)
        spec = scm.columns[i]
        if spec.normalization is not None:
            vals = np.clip(vals, 0.0, 1.0)
        out[:, i] = vals
    return Dataset(scm.columns, out)


def intervene_scale(scm: Scm, targets: Sequence[tuple[str, str, float]]) -> Scm:
    """Scale the coefficients linking ``parent`` to ``child`` by ``1 + delta``."""
    mechs = dict(scm.mechanisms)
    for child, parent, delta in targets:
        if child not in mechs:
            raise KeyError(f"unknown node {child!r}")
        if (parent, child) not in scm.graph.directed:
            raise GraphError(f"no edge {parent}->{child} in the twin")
        if mechs[child].kind in ROOT_KINDS:
            raise ValueError(f"{child!r} has a root mechanism; use adjust_root")
        mechs[child] = mechs[child].scaled(parent, 1.0 + float(delta))
    return Scm(scm.graph, scm.columns, mechs, scm.link_noise, scm.fit_info)


@dataclass(frozen=True)
class RootEdit:
    """Edit of a root distribution. Unset fields keep their fitted values."""

    mean_shift: float = 0.0
    variance_scale: float = 1.0
    weights: tuple[float, ...] | None = None
    means: tuple[float, ...] | None = None
    variances: tuple[float, ...] | None = None
    frequencies: tuple[float, ...] | None = None


def _renormalize(v, what: str) -> tuple[float, ...]:
    a = np.asarray(v, dtype=float)
    if (a < 0).any() or not np.isfinite(a).all() or a.sum() <= 0:
        raise ValueError(f"{what} cannot be normalized to a simplex")
    return tuple(a / a.sum())


def adjust_root(scm: Scm, node: str, edit: RootEdit) -> Scm:
    mech = scm.mechanisms[node]
    if mech.kind not in ROOT_KINDS:
        raise ValueError(f"{node!r} is not a root")
    if mech.kind == "empirical_root":
        if edit.frequencies is None:
            return scm
        if len(edit.frequencies) != len(mech.levels):
            raise ValueError("one frequency per level required")
        new = EmpiricalRootMech(mech.levels, _renormalize(edit.frequencies, "frequencies"))
    else:
        weights = mech.weights if edit.weights is None else _renormalize(edit.weights, "weights")
        means = np.asarray(mech.means if edit.means is None else edit.means, dtype=float)
        variances = np.asarray(mech.variances if edit.variances is None else edit.variances,
                               dtype=float) * edit.variance_scale
        if (variances < 0).any():
            raise ValueError("negative variance")
        if (variances < mech.variance_floor).any():
            raise ValueError("variance below floor")
        new = GmmRootMech(weights, tuple(means + edit.mean_shift), tuple(variances),
                          mech.variance_floor)
    return scm.with_mechanisms({node: new})


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def scm_to_dict(scm: Scm) -> dict:
    return {
        "graph": scm.graph.to_dict(),
        "columns": [c.to_dict() for c in scm.columns],
        "link_noise": scm.link_noise,
        "mechanisms": {n: scm.mechanisms[n].to_dict() for n in scm.names},
        "fit_info": scm.fit_info,
    }


def scm_from_dict(d: Mapping) -> Scm:
    return Scm(MixedGraph.from_dict(d["graph"]),
               tuple(ColumnSpec.from_dict(c) for c in d["columns"]),
               {n: mechanism_from_dict(m) for n, m in d["mechanisms"].items()},
               d.get("link_noise", GAUSSIAN_THRESHOLD), d.get("fit_info", {}))


def save_scm(scm: Scm, path: str | Path) -> None:
    write_artifact(path, FORMAT_NAME, FORMAT_VERSION, scm_to_dict(scm))


def load_scm(path: str | Path) -> Scm:
    return scm_from_dict(read_artifact(path, FORMAT_NAME, FORMAT_VERSION))
