"""Three-tier twin validation: covariance fit, marginal fidelity, predictive consistency."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .scm import Scm, sample
from .tabular import Dataset, covariance_matrix

logger = logging.getLogger(__name__)

SPD_FLOOR = 1e-10
RIDGE = 1e-8


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class FitIndices:
    chi2: float
    df: int
    rmsea: float
    n: int
    p: int


def _check_spd(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{what} must be square")
    if not np.allclose(m, m.T, atol=1e-12, rtol=0):
        raise ValidationError(f"{what} is not symmetric")
    if np.linalg.eigvalsh(m).min() <= SPD_FLOOR:
        raise ValidationError(f"{what} is not positive definite")
    return m


def chi2_rmsea(s: np.ndarray, sigma: np.ndarray, n: int, df: int) -> FitIndices:
    """Maximum-likelihood discrepancy and RMSEA between observed ``s`` and model ``sigma``."""
    if n <= 1:
        raise ValidationError("n must exceed 1")
    if df < 1:
        raise ValidationError("df must be >= 1")
    s = _check_spd(s, "observed covariance")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != s.shape:
        raise ValidationError("covariance matrices differ in dimension")
    if not np.allclose(sigma, sigma.T, atol=1e-12, rtol=0):
        raise ValidationError("model covariance is not symmetric")
    if np.linalg.eigvalsh(sigma).min() <= SPD_FLOOR:
        logger.warning("model covariance is near-singular; adding a %.0e ridge", RIDGE)
        sigma = sigma + RIDGE * np.eye(len(sigma))
        if np.linalg.eigvalsh(sigma).min() <= 0:
            raise ValidationError("model covariance is singular")
    p = s.shape[0]
    if np.array_equal(s, sigma):
        chi2 = 0.0
    else:
        _, ld_sigma = np.linalg.slogdet(sigma)
        _, ld_s = np.linalg.slogdet(s)
        trace = float(np.trace(np.linalg.solve(sigma, s)))
        chi2 = (n - 1) * (ld_sigma - ld_s + trace - p)
    rmsea = math.sqrt(max(0.0, (chi2 - df) / (df * (n - 1))))
    return FitIndices(float(chi2), int(df), rmsea, int(n), p)


def model_covariance(scm: Scm, n_mc: int = 50000, seed: int = 0) -> np.ndarray:
    """Monte Carlo covariance of the twin in encoded space."""
    if n_mc < 1000:
        raise ValueError("n_mc must be >= 1000")
    gen = sample(scm, n_mc, seed)
    cov = covariance_matrix(gen)
    rank = np.linalg.matrix_rank(cov)
    if rank < cov.shape[0]:
        logger.warning("model covariance is rank deficient (rank %d of %d)", rank, cov.shape[0])
    return cov


def parameter_count(scm: Scm) -> int:
    return sum(scm.mechanisms[n].n_params() for n in scm.names)


def degrees_of_freedom(scm: Scm) -> int:
    p = len(scm.names)
    t = parameter_count(scm)
    df = p * (p + 1) // 2 - t
    if df < 1:
        logger.warning("twin has %d free parameters for %d moments; df clamped to 1",
                       t, p * (p + 1) // 2)
        return 1
    return df


@dataclass(frozen=True)
class MarginalRecord:
    column: str
    test: str
    statistic: float
    p_value: float
    passed: bool


def cramers_v(a: np.ndarray, b: np.ndarray, n_levels: int) -> float:
    """V of the source-label x level contingency table built from two samples."""
    table = np.vstack([np.bincount(a.astype(int), minlength=n_levels),
                       np.bincount(b.astype(int), minlength=n_levels)]).astype(float)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 0.0
    n = table.sum()
    expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / n
    chi2 = float(((table - expected) ** 2 / expected).sum())
    return math.sqrt(chi2 / (n * (min(table.shape) - 1)))


def ks_2samp(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sample KS statistic with the asymptotic Kolmogorov p-value."""
    a, b = np.sort(a), np.sort(b)
    grid = np.concatenate([a, b])
    d = float(np.max(np.abs(np.searchsorted(a, grid, side="right") / len(a)
                             - np.searchsorted(b, grid, side="right") / len(b))))
    en = math.sqrt(len(a) * len(b) / (len(a) + len(b)))
    return d, float(stats.kstwobign.sf(d * en))


def marginal_fidelity(real: Dataset, gen: Dataset, alpha: float = 0.05,
                      v_threshold: float = 0.1) -> list[MarginalRecord]:
    if [c.to_dict() for c in real.columns] != [c.to_dict() for c in gen.columns]:
        raise ValidationError("real and generated data have different schemas")
    out = []
    for spec in real.columns:
        a, b = real.column(spec.name), gen.column(spec.name)
        if spec.is_categorical:
            v = cramers_v(a, b, spec.n_levels)
            out.append(MarginalRecord(spec.name, "cramers_v", v, float("nan"), v < v_threshold))
        else:
            d, p = ks_2samp(a, b)
            out.append(MarginalRecord(spec.name, "ks", d, p, p > alpha))
    return out


@dataclass(frozen=True)
class PredictiveRecord:
    model: str
    valid: dict
    gen: dict
    gap: dict


def predictive_consistency(model, d_valid: Dataset, d_gen: Dataset, target: str,
                           name: str | None = None) -> PredictiveRecord:
    from .classifiers import evaluate

    for ds in (d_valid, d_gen):
        if target not in ds.names:
            raise KeyError(f"target column {target!r} missing")
    mv = evaluate(model, d_valid, target).as_dict()
    mg = evaluate(model, d_gen, target).as_dict()
    gap = {k: abs(mv[k] - mg[k]) for k in mv}
    return PredictiveRecord(name or model.kind, mv, mg, gap)


@dataclass
class ValidationReport:
    fit: FitIndices
    marginals: list
    predictive: list = field(default_factory=list)
    rmsea_threshold: float = 0.08
    gap_metric: str = "f1"
    gap_tolerance: float = 0.02

    @property
    def accepted(self) -> bool:
        return (self.fit.rmsea <= self.rmsea_threshold
                and all(m.passed for m in self.marginals)
                and all(r.gap[self.gap_metric] <= self.gap_tolerance for r in self.predictive))

    def rows(self) -> list[list]:
        rows = [["global", "chi2", _fmt(self.fit.chi2), "", ""],
                ["global", "df", str(self.fit.df), "", ""],
                ["global", "rmsea", _fmt(self.fit.rmsea), _fmt(self.rmsea_threshold),
                 str(self.fit.rmsea <= self.rmsea_threshold).lower()]]
        for m in self.marginals:
            thr = "p>0.05" if m.test == "ks" else "V<0.1"
            stat = m.p_value if m.test == "ks" else m.statistic
            rows.append([f"marginal_{m.test}", m.column, _fmt(stat), thr, str(m.passed).lower()])
        for r in self.predictive:
            for k in r.valid:
                ok = "" if k != self.gap_metric else str(r.gap[k] <= self.gap_tolerance).lower()
                rows.append(["predictive", f"{r.model}:{k}:valid", _fmt(r.valid[k]), "", ""])
                rows.append(["predictive", f"{r.model}:{k}:gen", _fmt(r.gen[k]), "", ""])
                rows.append(["predictive", f"{r.model}:{k}:gap", _fmt(r.gap[k]),
                             _fmt(self.gap_tolerance) if ok else "", ok])
        rows.append(["summary", "accepted", "", "", str(self.accepted).lower()])
        return rows

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tier", "item", "statistic", "threshold", "pass"])
            w.writerows(self.rows())


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def validate_twin(scm: Scm, real: Dataset, d_valid: Dataset | None = None,
                  models: Sequence = (), target: str | None = None, n_mc: int = 50000,
                  seed: int = 0, rmsea_threshold: float = 0.08,
                  gap_tolerance: float = 0.02, n_gen: int = 10000) -> ValidationReport:
    """Run all three tiers. ``real`` is the data the twin was fitted on.

    The predictive tier scores the models on ``n_gen`` generated rows, so the
    gap is dominated by the sampling error of ``d_valid`` alone.
    """
    sigma = model_covariance(scm, n_mc, seed)
    fit = chi2_rmsea(covariance_matrix(real), sigma, real.n_rows, degrees_of_freedom(scm))
    gen = sample(scm, real.n_rows, seed + 1)
    marg = marginal_fidelity(real, gen)
    pred = []
    if models:
        if d_valid is None or target is None:
            raise ValueError("predictive consistency needs d_valid and target")
        d_gen = sample(scm, max(n_gen, d_valid.n_rows), seed + 2)
        pred = [predictive_consistency(m, d_valid, d_gen, target) for m in models]
    return ValidationReport(fit, marg, pred, rmsea_threshold, "f1", gap_tolerance)
