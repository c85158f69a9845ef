import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_twin.attribution import (ROBUST, UNTESTABLE, AttributionRecord, AttributionReport,
                                     drift_edge, per_feature_drift_sweep, rank_features,
                                     shapley_mc)
from causal_twin.classifiers import GbtParams, predict_proba, train
from causal_twin.drift import DriftScenario
from causal_twin.graph import MixedGraph
from causal_twin.scm import FitConfig, fit_scm, sample


def _exact(model, bg, row):
    return shapley_mc(model, bg, row, n_perms=None)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 599), st.integers(0, 1000))
def test_efficiency_exhaustive(toy, toy_model, i, seed):
    bg = toy.take(np.random.default_rng(seed).choice(toy.n_rows, 12, replace=False))
    row = toy.values[i]
    phi = _exact(toy_model, bg, row)
    assert len(phi) == 3
    target = predict_proba(toy_model, toy.take([i]))[0] - predict_proba(toy_model, bg).mean()
    assert sum(phi.values()) == pytest.approx(target, abs=1e-10)


def test_unused_feature_gets_zero(toy):
    # five stumps cannot use all three features
    model = train(toy, "y", "gbt", GbtParams(n_rounds=5, max_depth=1))
    used = {f for t in model.trees for f in np.asarray(t.feature)[np.asarray(t.feature) >= 0]}
    unused = [f for j, f in enumerate(model.features) if j not in used]
    assert unused
    phi = _exact(model, toy.take(np.arange(20)), toy.values[3])
    for f in unused:
        assert phi[f] == 0.0


def test_sampled_estimate_converges(toy, toy_model):
    bg = toy.take(np.arange(30))
    row = toy.values[100]
    exact = _exact(toy_model, bg, row)
    runs = np.array([[shapley_mc(toy_model, bg, row, 200, s)[f] for f in exact] for s in range(20)])
    se = runs.std(axis=0, ddof=1) / math.sqrt(len(runs))
    for j, f in enumerate(exact):
        assert abs(runs[:, j].mean() - exact[f]) <= 5 * se[j] + 1e-12


def test_rank_features_ignores_row_order(toy, toy_model):
    a = rank_features(toy_model, toy, n_rows=20, n_perms=20, seed=1)
    perm = np.random.default_rng(9).permutation(toy.n_rows)
    b = rank_features(toy_model, toy.take(perm), n_rows=20, n_perms=20, seed=1)
    assert a == b
    assert [f for f, _ in a][0] == "a"
    assert all(v1 >= v2 for (_, v1), (_, v2) in zip(a, a[1:]))


def test_shapley_input_checks(toy, toy_model):
    with pytest.raises(ValueError):
        shapley_mc(toy_model, toy.take([]), toy.values[0])
    with pytest.raises(ValueError):
        shapley_mc(toy_model, toy, toy.values[0][:2])
    with pytest.raises(ValueError):
        shapley_mc(toy_model, toy, toy.values[0], n_perms=0)


@pytest.fixture(scope="module")
def diamond():
    """s -> m1 -> t, s -> m2 -> t with |coef(m2)| > |coef(m1)|; z is disconnected."""
    from causal_twin.tabular import CATEGORICAL, ColumnSpec, Dataset
    rng = np.random.default_rng(0)
    n = 3000
    s = rng.integers(0, 2, n)
    m1 = np.where(rng.random(n) < 0.2, 1 - s, s)
    m2 = np.where(rng.random(n) < 0.2, 1 - s, s)
    z = rng.integers(0, 2, n)
    t = (rng.random(n) < 1 / (1 + np.exp(-(-2 + 0.5 * m1 + 3.0 * m2)))).astype(int)
    names = ("s", "m1", "m2", "z", "t")
    cols = tuple(ColumnSpec(c, CATEGORICAL, ("0", "1")) for c in names)
    ds = Dataset(cols, np.column_stack([s, m1, m2, z, t]))
    g = MixedGraph(names, frozenset({("s", "m1"), ("s", "m2"), ("m1", "t"), ("m2", "t")}))
    return ds, fit_scm(ds, g, FitConfig(noise_sigma="matched"))


def test_drift_edge_picks_strongest_mediator(diamond):
    _, scm = diamond
    assert drift_edge(scm, "s", "t") == ("m2", "t")
    assert drift_edge(scm, "m1", "t") == ("m1", "t")
    with pytest.raises(ValueError):
        drift_edge(scm, "z", "t")


def test_sweep_marks_unreachable_features(diamond, tmp_path):
    ds, scm = diamond
    model = train(sample(scm, 2000, 1), "t", "gbt", GbtParams(n_rounds=10, max_depth=2))
    sc = DriftScenario((("t", "m2", -0.5),), k_steps=4, step_eval_n=300)
    rep = per_feature_drift_sweep(scm, model, [("m2", 0.3), ("z", 0.01)], "t", sc, -0.9)
    m2, z = rep.records
    assert z == AttributionRecord("z", 0.01, math.inf, False, UNTESTABLE)
    assert m2.drift_tested and m2.drifted_edge == ("m2", "t")
    assert m2.delta_crit == ROBUST or m2.delta_crit < 0
    rep.to_csv(tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[2] == "z,0.01,inf,false,untestable,,"


def test_report_csv_format(tmp_path):
    rep = AttributionReport([AttributionRecord("f", 0.5, 2, True, -0.25, ("m", "t"),
                                               "consecutive_steps(3)")])
    rep.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[1] == \
        "f,0.5,2,true,-0.25,m->t,consecutive_steps(3)"
