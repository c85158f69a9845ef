import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.decomposition import PCA

from causal_twin.monitors import (MonitorConfig, histogram, js_divergence, ks_two_sample,
                                  monitor_stream, numeric_edges, pca_monitor_fit,
                                  supervised_delay_detector)
from causal_twin.scm import intervene_scale, sample
from causal_twin.tabular import NUMERIC, ColumnSpec, Dataset

# H(M) - (H(P) + H(Q)) / 2 in bits for P = (.5, .5), Q = (.25, .75), evaluated separately
JS_ORACLE = 0.0487949407


def test_js_worked_pair():
    assert js_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(JS_ORACLE, abs=1e-9)


def test_js_extremes_and_errors():
    assert js_divergence([1, 0], [0, 1]) == pytest.approx(1.0)
    assert js_divergence([3, 1], [6, 2]) == 0.0
    with pytest.raises(ValueError):
        js_divergence([1, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        js_divergence([0, 0], [1, 0])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=2, max_size=8).filter(lambda v: sum(v) > 0),
       st.lists(st.floats(0, 10), min_size=2, max_size=8).filter(lambda v: sum(v) > 0))
def test_js_bounded_and_symmetric(p, q):
    k = min(len(p), len(q))
    p, q = p[:k], q[:k]
    if sum(p) == 0 or sum(q) == 0:
        return
    d = js_divergence(p, q)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(js_divergence(q, p), abs=1e-12)


def test_ks_guards():
    with pytest.raises(ValueError, match="empty"):
        ks_two_sample([], [1, 2, 3, 4, 5])
    with pytest.raises(ValueError, match="at least 5"):
        ks_two_sample([1, 2], [1, 2, 3, 4, 5])


def test_ks_brute_force():
    a = np.array([0.1, 0.4, 0.4, 0.9, 1.3, 2.0])
    b = np.array([0.2, 0.4, 0.8, 1.1, 1.2, 1.4, 3.0])
    grid = np.union1d(a, b)
    d = max(abs((a <= t).mean() - (b <= t).mean()) for t in grid)
    assert ks_two_sample(a, b)[0] == pytest.approx(d)


def test_numeric_histogram_overflow_bins():
    edges = numeric_edges(np.array([0.0, 10.0]), 10)
    h = histogram(np.array([-1.0, 0.0, 5.0, 10.0, 11.0, 12.0]), edges=edges)
    assert len(h) == 12
    assert h[0] == 1 and h[-1] == 2 and h[1] == 1 and h[10] == 1


def _gaussian(n, seed, p=6):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 2))
    x = np.column_stack([z @ rng.normal(size=2) + 0.3 * rng.normal(size=n) for _ in range(p)])
    return Dataset(tuple(ColumnSpec(f"f{i}", NUMERIC) for i in range(p)), x)


def test_pca_axes_match_sklearn():
    ds = _gaussian(800, 0)
    mon = pca_monitor_fit(ds, components=3)
    z = (ds.values - ds.values.mean(0)) / ds.values.std(0)
    ref = PCA(3).fit(z)
    np.testing.assert_allclose(np.abs(mon.axes.T @ ref.components_.T), np.eye(3), atol=1e-8)
    recon = ref.inverse_transform(ref.transform(z))
    np.testing.assert_allclose(mon.errors(ds), np.mean((z - recon) ** 2, axis=1), atol=1e-10)
    err = mon.errors(ds)
    assert mon.threshold == pytest.approx(err.mean() + 3 * err.std())


def test_pca_excludes_constant_columns(caplog):
    ds = _gaussian(200, 1)
    ds = ds.with_column("f0", np.zeros(200))
    mon = pca_monitor_fit(ds, components=2)
    assert "f0" not in mon.columns and "zero-variance" in caplog.text
    with pytest.raises(ValueError):
        pca_monitor_fit(ds, components=6)


def test_supervised_detector_delays():
    # precision falling linearly from 0.783 to 0.688 over 21 steps; the absolute drop first
    # exceeds 0.05 at step 11
    prec = 0.783 - 0.095 * np.arange(21) / 20
    flags = supervised_delay_detector(prec, prec[0], MonitorConfig())
    first = {d: (f.index(True) if True in f else None) for d, f in flags.items()}
    assert first == {"instant": 11, "1_week": 15, "1_month": None, "1_year": None}


def test_monitor_config_validation():
    with pytest.raises(ValueError):
        MonitorConfig(pca_components=0)
    with pytest.raises(ValueError):
        MonitorConfig(label_delay_steps={"x": -1})


def test_monitor_stream_on_concept_drift(toy_scm, tmp_path):
    ref = sample(toy_scm, 2000, 0)
    steps = [sample(intervene_scale(toy_scm, [("y", "a", -k / 4)]), 500, (1, k)) for k in range(5)]
    rep = monitor_stream(steps, ref, MonitorConfig(pca_components=2), "y", [-k / 4 for k in range(5)])
    assert rep.features == ["a", "c", "x"]
    # inputs are untouched by a y <- a edit, so no input monitor has anything to see
    assert not any(s.js_alert for s in rep.steps)
    assert all(s.ks_p["x"] > 1e-3 for s in rep.steps)
    rep.to_csv(tmp_path / "m.csv")
    header = (tmp_path / "m.csv").read_text().splitlines()[0].split(",")
    assert header[:4] == ["step", "delta", "precision", "f1"]
    assert "supervised_1_year" in header


def test_monitor_stream_sees_covariate_shift():
    ref = _gaussian(2000, 2)
    shifted = Dataset(ref.columns, ref.values[:500] + 3.0)
    rep = monitor_stream([ref.take(np.arange(500)), shifted], ref, MonitorConfig(pca_components=2),
                         target="f5")
    assert not rep.steps[0].js_alert and rep.steps[1].js_alert
    assert rep.steps[1].min_ks_p < 1e-6
