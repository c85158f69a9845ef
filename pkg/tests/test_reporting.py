import json

import pytest

from causal_twin.config import ConfigError, load_config, parse_config
from causal_twin.drift import DriftScenario, run_scenario
from causal_twin.reporting import (PlotDataError, RunManifest, config_hash,
                                   emit_curve_plotdata, file_digest)

SC = DriftScenario((("y", "a", -1.0),), k_steps=4, baseline_n=100, step_n=40, final_n=100,
                   window=30, step_eval_n=100)


@pytest.fixture(scope="module")
def curve_csv(tmp_path_factory, toy_scm, toy_model):
    p = tmp_path_factory.mktemp("curve") / "curve.csv"
    run_scenario(toy_scm, toy_model, SC, 0).write_stream_csv(p)
    return p


def test_plotdata_long_format(curve_csv, tmp_path):
    out = tmp_path / "plot.csv"
    n = emit_curve_plotdata(curve_csv, out, ("precision", "f1"), tmp_path / "p.svg", tau=0.7)
    rows = out.read_text().splitlines()
    assert rows[0] == "window_index,sample_index,metric,value"
    n_windows = SC.stream_length - SC.window + 1
    assert n == 2 * n_windows == len(rows) - 1
    first = rows[1].split(",")
    assert first[:3] == ["0", str(SC.window - 1), "precision"]
    svg = (tmp_path / "p.svg").read_text()
    assert 'id="series-precision"' in svg and 'id="tau"' in svg


def test_plotdata_errors(curve_csv, tmp_path):
    with pytest.raises(PlotDataError, match="rwa_nope"):
        emit_curve_plotdata(curve_csv, tmp_path / "x.csv", ("nope",))
    empty = tmp_path / "empty.csv"
    empty.write_text("sample_index,step,delta,rwa_precision\n0,0,0,\n1,0,0,\n")
    with pytest.raises(PlotDataError, match="no values"):
        emit_curve_plotdata(empty, tmp_path / "x.csv", ("precision",))
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(PlotDataError, match="missing column"):
        emit_curve_plotdata(bad, tmp_path / "x.csv", ("precision",))


def test_manifest_excludes_timing_from_comparison(tmp_path):
    f = tmp_path / "in.txt"
    f.write_text("hello")
    a = RunManifest("fit", config_hash({"b": 1, "a": 2}), {"seed": 0}, timing={"fit": 1.0})
    b = RunManifest("fit", config_hash({"a": 2, "b": 1}), {"seed": 0}, timing={"fit": 9.0})
    for m in (a, b):
        m.add_input("data", f)
    assert a.to_dict(with_timing=False) == b.to_dict(with_timing=False)
    assert a.inputs["data"]["sha256"] == file_digest(f)
    a.write(tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text())["timing"] == {"fit": 1.0}


def _doc(**extra):
    doc = {"data": {"csv": "d.csv", "schema": "s.json", "target": "y"},
           "scenario": {"targets": [["y", "a", -0.5]]}}
    doc.update(extra)
    return doc


def test_config_parses_and_resolves_paths(tmp_path):
    cfg = parse_config(_doc(discover={"alpha": 0.1, "constraints": "bk.json"},
                            bootstrap={"replications": 7}), tmp_path)
    assert cfg.discover.pc.alpha == 0.1
    assert cfg.discover.constraints == str(tmp_path / "bk.json")
    assert cfg.data.csv == str(tmp_path / "d.csv")
    assert cfg.bootstrap_replications == 7


@pytest.mark.parametrize("doc, msg", [
    ({"scenario": None}, "data"),
    (_doc(colour="red"), "unknown section"),
    (_doc(discover={"alpah": 0.1}), "unknown key"),
    (_doc(stages=["fit"]), "prefix"),
    (_doc(train={"kinds": ["svm"]}), "kinds"),
    (_doc(bootstrap={"replications": 1}), ">= 2"),
    (_doc(scenario=None), "scenario"),
    (_doc(discover={"alpha": 2.0}), "alpha"),
])
def test_config_errors(doc, msg):
    doc = {k: v for k, v in doc.items() if v is not None}
    with pytest.raises(ConfigError, match=msg):
        parse_config(doc)


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)
