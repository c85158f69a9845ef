import csv

import numpy as np
import pytest

from causal_twin.datasets import (OSMI_COLUMNS, OSMI_STANDIN_SEED, clean_osmi_survey,
                                  load_lucas, load_osmi, lucas_graph, osmi_constraints,
                                  simulate_lucas, simulate_osmi)


def test_bundled_lucas_is_reproducible():
    np.testing.assert_array_equal(load_lucas().values, simulate_lucas(2000, 0).values)
    assert lucas_graph().is_dag


def test_bundled_osmi_is_reproducible():
    bundled = load_osmi()
    assert bundled.n_rows == 1259 and bundled.names == list(OSMI_COLUMNS)
    np.testing.assert_allclose(bundled.values, simulate_osmi(1259, OSMI_STANDIN_SEED).values,
                               atol=1e-12)


def test_lucas_cpt_marginal():
    ds = simulate_lucas(50_000, 1)
    # P(Smoking) = sum over (Peer_Pressure, Anxiety) of the CPT row times its prior
    pp, ax = 0.32997, 0.64277
    rows = [(1 - pp) * (1 - ax), (1 - pp) * ax, pp * (1 - ax), pp * ax]
    expected = np.dot(rows, [0.43118, 0.8686, 0.74591, 0.91576])
    assert ds.column("Smoking").mean() == pytest.approx(expected, abs=0.006)


def test_constraint_variants():
    full = osmi_constraints("full")
    assert "treatment" in full.sinks and "Age" in full.exogenous
    assert not osmi_constraints("none").mentioned()
    assert ("treatment", "benefits") in osmi_constraints("anti_causal").required
    with pytest.raises(ValueError):
        osmi_constraints("bogus")


def test_clean_survey(tmp_path):
    raw = tmp_path / "survey.csv"
    header = ["Timestamp", "Country", "comments"] + list(OSMI_COLUMNS)
    base = {c: "No" for c in OSMI_COLUMNS}
    base.update({"work_interfere": "Often", "no_employees": "6-25", "benefits": "Yes",
                 "care_options": "Yes", "wellness_program": "No", "seek_help": "No",
                 "anonymity": "Yes", "leave": "Very easy", "mental_health_consequence": "No",
                 "phys_health_consequence": "No", "coworkers": "Yes", "supervisor": "Yes",
                 "mental_health_interview": "No", "phys_health_interview": "Maybe",
                 "mental_vs_physical": "Yes"})
    rows = [dict(base, Age="30", Gender="femake"), dict(base, Age="-1", Gender="M"),
            dict(base, Age="44", Gender="agender", self_employed="NA", work_interfere="NA")]
    with open(raw, "w", newline="") as fh:
        w = csv.DictWriter(fh, header, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "Timestamp": "t", "Country": "x", "comments": ""})
    out = tmp_path / "clean.csv"
    assert clean_osmi_survey(raw, out) == 2
    ds = load_osmi(out)
    assert [ds.spec("Gender").decode(v) for v in ds.column("Gender")] == ["Female", "Other"]
    assert ds.spec("work_interfere").decode(ds.column("work_interfere")[1]) == "No answer"
