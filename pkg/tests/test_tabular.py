import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_twin.tabular import (CATEGORICAL, NUMERIC, ColumnSpec, Dataset, IngestError,
                                 SchemaError, SplitSpec, covariance_matrix, ingest_csv,
                                 load_schema, save_schema, split)


def _schema():
    return [ColumnSpec("age", NUMERIC, normalization=(18, 72)),
            ColumnSpec("g", CATEGORICAL, ("f", "m", "o")),
            ColumnSpec("t", CATEGORICAL, ("No", "Yes"))]


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_ingest_encodes_and_reorders(tmp_path):
    p = _write(tmp_path, "t,age,g\nYes,18,m\nNo,72,o\nNo,45,f\n")
    ds = ingest_csv(p, _schema())
    assert ds.names == ["age", "g", "t"]
    np.testing.assert_allclose(ds.column("age"), [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(ds.column("g"), [1, 2, 0])
    np.testing.assert_array_equal(ds.column("t"), [1, 0, 0])


def test_missing_cells_need_policy(tmp_path):
    p = _write(tmp_path, "age,g,t\n30,NA,Yes\n40,f,No\n")
    with pytest.raises(IngestError, match="without a policy"):
        ingest_csv(p, _schema())
    ds = ingest_csv(p, _schema(), {"g": "o"})
    assert ds.column("g")[0] == 2


def test_policy_level_must_exist(tmp_path):
    p = _write(tmp_path, "age,g,t\n30,,Yes\n")
    with pytest.raises(IngestError, match="not declared"):
        ingest_csv(p, _schema(), {"g": "unknown"})


@pytest.mark.parametrize("text, msg", [
    ("age,g,t,extra\n30,f,No,1\n", "unknown column"),
    ("age,g\n30,f\n", "missing column"),
    ("age,g,t\n30,x,No\n", "unknown level"),
    ("age,g,t\n99,f,No\n", "outside normalization"),
    ("age,g,t\nabc,f,No\n", "cannot parse"),
    ("age,g,t\n30,f\n", "cells"),
    ("age,g,t\n", "no data rows"),
])
def test_ingest_errors(tmp_path, text, msg):
    with pytest.raises(IngestError, match=msg):
        ingest_csv(_write(tmp_path, text), _schema())


def test_schema_validation():
    with pytest.raises(SchemaError):
        ColumnSpec("a", CATEGORICAL)
    with pytest.raises(SchemaError):
        ColumnSpec("a", CATEGORICAL, ("x", "x"))
    with pytest.raises(SchemaError):
        ColumnSpec("a", NUMERIC, normalization=(3, 3))
    with pytest.raises(SchemaError):
        ColumnSpec("a", "ordinal")


def test_schema_roundtrip(tmp_path):
    p = tmp_path / "schema.json"
    save_schema(p, _schema())
    assert load_schema(p) == _schema()


def test_dataset_rejects_bad_level_index():
    with pytest.raises(SchemaError):
        Dataset((ColumnSpec("t", CATEGORICAL, ("a", "b")),), np.array([[2.0]]))


def test_decode_inverts_encode():
    spec = _schema()[0]
    assert spec.decode(spec.encode("45")) == pytest.approx(45.0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(20, 300), frac=st.floats(0.1, 0.9), seed=st.integers(0, 10_000),
       p_pos=st.floats(0.1, 0.9))
def test_stratified_split_preserves_rows_and_proportions(n, frac, seed, p_pos):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < p_pos).astype(float)
    y[:2], y[2:4] = 0, 1  # at least two rows per stratum
    ds = Dataset((ColumnSpec("i", NUMERIC), ColumnSpec("y", CATEGORICAL, ("0", "1"))),
                 np.column_stack([np.arange(n), y]))
    tr, va = split(ds, SplitSpec(frac, seed, "y"))
    ids = np.sort(np.concatenate([tr.column("i"), va.column("i")]))
    np.testing.assert_array_equal(ids, np.arange(n))
    assert tr.n_rows == round(frac * n)
    for level in (0, 1):
        n_level = int((y == level).sum())
        assert abs((tr.column("y") == level).sum() - frac * n_level) <= 1


def test_split_is_deterministic(toy):
    a = split(toy, SplitSpec(0.8, 3, "y"))
    b = split(toy, SplitSpec(0.8, 3, "y"))
    np.testing.assert_array_equal(a[0].values, b[0].values)


def test_covariance_matches_numpy(toy):
    np.testing.assert_allclose(covariance_matrix(toy), np.cov(toy.values, rowvar=False),
                               atol=1e-12)
