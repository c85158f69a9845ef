"""Typed tabular data: column schemas, CSV ingestion, splitting, covariance."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class SchemaError(ValueError):
    pass


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    levels: tuple[str, ...] = ()
    normalization: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.normalization is not None:
            object.__setattr__(self, "normalization",
                               (float(self.normalization[0]), float(self.normalization[1])))
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise SchemaError(f"categorical column {self.name!r} has no levels")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"duplicate levels in column {self.name!r}")
            if self.normalization is not None:
                raise SchemaError(f"categorical column {self.name!r} cannot be normalized")
        elif self.kind == NUMERIC:
            if self.levels:
                raise SchemaError(f"numeric column {self.name!r} cannot declare levels")
            if self.normalization is not None:
                lo, hi = self.normalization
                if not lo < hi:
                    raise SchemaError(f"column {self.name!r}: normalization min must be < max")
        else:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def encode(self, raw: str) -> float:
        if self.is_categorical:
            try:
                return float(self.levels.index(raw))
            except ValueError:
                raise IngestError(f"column {self.name!r}: unknown level {raw!r}") from None
        try:
            value = float(raw)
        except ValueError:
            raise IngestError(f"column {self.name!r}: cannot parse {raw!r} as a number") from None
        if not np.isfinite(value):
            raise IngestError(f"column {self.name!r}: non-finite value {raw!r}")
        if self.normalization is not None:
            lo, hi = self.normalization
            if value < lo or value > hi:
                raise IngestError(
                    f"column {self.name!r}: value {value} outside normalization range {lo}..{hi}")
            value = (value - lo) / (hi - lo)
        return value

    def decode(self, value: float) -> str | float:
        if self.is_categorical:
            return self.levels[int(value)]
        if self.normalization is not None:
            lo, hi = self.normalization
            return lo + value * (hi - lo)
        return float(value)

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "kind": self.kind}
        if self.levels:
            d["levels"] = list(self.levels)
        if self.normalization is not None:
            d["normalization"] = list(self.normalization)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnSpec":
        norm = d.get("normalization")
        return cls(name=d["name"], kind=d["kind"], levels=tuple(d.get("levels", ())),
                   normalization=tuple(norm) if norm is not None else None)


def load_schema(path: str | Path) -> list[ColumnSpec]:
    """Read a schema document: ``{"columns": [{name, kind, levels?, normalization?}]}``.

    An optional ``"missing_policy"`` map is returned by :func:`load_missing_policy`.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cols = [ColumnSpec.from_dict(c) for c in doc["columns"]]
    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    return cols


def load_missing_policy(path: str | Path) -> dict[str, str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return dict(doc.get("missing_policy", {}))


def save_schema(path: str | Path, columns: Sequence[ColumnSpec],
                missing_policy: Mapping[str, str] | None = None) -> None:
    doc: dict = {"columns": [c.to_dict() for c in columns]}
    if missing_policy:
        doc["missing_policy"] = dict(missing_policy)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable encoded table. Categorical cells hold level indices as floats."""

    columns: tuple[ColumnSpec, ...]
    values: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 2 or vals.shape[1] != len(cols):
            raise SchemaError(f"values shape {vals.shape} does not match {len(cols)} columns")
        if np.isnan(vals).any():
            raise IngestError("dataset contains missing cells")
        for j, c in enumerate(cols):
            if c.is_categorical:
                col = vals[:, j]
                if ((col < 0) | (col >= c.n_levels) | (col != np.floor(col))).any():
                    raise SchemaError(f"column {c.name!r} has an invalid level index")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_index", {c.name: j for j, c in enumerate(cols)})

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown column {name!r}") from None

    def spec(self, name: str) -> ColumnSpec:
        return self.columns[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def take(self, rows: Iterable[int] | np.ndarray) -> "Dataset":
        return Dataset(self.columns, self.values[np.asarray(rows, dtype=int)])

    def select(self, names: Sequence[str]) -> "Dataset":
        idx = [self.index(n) for n in names]
        return Dataset(tuple(self.columns[i] for i in idx), self.values[:, idx])

    def drop(self, name: str) -> "Dataset":
        return self.select([n for n in self.names if n != name])

    def with_column(self, name: str, values: np.ndarray) -> "Dataset":
        vals = np.array(self.values, copy=True)
        vals[:, self.index(name)] = values
        return Dataset(self.columns, vals)

    def decoded_rows(self) -> list[list]:
        return [[c.decode(v) for c, v in zip(self.columns, row)] for row in self.values]

    def to_csv(self, path: str | Path) -> None:
        """Write decoded values (level labels, de-normalized numerics)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.names)
            for row in self.decoded_rows():
                w.writerow([v if isinstance(v, str) else format(v, ".12g") for v in row])


def ingest_csv(path: str | Path, schema: Sequence[ColumnSpec],
               missing_policy: Mapping[str, str] | None = None) -> Dataset:
    """Parse a header-first UTF-8 CSV into a :class:`Dataset`.

    Columns are matched by header name and reordered to the schema order.
    Blank or ``NA`` cells are replaced by ``missing_policy[column]`` when
    present; otherwise they are an error.
    """
    missing_policy = dict(missing_policy or {})
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise IngestError(f"{path}: no data rows")
    schema_names = [c.name for c in schema]
    unknown = [h for h in header if h not in schema_names]
    if unknown:
        raise IngestError(f"{path}: unknown column(s) {unknown}")
    absent = [n for n in schema_names if n not in header]
    if absent:
        raise IngestError(f"{path}: missing column(s) {absent}")
    for name, label in missing_policy.items():
        spec = next((c for c in schema if c.name == name), None)
        if spec is None:
            raise IngestError(f"missing policy names unknown column {name!r}")
        if spec.is_categorical and label not in spec.levels:
            raise IngestError(f"missing policy level {label!r} not declared for {name!r}")

    pos = {h: i for i, h in enumerate(header)}
    out = np.empty((len(body), len(schema)), dtype=float)
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise IngestError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        for j, spec in enumerate(schema):
            raw = row[pos[spec.name]].strip()
            if raw == "" or raw.upper() in {"NA", "NAN"}:
                if spec.name not in missing_policy:
                    raise IngestError(f"{path}: row {i + 2}: missing {spec.name!r} without a policy")
                raw = missing_policy[spec.name]
            try:
                out[i, j] = spec.encode(raw)
            except IngestError as e:
                raise IngestError(f"{path}: row {i + 2}: {e}") from None
    return Dataset(tuple(schema), out)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratify_on: str | None = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def _allocate(sizes: np.ndarray, fraction: float) -> np.ndarray:
    # largest-remainder rounding: total equals round(fraction * N), each stratum within 1 row
    target = int(round(fraction * sizes.sum()))
    exact = sizes * fraction
    alloc = np.floor(exact).astype(int)
    remainder = exact - alloc
    order = np.lexsort((np.arange(len(sizes)), -remainder))
    for k in order[: target - alloc.sum()]:
        alloc[k] += 1
    return alloc


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    if ds.n_rows < 10:
        raise ValueError("split needs at least 10 rows")
    rng = np.random.default_rng(spec.seed)
    if spec.stratify_on is None:
        perm = rng.permutation(ds.n_rows)
        n_train = int(round(spec.train_fraction * ds.n_rows))
        train_idx, valid_idx = perm[:n_train], perm[n_train:]
    else:
        if spec.stratify_on not in ds.names:
            raise KeyError(f"stratify column {spec.stratify_on!r} not in dataset")
        labels = ds.column(spec.stratify_on)
        strata = np.unique(labels)
        members = [np.flatnonzero(labels == s) for s in strata]
        sizes = np.array([len(m) for m in members])
        if (sizes < 2).any():
            raise ValueError("a stratum has fewer than 2 rows")
        alloc = _allocate(sizes, spec.train_fraction)
        train_parts, valid_parts = [], []
        for m, a in zip(members, alloc):
            m = rng.permutation(m)
            train_parts.append(m[:a])
            valid_parts.append(m[a:])
        train_idx = np.sort(np.concatenate(train_parts))
        valid_idx = np.sort(np.concatenate(valid_parts))
    return ds.take(train_idx), ds.take(valid_idx)


def covariance_matrix(ds: Dataset) -> np.ndarray:
    """Unbiased (N-1) sample covariance of the encoded columns."""
    if ds.n_rows < 2:
        raise ValueError("covariance needs at least 2 rows")
    x = ds.values - ds.values.mean(axis=0)
    cov = x.T @ x / (ds.n_rows - 1)
    cov = (cov + cov.T) / 2
    constant = [ds.names[j] for j in np.flatnonzero(np.diag(cov) <= 0)]
    if constant:
        logger.warning("zero-variance columns in covariance: %s", constant)
    return cov


def zero_variance_columns(ds: Dataset) -> list[str]:
    return [n for n, v in zip(ds.names, ds.values.var(axis=0)) if v == 0]
