"""Pipeline configuration: one JSON document with a section per stage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .classifiers import GBT, RANDOM_FOREST, ForestParams, GbtParams
from .discovery import PcConfig
from .drift import DriftScenario
from .monitors import MonitorConfig
from .scm import FitConfig
from .tabular import SplitSpec

STAGES = ("discover", "fit", "train", "validate", "simulate", "bootstrap", "monitor", "attribute")


class ConfigError(ValueError):
    pass


def _build(cls, d: Mapping | None, what: str):
    d = dict(d or {})
    known = {f.name for f in fields(cls)}
    extra = sorted(set(d) - known)
    if extra:
        raise ConfigError(f"[{what}] unknown key(s): {', '.join(extra)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{what}] {e}") from None


@dataclass(frozen=True)
class DataSection:
    csv: str
    schema: str
    target: str


@dataclass(frozen=True)
class DiscoverSection:
    pc: PcConfig = PcConfig()
    constraints: str | None = None
    orientation: str = "lexicographic"
    reference_graph: str | None = None


@dataclass(frozen=True)
class ValidateSection:
    n_mc: int = 50000
    rmsea_threshold: float = 0.08
    gap_tolerance: float = 0.02


@dataclass(frozen=True)
class TrainSection:
    kinds: tuple = (GBT, RANDOM_FOREST)
    primary: str = GBT
    gbt: GbtParams = GbtParams()
    random_forest: ForestParams = ForestParams()


@dataclass(frozen=True)
class AttributeSection:
    top_k: int = 5
    n_rows: int = 100
    n_perms: int = 200


@dataclass(frozen=True)
class PipelineConfig:
    data: DataSection
    name: str = "run"
    seed: int = 0
    stages: tuple = STAGES
    split: SplitSpec = SplitSpec()
    stratify: bool = True
    discover: DiscoverSection = DiscoverSection()
    fit: FitConfig = FitConfig()
    train: TrainSection = TrainSection()
    validate: ValidateSection = ValidateSection()
    scenario: DriftScenario | None = None
    bootstrap_replications: int = 50
    monitor: MonitorConfig = MonitorConfig()
    attribute: AttributeSection = AttributeSection()
    raw: Mapping = field(default_factory=dict, compare=False, repr=False)


def _resolve(base: Path, p: str | None) -> str | None:
    if p is None:
        return None
    q = Path(p)
    return str(q if q.is_absolute() else (base / q))


def parse_config(doc: Mapping[str, Any], base_dir: str | Path = ".") -> PipelineConfig:
    base = Path(base_dir)
    allowed = {"name", "seed", "stages", "data", "split", "discover", "fit", "train", "validate",
               "scenario", "bootstrap", "monitor", "attribute"}
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(extra)}")
    if "data" not in doc:
        raise ConfigError("missing [data] section")
    data = _build(DataSection, doc["data"], "data")
    data = DataSection(_resolve(base, data.csv), _resolve(base, data.schema), data.target)

    stages = tuple(doc.get("stages", STAGES))
    if stages != STAGES[:len(stages)] or not stages:
        raise ConfigError(f"stages must be a non-empty prefix of {list(STAGES)}")

    split = dict(doc.get("split", {}))
    stratify = bool(split.pop("stratify", True))
    split_spec = _build(SplitSpec, split, "split")

    disc = dict(doc.get("discover", {}))
    pc = _build(PcConfig, {k: disc.pop(k) for k in list(disc)
                           if k in {f.name for f in fields(PcConfig)}}, "discover")
    disc_sec = _build(DiscoverSection, disc, "discover")
    disc_sec = DiscoverSection(pc, _resolve(base, disc_sec.constraints), disc_sec.orientation,
                               _resolve(base, disc_sec.reference_graph))
    if disc_sec.orientation not in ("fail", "lexicographic"):
        raise ConfigError(f"[discover] unknown orientation {disc_sec.orientation!r}")

    tr = dict(doc.get("train", {}))
    gbt = _build(GbtParams, tr.pop("gbt", {}), "train.gbt")
    rf = _build(ForestParams, tr.pop("random_forest", {}), "train.random_forest")
    tr_sec = _build(TrainSection, tr, "train")
    kinds = tuple(tr_sec.kinds)
    if not kinds or any(k not in (GBT, RANDOM_FOREST) for k in kinds) or tr_sec.primary not in kinds:
        raise ConfigError("[train] kinds must be gbt/random_forest and include the primary kind")
    tr_sec = TrainSection(kinds, tr_sec.primary, gbt, rf)

    scenario = None
    if doc.get("scenario") is not None:
        try:
            scenario = DriftScenario.from_dict(doc["scenario"])
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"[scenario] {e}") from None
    elif any(s in stages for s in ("simulate", "bootstrap", "monitor", "attribute")):
        raise ConfigError("stages after train need a [scenario] section")

    boot = dict(doc.get("bootstrap", {}))
    reps = int(boot.pop("replications", 50))
    if boot:
        raise ConfigError(f"[bootstrap] unknown key(s): {', '.join(sorted(boot))}")
    if reps < 2:
        raise ConfigError("[bootstrap] replications must be >= 2")

    return PipelineConfig(
        data=data, name=str(doc.get("name", "run")), seed=int(doc.get("seed", 0)),
        stages=stages, split=split_spec, stratify=stratify, discover=disc_sec,
        fit=_build(FitConfig, doc.get("fit"), "fit"), train=tr_sec,
        validate=_build(ValidateSection, doc.get("validate"), "validate"), scenario=scenario,
        bootstrap_replications=reps, monitor=_build(MonitorConfig, doc.get("monitor"), "monitor"),
        attribute=_build(AttributeSection, doc.get("attribute"), "attribute"), raw=dict(doc))


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(doc, path.parent)
