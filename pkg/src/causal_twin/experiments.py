"""Shared set-ups for the bundled experiments (LUCAS recovery, OSMI Self-Help sweep)."""

from __future__ import annotations

from dataclasses import dataclass

from .classifiers import GBT, RANDOM_FOREST, ClassifierUnderTest, train
from .datasets import OSMI_TARGET, load_osmi, osmi_constraints
from .discovery import PcConfig, finalize_dag, pc_discover
from .drift import BootstrapSummary, DriftScenario, bootstrap_breaking_point
from .graph import MixedGraph
from .scm import FitConfig, Scm, fit_scm
from .tabular import Dataset, SplitSpec, split

SELF_HELP = DriftScenario(((OSMI_TARGET, "work_interfere", -0.5),))
TWIN_FIT = FitConfig(noise_sigma="matched")


@dataclass
class TwinSetup:
    data: Dataset
    train: Dataset
    valid: Dataset
    graph: MixedGraph
    scm: Scm
    models: dict

    @property
    def model(self) -> ClassifierUnderTest:
        return self.models[GBT]


def build_twin(ds: Dataset, target: str, alpha: float = 0.05, constraints: str | None = "full",
               kinds: tuple = (GBT, RANDOM_FOREST), seed: int = 0) -> TwinSetup:
    """Discover on the full table, fit the twin and the classifiers on an 80% stratified split."""
    bk = osmi_constraints(constraints) if constraints is not None else None
    g = finalize_dag(pc_discover(ds, bk, PcConfig(alpha=alpha)), "lexicographic", bk)
    tr, va = split(ds, SplitSpec(0.8, seed, target))
    scm = fit_scm(tr, g, FitConfig(**{**TWIN_FIT.__dict__, "seed": seed}))
    models = {k: train(tr, target, k, seed=seed) for k in kinds}
    return TwinSetup(ds, tr, va, g, scm, models)


def osmi_twin(alpha: float = 0.05, constraints: str = "full", kinds=(GBT, RANDOM_FOREST),
              seed: int = 0) -> TwinSetup:
    return build_twin(load_osmi(), OSMI_TARGET, alpha, constraints, kinds, seed)


SENSITIVITY_VARIANTS = {
    "original": (0.05, "full"),
    "A": (0.10, "partial"),
    "B": (0.20, "none"),
    "C": (0.20, "anti_causal"),
}


@dataclass(frozen=True)
class SensitivityResult:
    variant: str
    alpha: float
    constraints: str
    edge: tuple | None
    summary: BootstrapSummary | None


def self_help_edge(g: MixedGraph) -> tuple[str, str] | None:
    """(child, parent) of the work_interfere / treatment edge, whichever way it points."""
    if ("work_interfere", OSMI_TARGET) in g.directed:
        return OSMI_TARGET, "work_interfere"
    if (OSMI_TARGET, "work_interfere") in g.directed:
        return "work_interfere", OSMI_TARGET
    return None


def sensitivity_variant(name: str, replications: int = 50, seed: int = 0) -> SensitivityResult:
    alpha, constraints = SENSITIVITY_VARIANTS[name]
    setup = osmi_twin(alpha, constraints, (GBT,), seed)
    edge = self_help_edge(setup.graph)
    if edge is None:
        return SensitivityResult(name, alpha, constraints, None, None)
    sc = DriftScenario(((edge[0], edge[1], SELF_HELP.targets[0][2]),))
    summary = bootstrap_breaking_point(setup.scm, setup.model, sc, replications, seed)
    return SensitivityResult(name, alpha, constraints, edge, summary)
