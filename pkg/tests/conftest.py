from __future__ import annotations

import numpy as np
import pytest

from causal_twin.classifiers import GBT, train
from causal_twin.graph import MixedGraph
from causal_twin.scm import FitConfig, fit_scm, sample
from causal_twin.tabular import CATEGORICAL, NUMERIC, ColumnSpec, Dataset

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(tag: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {tag}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def make_toy(n: int = 600, seed: int = 0) -> Dataset:
    """Small mixed-type table: x (numeric root) -> a (binary) -> y (binary), c (3 levels) -> y."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    c = rng.integers(0, 3, n)
    a = (rng.random(n) < 1 / (1 + np.exp(-1.5 * x))).astype(float)
    eta = -0.5 + 2.0 * a + 0.8 * (c == 2) - 0.6 * (c == 0)
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    cols = (ColumnSpec("x", NUMERIC), ColumnSpec("c", CATEGORICAL, ("lo", "mid", "hi")),
            ColumnSpec("a", CATEGORICAL, ("no", "yes")), ColumnSpec("y", CATEGORICAL, ("0", "1")))
    return Dataset(cols, np.column_stack([x, c, a, y]))


TOY_GRAPH = MixedGraph(("x", "c", "a", "y"), frozenset({("x", "a"), ("a", "y"), ("c", "y")}))


@pytest.fixture(scope="session")
def toy():
    return make_toy()


@pytest.fixture(scope="session")
def toy_scm(toy):
    return fit_scm(toy, TOY_GRAPH, FitConfig(noise_sigma="matched"))


@pytest.fixture(scope="session")
def toy_model(toy_scm):
    from causal_twin.classifiers import GbtParams
    return train(sample(toy_scm, 800, 11), "y", GBT, GbtParams(n_rounds=20, max_depth=3))


@pytest.fixture(scope="session")
def osmi_setup():
    from causal_twin.experiments import osmi_twin
    return osmi_twin()


@pytest.fixture(scope="session")
def lucas_setup():
    from causal_twin.datasets import LUCAS_TARGET, load_lucas
    from causal_twin.experiments import build_twin
    return build_twin(load_lucas(), LUCAS_TARGET, constraints=None)
