"""Peter-Clark structure learning with background knowledge.

The skeleton search is the order-independent ("stable") variant: every
conditional-independence test at a given conditioning-set size uses the
adjacency sets frozen at the start of that level, edges are removed only once
the level completes, and candidate separating sets are scanned in node-name
order. Among the separating sets found at the first successful level the one
with the largest p-value is kept. Permuting the dataset columns therefore
changes nothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np
from scipy import stats

from .graph import BackgroundKnowledge, GraphError, MixedGraph, _pair, has_directed_cycle
from .tabular import Dataset

logger = logging.getLogger(__name__)

G_SQUARED = "g_squared_discrete"
FISHER_Z = "fisher_z"


class DegenerateTestError(ValueError):
    """The test has no degrees of freedom (e.g. a variable is constant in every stratum)."""


@dataclass(frozen=True)
class PcConfig:
    alpha: float = 0.05
    max_cond_set: int = 3
    ci_test: str = G_SQUARED
    n_bins: int = 5
    collider_rule: str = "majority"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_cond_set < 0:
            raise ValueError("max_cond_set must be >= 0")
        if self.ci_test not in (G_SQUARED, FISHER_Z):
            raise ValueError(f"unknown ci_test {self.ci_test!r}")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.collider_rule not in ("majority", "sepset"):
            raise ValueError(f"unknown collider_rule {self.collider_rule!r}")


@dataclass(frozen=True)
class CiResult:
    x: str
    y: str
    given: tuple[str, ...]
    p_value: float
    independent: bool
    statistic: float = float("nan")
    df: int = 0


def discretize(ds: Dataset, n_bins: int) -> np.ndarray:
    """Integer codes: categorical level indices, numerics quantile-binned."""
    codes = np.empty(ds.values.shape, dtype=np.int64)
    for j, spec in enumerate(ds.columns):
        col = ds.values[:, j]
        if spec.is_categorical:
            codes[:, j] = col.astype(np.int64)
        else:
            edges = np.unique(np.quantile(col, np.linspace(0, 1, n_bins + 1)[1:-1]))
            codes[:, j] = np.searchsorted(edges, col, side="right")
    return codes


def g_squared(x: np.ndarray, y: np.ndarray, z: np.ndarray | None) -> tuple[float, int]:
    """G^2 statistic and degrees of freedom over the strata of ``z``.

    Levels absent from a stratum shrink that stratum's table, so empty
    rows/columns (and empty strata) contribute neither statistic nor df.
    """
    nx, ny = int(x.max()) + 1, int(y.max()) + 1
    if z is None or z.shape[1] == 0:
        zi = np.zeros(len(x), dtype=np.int64)
        nz = 1
    else:
        _, zi = np.unique(z, axis=0, return_inverse=True)
        zi = zi.ravel()
        nz = int(zi.max()) + 1
    joint = np.bincount((zi * nx + x) * ny + y, minlength=nz * nx * ny).reshape(nz, nx, ny)
    joint = joint.astype(float)
    n_z = joint.sum(axis=(1, 2))
    rows = joint.sum(axis=2)
    cols = joint.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = rows[:, :, None] * cols[:, None, :] / n_z[:, None, None]
        terms = np.where(joint > 0, joint * np.log(joint / expected), 0.0)
    stat = 2.0 * float(terms.sum())
    df = int(np.sum(np.maximum(0, ((rows > 0).sum(1) - 1) * ((cols > 0).sum(1) - 1))))
    return max(stat, 0.0), df


def fisher_z(data: np.ndarray, i: int, j: int, cond: list[int]) -> tuple[float, float]:
    idx = [i, j] + list(cond)
    corr = np.corrcoef(data[:, idx], rowvar=False)
    try:
        prec = np.linalg.inv(corr)
    except np.linalg.LinAlgError:
        prec = np.linalg.pinv(corr)
    r = -prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1])
    r = float(np.clip(r, -1 + 1e-12, 1 - 1e-12))
    n = data.shape[0]
    z = 0.5 * np.log((1 + r) / (1 - r)) * np.sqrt(max(n - len(cond) - 3, 1))
    return z, float(2 * stats.norm.sf(abs(z)))


class _Tester:
    """Caches encoded data and test results for one discovery run."""

    def __init__(self, ds: Dataset, cfg: PcConfig):
        self.cfg = cfg
        self.names = ds.names
        self.pos = {n: i for i, n in enumerate(self.names)}
        self.codes = discretize(ds, cfg.n_bins) if cfg.ci_test == G_SQUARED else None
        self.raw = ds.values
        self.cache: dict = {}
        self.n_tests = 0

    def test(self, x: str, y: str, given: Iterable[str]) -> CiResult:
        given = tuple(sorted(given))
        a, b = sorted((x, y))
        key = (a, b, given)
        if key in self.cache:
            return self.cache[key]
        self.n_tests += 1
        i, j = self.pos[a], self.pos[b]
        cond = [self.pos[g] for g in given]
        if self.cfg.ci_test == G_SQUARED:
            z = self.codes[:, cond] if cond else None
            stat, df = g_squared(self.codes[:, i], self.codes[:, j], z)
            if df <= 0:
                raise DegenerateTestError(f"no degrees of freedom for {a} vs {b} | {given}")
            p = float(stats.chi2.sf(stat, df))
        else:
            stat, p = fisher_z(self.raw, i, j, cond)
            df = 0
        res = CiResult(a, b, given, p, p > self.cfg.alpha, stat, df)
        self.cache[key] = res
        return res


def ci_test(ds: Dataset, x: str, y: str, given: Iterable[str], cfg: PcConfig) -> CiResult:
    given = tuple(given)
    if x == y:
        raise ValueError("x and y must differ")
    if x in given or y in given:
        raise ValueError("x and y must not be in the conditioning set")
    if len(given) > cfg.max_cond_set:
        raise ValueError("conditioning set larger than max_cond_set")
    for n in (x, y, *given):
        ds.index(n)
    return _Tester(ds, cfg).test(x, y, given)


@dataclass
class PcTrace:
    """Diagnostics of a discovery run."""

    sepsets: dict = field(default_factory=dict)
    n_tests: int = 0
    degenerate: list = field(default_factory=list)


def skeleton(tester: _Tester, nodes: list[str], bk: BackgroundKnowledge | None,
             trace: PcTrace) -> set:
    cfg = tester.cfg
    adj = {_pair(a, b) for a, b in combinations(nodes, 2)}
    locked = set()
    if bk is not None:
        for a, b in combinations(nodes, 2):
            if not bk.allows(a, b) and not bk.allows(b, a):
                adj.discard(_pair(a, b))
        locked = {_pair(a, b) for a, b in bk.required}

    def nbrs(v: str, edges: set) -> list[str]:
        return sorted(next(iter(e - {v})) for e in edges if v in e)

    for level in range(cfg.max_cond_set + 1):
        frozen = {v: nbrs(v, adj) for v in nodes}
        if all(len(frozen[v]) - 1 < level for v in nodes):
            break
        removed = set()
        for e in sorted(adj, key=sorted):
            if e in locked:
                continue
            x, y = sorted(e)
            cands = set()
            for u, w in ((x, y), (y, x)):
                pool = [n for n in frozen[u] if n != w]
                if len(pool) >= level:
                    cands.update(combinations(pool, level))
            best = None
            for s in sorted(cands):
                try:
                    res = tester.test(x, y, s)
                except DegenerateTestError:
                    trace.degenerate.append((x, y, s))
                    res = CiResult(x, y, s, 1.0, True)
                # keep the most independent separating set of this level
                if res.independent and (best is None or res.p_value > best.p_value):
                    best = res
            if best is not None:
                removed.add(e)
                trace.sepsets[e] = set(best.given)
        adj -= removed
    trace.n_tests = tester.n_tests
    return adj


class _Pdag:
    """Mutable partially directed graph used during orientation."""

    def __init__(self, nodes: list[str], adj: set, bk: BackgroundKnowledge | None):
        self.nodes = nodes
        self.und = set(adj)
        self.dirs: set[tuple[str, str]] = set()
        self.bk = bk

    def adjacent(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.und or (a, b) in self.dirs or (b, a) in self.dirs

    def allowed(self, a: str, b: str) -> bool:
        return self.bk is None or self.bk.allows(a, b)

    def orient(self, a: str, b: str) -> bool:
        e = _pair(a, b)
        if e in self.und and self.allowed(a, b):
            self.und.discard(e)
            self.dirs.add((a, b))
            return True
        return False

    def undirected_nbrs(self, v: str) -> list[str]:
        return sorted(next(iter(e - {v})) for e in self.und if v in e)

    def parents(self, v: str) -> list[str]:
        return sorted(a for a, b in self.dirs if b == v)

    def to_graph(self) -> MixedGraph:
        return MixedGraph(tuple(self.nodes), frozenset(self.dirs), frozenset(self.und))


def _apply_meek(pd: _Pdag) -> None:
    changed = True
    while changed:
        changed = False
        for e in sorted(pd.und, key=sorted):
            if e not in pd.und:
                continue
            a, b = sorted(e)
            for x, y in ((a, b), (b, a)):
                if (_meek_fires(pd, x, y) and not has_directed_cycle(pd.nodes, pd.dirs | {(x, y)})
                        and pd.orient(x, y)):
                    changed = True
                    break


def _meek_fires(pd: _Pdag, a: str, b: str) -> bool:
    """Whether some Meek rule orients the undirected edge a - b as a -> b."""
    pa_a = pd.parents(a)
    # R1: c -> a - b, c not adjacent to b
    if any(not pd.adjacent(c, b) for c in pa_a if c != b):
        return True
    # R2: a -> c -> b
    if any((a, c) in pd.dirs and (c, b) in pd.dirs for c in pd.nodes):
        return True
    und_a = pd.undirected_nbrs(a)
    pa_b = pd.parents(b)
    # R3: a - c -> b, a - d -> b, c and d nonadjacent
    cs = [c for c in und_a if c in pa_b]
    for i, c in enumerate(cs):
        for d in cs[i + 1:]:
            if not pd.adjacent(c, d):
                return True
    # R4: a - k -> l -> b, a adjacent to l, k not adjacent to b
    for l in pa_b:
        if l == a or not pd.adjacent(a, l):
            continue
        for k in pd.parents(l):
            if k in und_a and not pd.adjacent(k, b):
                return True
    return False


def meek_closure(g: MixedGraph, bk: BackgroundKnowledge | None = None) -> MixedGraph:
    pd = _Pdag(list(g.nodes), set(g.undirected), bk)
    pd.dirs = set(g.directed)
    _apply_meek(pd)
    return pd.to_graph()


def _apply_background(pd: _Pdag) -> None:
    bk = pd.bk
    if bk is None:
        return
    for a, b in sorted(bk.required):
        e = _pair(a, b)
        pd.dirs.discard((b, a))
        pd.und.discard(e)
        pd.dirs.add((a, b))
    for e in sorted(pd.und, key=sorted):
        a, b = sorted(e)
        fwd, back = bk.allows(a, b), bk.allows(b, a)
        if fwd and not back:
            pd.orient(a, b)
        elif back and not fwd:
            pd.orient(b, a)
    for a, b in sorted(pd.dirs):
        if not bk.allows(a, b):
            pd.dirs.discard((a, b))
            if bk.allows(b, a):
                pd.dirs.add((b, a))
            else:
                logger.warning("dropping edge %s-%s: no orientation permitted", a, b)


def _is_collider(tester: _Tester, adj: set, x: str, y: str, z: str, trace: PcTrace) -> bool:
    """Decide whether the unshielded triple x - z - y is a v-structure.

    ``sepset`` trusts the set recorded by the skeleton search. ``majority``
    re-tests x and y against every subset (up to the size cap) of the final
    adjacencies of either endpoint and calls a collider only when z lies in
    fewer than half of the separating sets found; a tie leaves it unoriented.
    """
    if tester.cfg.collider_rule == "sepset":
        return z not in trace.sepsets.get(_pair(x, y), set())
    cands = set()
    for u, w in ((x, y), (y, x)):
        pool = sorted(next(iter(e - {u})) for e in adj if u in e and w not in e)
        for k in range(min(tester.cfg.max_cond_set, len(pool)) + 1):
            cands.update(combinations(pool, k))
    with_z = without_z = 0
    for s in sorted(cands):
        try:
            res = tester.test(x, y, s)
            indep = res.independent
        except DegenerateTestError:
            indep = True
        if indep:
            if z in s:
                with_z += 1
            else:
                without_z += 1
    if with_z + without_z == 0:
        return z not in trace.sepsets.get(_pair(x, y), set())
    return with_z < without_z


def pc_discover(ds: Dataset, bk: BackgroundKnowledge | None = None,
                cfg: PcConfig = PcConfig(), trace: PcTrace | None = None) -> MixedGraph:
    """Learn a CPDAG-like mixed graph from ``ds``; edges may stay undirected."""
    nodes = sorted(ds.names)
    if bk is not None:
        missing = bk.mentioned() - set(nodes)
        if missing:
            raise GraphError(f"background knowledge mentions unknown nodes {sorted(missing)}")
    if cfg.max_cond_set > max(len(nodes) - 2, 0):
        cfg = PcConfig(cfg.alpha, max(len(nodes) - 2, 0), cfg.ci_test, cfg.n_bins,
                       cfg.collider_rule)
    trace = trace if trace is not None else PcTrace()
    tester = _Tester(ds, cfg)
    adj = skeleton(tester, nodes, bk, trace)

    pd = _Pdag(nodes, adj, bk)
    _apply_background(pd)

    arrows = set()
    for z in nodes:
        nz = sorted(next(iter(e - {z})) for e in adj if z in e)
        for x, y in combinations(nz, 2):
            if _pair(x, y) in adj:
                continue
            if _is_collider(tester, adj, x, y, z, trace):
                arrows.add((x, z))
                arrows.add((y, z))
    for a, b in sorted(arrows):
        if (b, a) in arrows:
            continue  # conflicting colliders: leave the edge to later rules
        if has_directed_cycle(nodes, pd.dirs | {(a, b)}):
            logger.info("skipping collider arrow %s->%s: it would close a cycle", a, b)
            continue
        pd.orient(a, b)

    _apply_meek(pd)
    _apply_background(pd)
    _apply_meek(pd)
    trace.n_tests = tester.n_tests
    if has_directed_cycle(nodes, pd.dirs):
        msg = "background knowledge produced a directed cycle" if bk is not None \
            else "orientation produced a directed cycle"
        raise GraphError(msg)
    # restore dataset column order for the node list
    return MixedGraph(tuple(ds.names), frozenset(pd.dirs), frozenset(pd.und))


def _creates_v_structure(dirs: set, und: set, a: str, b: str) -> bool:
    def adjacent(u, v):
        return (u, v) in dirs or (v, u) in dirs or _pair(u, v) in und
    return any(c != a and not adjacent(c, a) for c, d in dirs if d == b)


def finalize_dag(g: MixedGraph, policy: str = "fail",
                 bk: BackgroundKnowledge | None = None) -> MixedGraph:
    """Resolve the undirected edges left by discovery.

    ``fail`` raises if any remain. ``lexicographic`` orients each edge from the
    smaller name to the larger, taking the reverse when the preferred direction
    would close a cycle or create a new v-structure and the reverse would not.
    """
    if not g.undirected:
        return g
    if policy == "fail":
        pending = ", ".join(f"{a}-{b}" for a, b in sorted(sorted(e) for e in g.undirected))
        raise GraphError(f"unresolved undirected edges: {pending}")
    if policy != "lexicographic":
        raise ValueError(f"unknown policy {policy!r}")
    pd = _Pdag(list(g.nodes), set(g.undirected), bk)
    pd.dirs = set(g.directed)
    while pd.und:
        e = min(pd.und, key=sorted)
        a, b = sorted(e)

        def bad(u, v):
            if pd.bk is not None and not pd.bk.allows(u, v):
                return True, True
            cyc = has_directed_cycle(pd.nodes, pd.dirs | {(u, v)})
            return cyc, _creates_v_structure(pd.dirs, pd.und - {e}, u, v)

        fwd_cycle, fwd_v = bad(a, b)
        back_cycle, back_v = bad(b, a)
        if fwd_cycle and back_cycle:
            raise GraphError(f"edge {a}-{b} cannot be oriented without a cycle")
        if fwd_cycle or (fwd_v and not back_v and not back_cycle):
            choice = (b, a)
        else:
            choice = (a, b)
        pd.und.discard(e)
        pd.dirs.add(choice)
        _apply_meek(pd)
    return pd.to_graph()
