"""Mixed (partially directed) graphs, background knowledge and graph metrics."""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


def _pair(a: str, b: str) -> frozenset:
    return frozenset((a, b))


@dataclass(frozen=True)
class MixedGraph:
    nodes: tuple[str, ...]
    directed: frozenset = frozenset()
    undirected: frozenset = frozenset()

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node names")
        directed = frozenset((str(a), str(b)) for a, b in self.directed)
        undirected = frozenset(_pair(*p) for p in (tuple(e) for e in self.undirected))
        known = set(nodes)
        for a, b in directed:
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if a not in known or b not in known:
                raise GraphError(f"edge {a}->{b} references an unknown node")
        for e in undirected:
            if len(e) != 2:
                raise GraphError("self-loop in undirected edges")
            if not e <= known:
                raise GraphError(f"edge {sorted(e)} references an unknown node")
        seen = set()
        for a, b in directed:
            p = _pair(a, b)
            if p in seen or p in undirected:
                raise GraphError(f"pair {a}, {b} appears in more than one edge")
            seen.add(p)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        if not undirected and _find_cycle(nodes, directed) is not None:
            raise CycleError("directed part contains a cycle")

    # -- queries -----------------------------------------------------------
    def parents(self, node: str) -> list[str]:
        self._check(node)
        ps = {a for a, b in self.directed if b == node}
        return [n for n in self.nodes if n in ps]

    def children(self, node: str) -> list[str]:
        self._check(node)
        cs = {b for a, b in self.directed if a == node}
        return [n for n in self.nodes if n in cs]

    def neighbors(self, node: str) -> list[str]:
        """Undirected neighbours."""
        self._check(node)
        ns = {next(iter(e - {node})) for e in self.undirected if node in e}
        return [n for n in self.nodes if n in ns]

    def adjacent(self, a: str, b: str) -> bool:
        return (a, b) in self.directed or (b, a) in self.directed or _pair(a, b) in self.undirected

    @property
    def is_dag(self) -> bool:
        return not self.undirected

    def roots(self) -> list[str]:
        return [n for n in self.nodes if not self.parents(n)]

    def _check(self, node: str) -> None:
        if node not in self.nodes:
            raise GraphError(f"unknown node {node!r}")

    # -- edits ---------------------------------------------------------------
    def with_edges(self, directed: Iterable = (), undirected: Iterable = ()) -> "MixedGraph":
        return MixedGraph(self.nodes, frozenset(directed), frozenset(_pair(*e) for e in undirected))

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "directed": sorted([a, b] for a, b in self.directed),
            "undirected": sorted(sorted(e) for e in self.undirected),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MixedGraph":
        return cls(tuple(d["nodes"]),
                   frozenset(tuple(e) for e in d.get("directed", ())),
                   frozenset(_pair(*e) for e in d.get("undirected", ())))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MixedGraph":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dot(self, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        lines += [f'  "{n}";' for n in self.nodes]
        lines += [f'  "{a}" -> "{b}";' for a, b in sorted(self.directed)]
        lines += [f'  "{a}" -> "{b}" [dir=none];' for a, b in sorted(sorted(e) for e in self.undirected)]
        lines.append("}")
        return "\n".join(lines) + "\n"


def _find_cycle(nodes: Sequence[str], directed: Iterable[tuple[str, str]]):
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in directed:
        succ[a].append(b)
    color = {n: 0 for n in nodes}
    for start in nodes:
        if color[start]:
            continue
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
            elif color[nxt] == 1:
                return nxt
            elif color[nxt] == 0:
                color[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
    return None


def has_directed_cycle(nodes: Sequence[str], directed: Iterable[tuple[str, str]]) -> bool:
    return _find_cycle(nodes, directed) is not None


def topological_order(g: MixedGraph) -> list[str]:
    """Kahn's algorithm; ties are broken by node name."""
    if g.undirected:
        raise GraphError("topological order needs a DAG; undirected edges remain")
    indeg = {n: 0 for n in g.nodes}
    succ: dict[str, list[str]] = {n: [] for n in g.nodes}
    for a, b in g.directed:
        indeg[b] += 1
        succ[a].append(b)
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    if len(order) != len(g.nodes):
        raise CycleError("graph contains a directed cycle")
    return order


def causal_distance(g: MixedGraph, source: str, target: str) -> float:
    """Length of the shortest directed path ``source -> ... -> target`` (``inf`` if none)."""
    g._check(source)
    g._check(target)
    if source == target:
        return 0
    succ: dict[str, list[str]] = {n: [] for n in g.nodes}
    for a, b in g.directed:
        succ[a].append(b)
    dist = {source: 0}
    queue = deque([source])
    while queue:
        n = queue.popleft()
        for m in succ[n]:
            if m not in dist:
                dist[m] = dist[n] + 1
                if m == target:
                    return dist[m]
                queue.append(m)
    return math.inf


def shortest_paths(g: MixedGraph, source: str, target: str) -> list[list[str]]:
    """All shortest directed paths, in lexicographic order."""
    d = causal_distance(g, source, target)
    if d == math.inf:
        return []
    paths = [[source]]
    for _ in range(int(d)):
        paths = [p + [c] for p in paths for c in g.children(p[-1])
                 if causal_distance(g, c, target) == d - len(p)]
    return sorted(p for p in paths if p[-1] == target)


def descendants(g: MixedGraph, node: str) -> set[str]:
    out: set[str] = set()
    stack = [node]
    while stack:
        for c in g.children(stack.pop()):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def _edge_state(g: MixedGraph, a: str, b: str) -> int:
    if (a, b) in g.directed:
        return 1
    if (b, a) in g.directed:
        return 2
    if _pair(a, b) in g.undirected:
        return 3
    return 0


def structural_hamming_distance(a: MixedGraph, b: MixedGraph) -> int:
    """Number of node pairs whose edge status differs; a reversal counts once."""
    if set(a.nodes) != set(b.nodes):
        raise GraphError("graphs have different node sets")
    nodes = sorted(a.nodes)
    total = 0
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            total += _edge_state(a, u, v) != _edge_state(b, u, v)
    return total


def cpdag(g: MixedGraph) -> MixedGraph:
    """Markov-equivalence class of a DAG: keep v-structure arrows, close with Meek rules."""
    if g.undirected:
        raise GraphError("cpdag expects a DAG")
    from .discovery import meek_closure  # late import; discovery depends on this module

    compelled = set()
    for c in g.nodes:
        ps = g.parents(c)
        for i, x in enumerate(ps):
            for y in ps[i + 1:]:
                if not g.adjacent(x, y):
                    compelled.add((x, c))
                    compelled.add((y, c))
    undirected = {_pair(a, b) for a, b in g.directed if (a, b) not in compelled}
    return meek_closure(MixedGraph(g.nodes, frozenset(compelled), frozenset(undirected)))


@dataclass(frozen=True)
class BackgroundKnowledge:
    exogenous: frozenset = frozenset()
    sinks: frozenset = frozenset()
    forbidden: frozenset = frozenset()
    required: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "exogenous", frozenset(self.exogenous))
        object.__setattr__(self, "sinks", frozenset(self.sinks))
        object.__setattr__(self, "forbidden", frozenset(tuple(e) for e in self.forbidden))
        object.__setattr__(self, "required", frozenset(tuple(e) for e in self.required))
        clash = self.required & self.forbidden
        if clash:
            raise GraphError(f"edges both required and forbidden: {sorted(clash)}")
        for a, b in self.required:
            if b in self.exogenous:
                raise GraphError(f"required edge {a}->{b} points into exogenous node")
            if a in self.sinks:
                raise GraphError(f"required edge {a}->{b} leaves sink node")

    def allows(self, a: str, b: str) -> bool:
        """Whether orientation ``a -> b`` is permitted."""
        if b in self.exogenous or a in self.sinks:
            return False
        if (a, b) in self.forbidden:
            return False
        if (b, a) in self.required:
            return False
        return True

    def mentioned(self) -> set[str]:
        out = set(self.exogenous) | set(self.sinks)
        for a, b in self.forbidden | self.required:
            out |= {a, b}
        return out

    def to_dict(self) -> dict:
        return {
            "exogenous": sorted(self.exogenous),
            "sinks": sorted(self.sinks),
            "forbidden": sorted(list(e) for e in self.forbidden),
            "required": sorted(list(e) for e in self.required),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BackgroundKnowledge":
        return cls(frozenset(d.get("exogenous", ())), frozenset(d.get("sinks", ())),
                   frozenset(tuple(e) for e in d.get("forbidden", ())),
                   frozenset(tuple(e) for e in d.get("required", ())))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BackgroundKnowledge":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
