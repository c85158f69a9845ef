import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_twin.graph import (BackgroundKnowledge, CycleError, GraphError, MixedGraph,
                               causal_distance, cpdag, descendants, shortest_paths,
                               structural_hamming_distance, topological_order)

CHAIN = MixedGraph(("a", "b", "c", "d"), frozenset({("a", "b"), ("b", "c"), ("c", "d")}))


def test_cycle_rejected():
    with pytest.raises(CycleError):
        MixedGraph(("a", "b", "c"), frozenset({("a", "b"), ("b", "c"), ("c", "a")}))


def test_duplicate_pair_rejected():
    with pytest.raises(GraphError):
        MixedGraph(("a", "b"), frozenset({("a", "b")}), frozenset({frozenset({"a", "b"})}))


def test_unknown_node_and_self_loop():
    with pytest.raises(GraphError):
        MixedGraph(("a",), frozenset({("a", "z")}))
    with pytest.raises(GraphError):
        MixedGraph(("a",), frozenset({("a", "a")}))


def test_topological_order_respects_edges():
    order = topological_order(CHAIN)
    assert order == ["a", "b", "c", "d"]


def test_distance_and_paths():
    g = CHAIN.with_edges(directed=CHAIN.directed | {("a", "c")})
    assert causal_distance(g, "a", "d") == 2
    assert causal_distance(g, "d", "a") == math.inf
    assert shortest_paths(g, "a", "d") == [["a", "c", "d"]]
    assert descendants(g, "b") == {"c", "d"}


def test_shd_counts_reversal_once():
    rev = MixedGraph(CHAIN.nodes, frozenset({("b", "a"), ("b", "c"), ("c", "d")}))
    assert structural_hamming_distance(CHAIN, rev) == 1
    missing = MixedGraph(CHAIN.nodes, frozenset({("a", "b"), ("b", "c")}))
    assert structural_hamming_distance(CHAIN, missing) == 1
    assert structural_hamming_distance(CHAIN, CHAIN) == 0


def test_cpdag_keeps_only_compelled_arrows():
    collider = MixedGraph(("x", "y", "z"), frozenset({("x", "z"), ("y", "z")}))
    assert cpdag(collider).directed == collider.directed
    chain = cpdag(MixedGraph(("x", "y", "z"), frozenset({("x", "y"), ("y", "z")})))
    assert not chain.directed and len(chain.undirected) == 2
    # the collider's compelled arrows propagate down to w
    g = cpdag(MixedGraph(("x", "y", "z", "w"), frozenset({("x", "z"), ("y", "z"), ("z", "w")})))
    assert ("z", "w") in g.directed


def test_background_knowledge():
    bk = BackgroundKnowledge(exogenous=frozenset({"a"}), sinks=frozenset({"d"}),
                             forbidden=frozenset({("b", "c")}))
    assert not bk.allows("b", "a")
    assert not bk.allows("d", "c")
    assert not bk.allows("b", "c")
    assert bk.allows("c", "b")
    with pytest.raises(GraphError):
        BackgroundKnowledge(required=frozenset({("a", "b")}), forbidden=frozenset({("a", "b")}))


def test_graph_json_roundtrip(tmp_path):
    g = CHAIN.with_edges(directed=CHAIN.directed, undirected=[("a", "d")])
    p = tmp_path / "g.json"
    g.save(p)
    assert MixedGraph.load(p) == g


@st.composite
def dags(draw):
    n = draw(st.integers(2, 7))
    nodes = tuple(f"v{i}" for i in range(n))
    edges = {(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n)
             if draw(st.booleans())}
    perm = draw(st.permutations(nodes))
    return MixedGraph(tuple(perm), frozenset(edges))


@settings(max_examples=60, deadline=None)
@given(dags())
def test_topological_order_property(g):
    pos = {n: i for i, n in enumerate(topological_order(g))}
    assert all(pos[a] < pos[b] for a, b in g.directed)


@settings(max_examples=60, deadline=None)
@given(dags())
def test_cpdag_is_idempotent_and_preserves_skeleton(g):
    c = cpdag(g)
    assert structural_hamming_distance(g, MixedGraph(g.nodes, frozenset(), frozenset(
        frozenset(e) for e in g.directed))) == len(g.directed)
    skel = {frozenset(e) for e in c.directed} | set(c.undirected)
    assert skel == {frozenset(e) for e in g.directed}
    assert c.directed <= g.directed
