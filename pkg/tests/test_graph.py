import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcig.errors import GraphError
from pcig.graph import build_graph, select_anchor, to_dot
from pcig.model import ObjectCategory, RelationTriple, SceneObject

from generators import random_objects


def brute_force_anchor(n: int, triples: list[RelationTriple]) -> int:
    """Independent oracle: count incident edges per node, argmax, lowest index."""
    degree = [0] * n
    for t in triples:
        degree[t.subject_id] += 1
        degree[t.object_id] += 1
    return degree.index(max(degree))


def objects_for(n: int) -> list[SceneObject]:
    return [
        SceneObject(object_id=i, caption=f"object {i}", category=ObjectCategory.GO, group_key=f"g{i}")
        for i in range(n)
    ]


def random_triples(rng: random.Random, n: int, m: int) -> list[RelationTriple]:
    triples = []
    while len(triples) < m:
        a, b = rng.randrange(n), rng.randrange(n)
        if a != b:
            triples.append(RelationTriple(a, "near", b))
    return triples


class TestBuildGraph:
    def test_fig2_shape(self):
        triples = [RelationTriple(0, "with", 1), RelationTriple(2, "written on", 0)]
        graph = build_graph(objects_for(3), triples)
        assert len(graph.node_ids) == 3
        assert len(graph.edges) == 2
        assert graph.degree(0) == 2

    def test_single_isolated_node(self):
        graph = build_graph(objects_for(1), [])
        assert graph.node_ids == (0,)
        assert graph.edges == ()
        assert graph.degree(0) == 0

    def test_giraffe_scene_degree(self):
        # 6 giraffes (0-5), plain (6), trees (7); counted by hand: plain
        # touches 6 giraffe edges plus the trees edge.
        triples = [RelationTriple(i, "in", 6) for i in range(6)]
        triples.append(RelationTriple(7, "in background of", 6))
        graph = build_graph(objects_for(8), triples)
        assert graph.degree(6) == 7
        assert select_anchor(graph) == 6

    def test_dangling_edge(self):
        with pytest.raises(GraphError) as err:
            build_graph(objects_for(2), [RelationTriple(0, "on", 5)])
        assert err.value.code == "DANGLING_EDGE"

    def test_duplicate_edges_both_count(self):
        triples = [RelationTriple(0, "on", 1), RelationTriple(0, "on", 1)]
        graph = build_graph(objects_for(2), triples)
        assert graph.degree(0) == 2 and graph.degree(1) == 2


class TestSelectAnchor:
    def test_star_center(self):
        triples = [RelationTriple(leaf, "near", 2) for leaf in (0, 1, 3)]
        graph = build_graph(objects_for(4), triples)
        assert select_anchor(graph) == 2 == brute_force_anchor(4, triples)

    def test_single_node(self):
        assert select_anchor(build_graph(objects_for(1), [])) == 0

    def test_tie_breaks_to_lowest_index(self):
        triples = [RelationTriple(0, "near", 1)]
        assert select_anchor(build_graph(objects_for(2), triples)) == 0

    def test_edgeless_graph_returns_first(self):
        assert select_anchor(build_graph(objects_for(5), [])) == 0

    def test_empty_graph(self):
        with pytest.raises(GraphError) as err:
            select_anchor(build_graph([], []))
        assert err.value.code == "EMPTY_GRAPH"

    def test_matches_brute_force_on_random_graphs(self):
        rng = random.Random(7)
        for _ in range(300):
            n = rng.randint(1, 50)
            triples = random_triples(rng, n, rng.randint(0, 2 * n)) if n > 1 else []
            graph = build_graph(objects_for(n), triples)
            assert select_anchor(graph) == brute_force_anchor(n, triples)

    def test_triple_order_does_not_change_anchor(self):
        rng = random.Random(13)
        for _ in range(50):
            n = rng.randint(2, 20)
            triples = random_triples(rng, n, rng.randint(1, 2 * n))
            baseline = select_anchor(build_graph(objects_for(n), triples))
            for _ in range(5):
                shuffled = triples[:]
                rng.shuffle(shuffled)
                assert select_anchor(build_graph(objects_for(n), shuffled)) == baseline


@given(st.integers(min_value=1, max_value=50), st.integers(min_value=0, max_value=120), st.integers())
@settings(max_examples=200, deadline=None)
def test_handshake_property(n, m, seed):
    rng = random.Random(seed)
    triples = random_triples(rng, n, m) if n > 1 else []
    graph = build_graph(objects_for(n), triples)
    assert sum(graph.degree(i) for i in graph.node_ids) == 2 * len(graph.edges)


def test_dot_export():
    rng = random.Random(3)
    objects = random_objects(rng, 3)
    triples = [RelationTriple(0, "near", 1)]
    dot = to_dot(build_graph(objects, triples), objects)
    assert dot.startswith("digraph scene {")
    assert 'n0 -> n1 [label="near"]' in dot
