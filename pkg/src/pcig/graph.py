"""Relation knowledge graph over scene objects and anchor selection.

Objects are nodes, triples are directed edges. The anchor is the node with
the maximum undirected degree; it becomes the layout pivot.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import GraphError
from .model import RelationTriple, SceneObject


@dataclass(frozen=True)
class SceneGraph:
    """Immutable graph view: node ids, raw edges, and an adjacency multiset.

    Edges are stored exactly as given (directed, duplicates kept); degree
    counts each incident edge once regardless of direction.
    """

    node_ids: tuple[int, ...]
    edges: tuple[RelationTriple, ...]
    adjacency: dict[int, Counter]

    def degree(self, node_id: int) -> int:
        return sum(self.adjacency[node_id].values())


def build_graph(objects: Sequence[SceneObject], triples: Iterable[RelationTriple]) -> SceneGraph:
    """Assemble the graph; isolated objects remain as degree-0 nodes."""
    node_ids = tuple(obj.object_id for obj in objects)
    known = set(node_ids)
    adjacency: dict[int, Counter] = {node_id: Counter() for node_id in node_ids}
    edges = tuple(triples)
    for triple in edges:
        for endpoint in (triple.subject_id, triple.object_id):
            if endpoint not in known:
                raise GraphError(
                    "DANGLING_EDGE",
                    f"triple ({triple.subject_id}, {triple.predicate!r}, {triple.object_id}) "
                    f"references unknown object {endpoint}",
                )
        adjacency[triple.subject_id][triple.object_id] += 1
        adjacency[triple.object_id][triple.subject_id] += 1
    return SceneGraph(node_ids=node_ids, edges=edges, adjacency=adjacency)


def select_anchor(graph: SceneGraph) -> int:
    """Node of maximum undirected degree; ties broken by smallest object id."""
    if not graph.node_ids:
        raise GraphError("EMPTY_GRAPH", "cannot select an anchor in an empty graph")
    return min(graph.node_ids, key=lambda node_id: (-graph.degree(node_id), node_id))


def to_dot(graph: SceneGraph, objects: Sequence[SceneObject] = ()) -> str:
    """DOT-format rendering of the graph for debugging."""
    captions = {obj.object_id: obj.caption for obj in objects}
    lines = ["digraph scene {"]
    for node_id in graph.node_ids:
        label = captions.get(node_id, str(node_id)).replace('"', r"\"")
        lines.append(f'  n{node_id} [label="{node_id}: {label}"];')
    for edge in graph.edges:
        predicate = edge.predicate.replace('"', r"\"")
        lines.append(f'  n{edge.subject_id} -> n{edge.object_id} [label="{predicate}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
