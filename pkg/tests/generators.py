"""Seeded random generators shared by property and acceptance suites."""

from __future__ import annotations

import random

from pcig.graph import build_graph
from pcig.layout import ConstraintKind, relation_satisfied, LayoutConstraint
from pcig.model import (
    BoundingBox,
    ObjectCategory,
    PromptSpec,
    RelationTriple,
    SceneObject,
    ScenePlan,
)

_NOUNS = ["cat", "dog", "tree", "lamp", "table", "bench", "kite", "mug", "bird", "boat", "chair", "vase"]
_ADJECTIVES = ["red", "old", "tall", "small", "shiny", "green", "wooden", "striped"]

# Predicates whose table entries cover every constraint kind without a swap.
_PREDICATE_FOR_KIND = {
    ConstraintKind.LEFT_OF: "left of",
    ConstraintKind.RIGHT_OF: "right of",
    ConstraintKind.ABOVE: "above",
    ConstraintKind.BELOW: "below",
    ConstraintKind.INSIDE: "in",
    ConstraintKind.OVERLAP: "hugging",
    ConstraintKind.NEAR: "next to",
}

_DIRECTIONAL_CHECKED = (
    ConstraintKind.LEFT_OF,
    ConstraintKind.RIGHT_OF,
    ConstraintKind.ABOVE,
    ConstraintKind.BELOW,
)


def random_objects(rng: random.Random, n: int) -> list[SceneObject]:
    objects = []
    for i in range(n):
        roll = rng.random()
        caption = f"a {rng.choice(_ADJECTIVES)} {rng.choice(_NOUNS)}"
        group_key = f"g{i}"
        if roll < 0.1:
            objects.append(
                SceneObject(
                    object_id=i,
                    caption="LABEL TEXT",
                    category=ObjectCategory.TEXT,
                    group_key=group_key,
                    text_payload=rng.choice(["OPEN", "HELLO", "FRESH FRUIT", "EXIT"]),
                )
            )
        elif roll < 0.18:
            objects.append(
                SceneObject(
                    object_id=i,
                    caption="a famous landmark",
                    category=ObjectCategory.PN,
                    group_key=group_key,
                    pn_key=f"landmark-{i}",
                )
            )
        else:
            objects.append(
                SceneObject(object_id=i, caption=caption, category=ObjectCategory.GO, group_key=group_key)
            )
    return objects


def random_solvable_instance(rng: random.Random, max_objects: int = 30):
    """Objects plus triples whose constraint set the solver must satisfy.

    Solvability by construction: containment parents always have a smaller id
    (forest, no cycles), and directional constraints follow per-axis random
    permutations of objects within the same containment scope (acyclic).
    """
    n = rng.randint(1, max_objects)
    objects = random_objects(rng, n)
    parent: dict[int, int] = {}
    triples: list[RelationTriple] = []

    for i in range(1, n):
        if rng.random() < 0.25:
            candidates = [j for j in range(i) if parent.get(j) is None or rng.random() < 0.3]
            if candidates:
                p = rng.choice(candidates)
                # Cap nesting at two levels to keep instances realistic.
                depth = 0
                node = p
                while node in parent:
                    node = parent[node]
                    depth += 1
                if depth < 2:
                    parent[i] = p
                    triples.append(RelationTriple(i, "in", p))

    def scope(i: int) -> int:
        return parent.get(i, -1)

    x_perm = list(range(n))
    y_perm = list(range(n))
    rng.shuffle(x_perm)
    rng.shuffle(y_perm)
    x_rank = {oid: r for r, oid in enumerate(x_perm)}
    y_rank = {oid: r for r, oid in enumerate(y_perm)}

    pair_budget = rng.randint(0, max(1, n // 2))
    attempts = 0
    while pair_budget > 0 and attempts < n * 4:
        attempts += 1
        a, b = rng.randrange(n), rng.randrange(n)
        if a == b or scope(a) != scope(b):
            continue
        kind = rng.choice(
            [
                ConstraintKind.LEFT_OF,
                ConstraintKind.ABOVE,
                ConstraintKind.NEAR,
                ConstraintKind.OVERLAP,
            ]
        )
        if kind is ConstraintKind.LEFT_OF:
            lo, hi = (a, b) if x_rank[a] < x_rank[b] else (b, a)
            triples.append(RelationTriple(lo, "left of", hi))
        elif kind is ConstraintKind.ABOVE:
            lo, hi = (a, b) if y_rank[a] < y_rank[b] else (b, a)
            triples.append(RelationTriple(lo, "above", hi))
        else:
            triples.append(RelationTriple(a, _PREDICATE_FOR_KIND[kind], b))
        pair_budget -= 1

    graph = build_graph(objects, triples)
    return objects, triples, graph


def random_box(rng: random.Random, max_side: float = 0.5) -> BoundingBox:
    w = round(rng.uniform(0.01, max_side), 6)
    h = round(rng.uniform(0.01, max_side), 6)
    x = round(rng.uniform(0.0, 1.0 - w - 1e-6), 6)
    y = round(rng.uniform(0.0, 1.0 - h - 1e-6), 6)
    return BoundingBox(x=x, y=y, w=w, h=h)


def random_valid_plan(rng: random.Random, max_objects: int = 12) -> ScenePlan:
    """A plan satisfying every invariant, including relation consistency."""
    n = rng.randint(1, max_objects)
    objects = list(random_objects(rng, n))
    # Occasionally make a counted group out of the tail objects.
    if n >= 3 and rng.random() < 0.4:
        k = rng.randint(2, min(4, n))
        base = n - k
        for j in range(k):
            source = objects[base + j]
            objects[base + j] = SceneObject(
                object_id=source.object_id,
                caption="a grazing sheep",
                category=ObjectCategory.GO,
                group_key="sheep-flock",
                instance_index=j,
            )
    boxes = {obj.object_id: random_box(rng) for obj in objects}

    triples = []
    for _ in range(rng.randint(0, n)):
        a, b = rng.randrange(n), rng.randrange(n)
        if a == b:
            continue
        satisfied_kinds = [
            kind
            for kind in _DIRECTIONAL_CHECKED
            if relation_satisfied(LayoutConstraint(kind, a, b), boxes)
        ]
        if satisfied_kinds and rng.random() < 0.7:
            kind = rng.choice(satisfied_kinds)
            triples.append(RelationTriple(a, _PREDICATE_FOR_KIND[kind], b))
        else:
            triples.append(RelationTriple(a, rng.choice(["next to", "hugging", "floating with"]), b))

    return ScenePlan(
        prompt=PromptSpec(raw_text=f"generated scene {rng.randrange(10**6)}", id=f"gen-{rng.randrange(10**9)}"),
        canvas_width_px=rng.choice([256, 512, 768]),
        canvas_height_px=rng.choice([256, 512, 768]),
        objects=tuple(objects),
        triples=tuple(triples),
        anchor_id=rng.randrange(n),
        boxes=boxes,
    )
