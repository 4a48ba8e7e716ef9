"""Bounding-box layout: predicate constraints, deterministic solving, geometry.

The solver is anchor-centered: the max-degree object is pinned at a fixed
canvas position, containers grow to hold their members, members are placed
on banded grids, and a projection/push-apart phase separates unintended
overlaps while preserving directional constraints. The whole computation is
a pure function of its inputs (including the RNG seed), so repeated runs are
bitwise identical.
"""

from __future__ import annotations

import enum
import json
import math
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .errors import LayoutError
from .graph import SceneGraph, select_anchor
from .model import BoundingBox, Diagnostic, ObjectCategory, RelationTriple, SceneObject, ScenePlan
from .jsonutil import quantize


class ConstraintKind(enum.Enum):
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    ABOVE = "above"
    BELOW = "below"
    INSIDE = "inside"
    OVERLAP = "overlap"
    NEAR = "near"


#: Kinds checked by plan validation; overlap/near are soft placement hints.
DIRECTIONAL_KINDS = frozenset(
    {
        ConstraintKind.LEFT_OF,
        ConstraintKind.RIGHT_OF,
        ConstraintKind.ABOVE,
        ConstraintKind.BELOW,
        ConstraintKind.INSIDE,
    }
)

DEFAULT_KIND = ConstraintKind.NEAR

_AUX_RE = re.compile(r"^(is|are|was|were)\s+")


@dataclass(frozen=True)
class LayoutConstraint:
    """One geometric requirement between two objects, derived from a triple."""

    kind: ConstraintKind
    a: int
    b: int
    derived_from: Optional[RelationTriple] = None


@dataclass(frozen=True)
class LayoutConfig:
    anchor_center: tuple[float, float] = (0.5, 0.55)
    anchor_size: float = 0.45
    sibling_size: float = 0.22
    text_box_height: float = 0.08
    text_char_width: float = 0.04
    text_width_min: float = 0.10
    text_width_max: float = 0.90
    max_push_iterations: int = 200
    iou_threshold: float = 0.05
    near_threshold: float = 0.35
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("anchor_size", "sibling_size", "text_box_height", "iou_threshold", "near_threshold"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.max_push_iterations < 1:
            raise ValueError("max_push_iterations must be >= 1")


@dataclass
class LayoutResult:
    """Solver or LLM output: boxes plus any best-effort diagnostics."""

    boxes: dict[int, BoundingBox]
    diagnostics: list[Diagnostic] = field(default_factory=list)
    source: str = "solver"


# --- predicate table ---------------------------------------------------------

_table_cache: Optional[dict[str, tuple[ConstraintKind, bool]]] = None


def predicate_table() -> dict[str, tuple[ConstraintKind, bool]]:
    """Predicate -> (kind, swap) mapping loaded from the shipped config file."""
    global _table_cache
    if _table_cache is None:
        table: dict[str, tuple[ConstraintKind, bool]] = {}
        text = resources.files("pcig").joinpath("data/predicates.cfg").read_text("utf-8")
        for raw_line in text.splitlines():
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            predicate, _, rhs = line.partition("->")
            parts = rhs.split()
            if not parts:
                raise LayoutError("PREDICATE_TABLE_INVALID", f"unparseable line {raw_line!r}")
            kind = ConstraintKind(parts[0])
            swap = len(parts) > 1 and parts[1] == "swap"
            table[" ".join(predicate.split()).lower()] = (kind, swap)
        _table_cache = table
    return _table_cache


def constraint_for_predicate(predicate: str) -> tuple[ConstraintKind, bool]:
    """Table lookup; total — unknown predicates map to the default kind."""
    key = " ".join(predicate.split()).lower()
    key = _AUX_RE.sub("", key)
    return predicate_table().get(key, (DEFAULT_KIND, False))


def predicates_to_constraints(triples: Iterable[RelationTriple]) -> list[LayoutConstraint]:
    """One constraint per triple via the predicate table."""
    constraints = []
    for triple in triples:
        kind, swap = constraint_for_predicate(triple.predicate)
        a, b = triple.subject_id, triple.object_id
        if swap:
            a, b = b, a
        constraints.append(LayoutConstraint(kind=kind, a=a, b=b, derived_from=triple))
    return constraints


# --- box geometry ------------------------------------------------------------


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


def box_contains(inner: BoundingBox, outer: BoundingBox, tol: float = 1e-9) -> bool:
    return (
        inner.x >= outer.x - tol
        and inner.y >= outer.y - tol
        and inner.x + inner.w <= outer.x + outer.w + tol
        and inner.y + inner.h <= outer.y + outer.h + tol
    )


def relation_satisfied(
    constraint: LayoutConstraint,
    boxes: Mapping[int, BoundingBox],
    near_threshold: float = 0.35,
) -> bool:
    """Geometric truth of one constraint against concrete boxes. Pure."""
    a = boxes[constraint.a]
    b = boxes[constraint.b]
    kind = constraint.kind
    if kind is ConstraintKind.LEFT_OF:
        return a.cx < b.cx
    if kind is ConstraintKind.RIGHT_OF:
        return a.cx > b.cx
    if kind is ConstraintKind.ABOVE:
        return a.cy < b.cy
    if kind is ConstraintKind.BELOW:
        return a.cy > b.cy
    if kind is ConstraintKind.INSIDE:
        return box_contains(a, b)
    if kind is ConstraintKind.OVERLAP:
        return box_iou(a, b) > 0.0
    if kind is ConstraintKind.NEAR:
        return math.hypot(a.cx - b.cx, a.cy - b.cy) <= near_threshold
    raise AssertionError(f"unhandled kind {kind}")  # pragma: no cover


def spatial_triple_violations(plan: ScenePlan) -> list[tuple[RelationTriple, str]]:
    """Triples whose directional constraint fails against the plan's boxes.

    Used by plan validation; overlap/near predicates are placement hints and
    are not validated.
    """
    violations = []
    for constraint in predicates_to_constraints(plan.triples):
        if constraint.kind not in DIRECTIONAL_KINDS:
            continue
        if constraint.a not in plan.boxes or constraint.b not in plan.boxes:
            continue
        if not relation_satisfied(constraint, plan.boxes):
            assert constraint.derived_from is not None
            violations.append((constraint.derived_from, constraint.kind.value))
    return violations


# --- deterministic solver ----------------------------------------------------

_CENTER_GAP = 0.02
_EDGE_MARGIN = 0.002
_SIZE_FLOOR = 0.012


def _find_cycle(edges: Sequence[tuple[int, int]]) -> Optional[list[int]]:
    adjacency: dict[int, list[int]] = {}
    for lo, hi in edges:
        adjacency.setdefault(lo, []).append(hi)
        adjacency.setdefault(hi, [])
    state: dict[int, int] = {}  # 1 = on stack, 2 = done

    def visit(node: int, trail: list[int]) -> Optional[list[int]]:
        state[node] = 1
        trail.append(node)
        for nxt in adjacency[node]:
            if state.get(nxt) == 1:
                return trail[trail.index(nxt):] + [nxt]
            if state.get(nxt) is None:
                found = visit(nxt, trail)
                if found:
                    return found
        trail.pop()
        state[node] = 2
        return None

    for start in sorted(adjacency):
        if state.get(start) is None:
            found = visit(start, [])
            if found:
                return found
    return None


class _Solver:
    def __init__(
        self,
        graph: SceneGraph,
        objects: Sequence[SceneObject],
        constraints: Sequence[LayoutConstraint],
        config: LayoutConfig,
    ):
        self.config = config
        self.objects = {obj.object_id: obj for obj in objects}
        self.ids = sorted(self.objects)
        self.anchor = select_anchor(graph)
        self.diagnostics: list[Diagnostic] = []
        self.constraints = list(constraints)
        # mutable state: id -> [cx, cy] and id -> [w, h]
        self.pos: dict[int, list[float]] = {}
        self.dim: dict[int, list[float]] = {}
        self.parent: dict[int, int] = {}
        self.children: dict[int, list[int]] = {}
        self.anchor_chain: set[int] = set()
        self.x_edges: list[tuple[int, int]] = []
        self.y_edges: list[tuple[int, int]] = []
        self.near_pairs: list[tuple[int, int]] = []
        self.overlap_pairs: list[tuple[int, int]] = []

    # -- setup ---------------------------------------------------------------

    def classify_constraints(self) -> None:
        inside_edges = []
        for c in self.constraints:
            if c.a == c.b or c.a not in self.objects or c.b not in self.objects:
                raise LayoutError(
                    "LAYOUT_INFEASIBLE", f"constraint {c.kind.value}({c.a}, {c.b}) references invalid objects"
                )
            if c.kind is ConstraintKind.LEFT_OF:
                self.x_edges.append((c.a, c.b))
            elif c.kind is ConstraintKind.RIGHT_OF:
                self.x_edges.append((c.b, c.a))
            elif c.kind is ConstraintKind.ABOVE:
                self.y_edges.append((c.a, c.b))
            elif c.kind is ConstraintKind.BELOW:
                self.y_edges.append((c.b, c.a))
            elif c.kind is ConstraintKind.INSIDE:
                inside_edges.append((c.a, c.b))
            elif c.kind is ConstraintKind.NEAR:
                self.near_pairs.append((c.a, c.b))
            elif c.kind is ConstraintKind.OVERLAP:
                self.overlap_pairs.append((c.a, c.b))

        for axis, edges in (("horizontal", self.x_edges), ("vertical", self.y_edges), ("containment", inside_edges)):
            cycle = _find_cycle(edges)
            if cycle:
                raise LayoutError(
                    "LAYOUT_INFEASIBLE",
                    f"contradictory {axis} constraints form a cycle: {' -> '.join(map(str, cycle))}",
                )

        for a, b in inside_edges:
            if a in self.parent and self.parent[a] != b:
                # One container per object; extra containments soften to near.
                self.near_pairs.append((a, b))
                self.diagnostics.append(
                    Diagnostic(
                        "CONSTRAINT_DOWNGRADED",
                        "warning",
                        f"object {a} already contained in {self.parent[a]}; inside({a}, {b}) treated as near",
                        (a, b),
                    )
                )
            else:
                self.parent[a] = b
        self.children = {i: [] for i in self.ids}
        for child in sorted(self.parent):
            self.children[self.parent[child]].append(child)
        self.anchor_chain = {self.anchor}
        node = self.anchor
        while node in self.parent:
            node = self.parent[node]
            self.anchor_chain.add(node)

    def base_size(self, oid: int) -> list[float]:
        obj = self.objects[oid]
        cfg = self.config
        if obj.category is ObjectCategory.TEXT:
            chars = len(obj.text_payload or obj.caption)
            width = min(max(cfg.text_char_width * chars, cfg.text_width_min), cfg.text_width_max)
            return [width, cfg.text_box_height]
        if oid == self.anchor:
            return [cfg.anchor_size, cfg.anchor_size]
        return [cfg.sibling_size, cfg.sibling_size]

    def bias(self, oid: int) -> tuple[int, int]:
        """(x, y) placement bias of a child relative to its own container."""
        p = self.parent.get(oid)
        bx = by = 0
        if p is not None:
            if (oid, p) in self.x_edges:
                bx = -1
            elif (p, oid) in self.x_edges:
                bx = 1
            if (oid, p) in self.y_edges:
                by = -1
            elif (p, oid) in self.y_edges:
                by = 1
        return bx, by

    def _bands(self, container: int) -> tuple[list[int], list[int], list[int]]:
        top, mid, bottom = [], [], []
        for child in self.children[container]:
            by = self.bias(child)[1]
            (top if by < 0 else bottom if by > 0 else mid).append(child)
        key = lambda oid: (self.bias(oid)[0], oid)
        return sorted(top, key=key), sorted(mid, key=key), sorted(bottom, key=key)

    def grow_containers(self) -> None:
        """Widen/heighten containers, deepest first, to hold their members."""

        def depth(oid: int) -> int:
            d = 0
            node = oid
            while node in self.parent:
                node = self.parent[node]
                d += 1
            return d

        containers = sorted((c for c in self.ids if self.children[c]), key=lambda c: (-depth(c), c))
        for container in containers:
            top, mid, bottom = self._bands(container)
            need_w = 0.0
            need_h = 0.0
            for band in (top, bottom):
                if band:
                    need_w = max(need_w, sum(self.dim[k][0] for k in band) * 1.15)
                    need_h += max(self.dim[k][1] for k in band) * 1.25
            if mid:
                cols = math.ceil(math.sqrt(len(mid)))
                rows = [mid[i : i + cols] for i in range(0, len(mid), cols)]
                need_w = max(need_w, max(sum(self.dim[k][0] for k in row) * 1.15 for row in rows))
                need_h += sum(max(self.dim[k][1] for k in row) * 1.2 for row in rows)
            w, h = self.dim[container]
            self.dim[container] = [
                min(max(w, need_w / 0.92), 0.96),
                min(max(h, need_h / 0.92), 0.96),
            ]

    # -- placement -------------------------------------------------------------

    def clamp_center(self, oid: int) -> None:
        w, h = self.dim[oid]
        cx, cy = self.pos[oid]
        self.pos[oid] = [
            min(max(cx, w / 2 + _EDGE_MARGIN), 1 - w / 2 - _EDGE_MARGIN),
            min(max(cy, h / 2 + _EDGE_MARGIN), 1 - h / 2 - _EDGE_MARGIN),
        ]

    def current_box(self, oid: int) -> BoundingBox:
        w, h = self.dim[oid]
        cx, cy = self.pos[oid]
        return BoundingBox(x=cx - w / 2, y=cy - h / 2, w=max(w, _SIZE_FLOOR), h=max(h, _SIZE_FLOOR))

    def _directional_ok(self, oid: int, center: tuple[float, float], placed: set[int]) -> bool:
        for lo, hi in self.x_edges:
            if oid == lo and hi in placed and not center[0] < self.pos[hi][0] - 0.01:
                return False
            if oid == hi and lo in placed and not center[0] > self.pos[lo][0] + 0.01:
                return False
        for lo, hi in self.y_edges:
            if oid == lo and hi in placed and not center[1] < self.pos[hi][1] - 0.01:
                return False
            if oid == hi and lo in placed and not center[1] > self.pos[lo][1] + 0.01:
                return False
        return True

    def _root_slots(self, oid: int) -> list[tuple[float, float]]:
        aw, ah = self.dim[self.anchor]
        ow, oh = self.dim[oid]
        ax, ay = self.pos[self.anchor]
        diag = 1 / math.sqrt(2)
        dirs = [(1, 0), (-1, 0), (0, -1), (0, 1), (diag, -diag), (-diag, -diag), (diag, diag), (-diag, diag)]
        slots = []
        for ring in (1.0, 1.45, 1.95, 2.5):
            for dx, dy in dirs:
                off_x = (aw / 2 + ow / 2 + 0.04) * ring
                off_y = (ah / 2 + oh / 2 + 0.04) * ring
                slots.append((ax + dx * off_x, ay + dy * off_y))
        for gy in range(1, 6):
            for gx in range(1, 6):
                slots.append((gx / 6, gy / 6))
        return slots

    def _clamped(self, oid: int, center: tuple[float, float]) -> tuple[float, float]:
        w, h = self.dim[oid]
        return (
            min(max(center[0], w / 2 + _EDGE_MARGIN), 1 - w / 2 - _EDGE_MARGIN),
            min(max(center[1], h / 2 + _EDGE_MARGIN), 1 - h / 2 - _EDGE_MARGIN),
        )

    def place_roots(self, rng: random.Random) -> list[int]:
        placed: list[int] = []
        placed_set: set[int] = set()

        def mark(oid: int) -> None:
            placed.append(oid)
            placed_set.add(oid)

        # The anchor is pinned; its enclosing containers are centered on it.
        self.pos[self.anchor] = list(self.config.anchor_center)
        self.clamp_center(self.anchor)
        mark(self.anchor)
        node = self.anchor
        while node in self.parent:
            node = self.parent[node]
            self.pos[node] = list(self.pos[self.anchor])
            self.clamp_center(node)
            mark(node)

        constrained = {c.a for c in self.constraints} | {c.b for c in self.constraints}
        roots = [i for i in self.ids if i not in self.parent and i not in placed_set]
        for oid in roots:
            jitter = (0.0, 0.0)
            if oid not in constrained:
                jitter = (rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02))
            chosen = None
            fallback = None
            for slot in self._root_slots(oid):
                center = self._clamped(oid, (slot[0] + jitter[0], slot[1] + jitter[1]))
                if not self._directional_ok(oid, center, placed_set):
                    continue
                if fallback is None:
                    fallback = center
                box = BoundingBox(
                    x=center[0] - self.dim[oid][0] / 2,
                    y=center[1] - self.dim[oid][1] / 2,
                    w=self.dim[oid][0],
                    h=self.dim[oid][1],
                )
                if all(box_iou(box, self.current_box(p)) <= 0.02 for p in placed if p not in self.parent):
                    chosen = center
                    break
            self.pos[oid] = list(chosen or fallback or self._clamped(oid, self.config.anchor_center))
            mark(oid)
        return placed

    def place_children(self, placed: list[int]) -> None:
        queue = [oid for oid in placed if self.children[oid]]
        seen = set(placed)
        while queue:
            container = queue.pop(0)
            cw, ch = self.dim[container]
            ccx, ccy = self.pos[container]
            ix, iy = ccx - cw * 0.46, ccy - ch * 0.46
            iw, ih = cw * 0.92, ch * 0.92
            top, mid, bottom = self._bands(container)
            top_h = max((self.dim[k][1] for k in top), default=0.0) * 1.2
            bottom_h = max((self.dim[k][1] for k in bottom), default=0.0) * 1.2
            mid_h = max(ih - top_h - bottom_h, 0.02)

            def lay_band(band: list[int], cy: float, band_h: float) -> None:
                slot_w = iw / max(len(band), 1)
                for j, kid in enumerate(band):
                    if kid in seen:
                        continue
                    if self._shrinkable(kid):
                        self._shrink_to(kid, slot_w * 0.9, max(band_h, 0.02) * 0.9)
                    self.pos[kid] = [ix + (j + 0.5) * slot_w, cy]

            lay_band(top, iy + top_h / 2, top_h)
            lay_band(bottom, iy + ih - bottom_h / 2, bottom_h)

            if mid:
                cols = math.ceil(math.sqrt(len(mid)))
                rows = math.ceil(len(mid) / cols)
                cell_w, cell_h = iw / cols, mid_h / rows
                for index, kid in enumerate(mid):
                    if kid in seen:
                        continue
                    row, col = divmod(index, cols)
                    if self._shrinkable(kid):
                        self._shrink_to(kid, cell_w * 0.9, cell_h * 0.9)
                    self.pos[kid] = [ix + (col + 0.5) * cell_w, iy + top_h + (row + 0.5) * cell_h]

            for kid in self.children[container]:
                seen.add(kid)
                if self.children[kid]:
                    queue.append(kid)

    def _shrink_to(self, oid: int, max_w: float, max_h: float) -> None:
        w, h = self.dim[oid]
        self.dim[oid] = [max(min(w, max_w), _SIZE_FLOOR), max(min(h, max_h), _SIZE_FLOOR)]

    def _shrinkable(self, oid: int) -> bool:
        """Containers and the pinned anchor chain keep their grown sizes."""
        return oid not in self.anchor_chain and not self.children[oid]

    # -- refinement ------------------------------------------------------------

    def _clamp_inside(self, child: int, container: int) -> bool:
        """Pull `child` into `container`'s interior; containers of the pinned
        anchor move themselves instead."""
        cw, ch = self.dim[container]
        pad_x, pad_y = cw * 0.03, ch * 0.03
        w, h = self.dim[child]
        if w > cw - 2 * pad_x or h > ch - 2 * pad_y:
            if self._shrinkable(child):
                self._shrink_to(child, cw - 2 * pad_x, ch - 2 * pad_y)
            else:
                # Never squeeze the anchor chain or a populated container:
                # widen this container (bounded) to take the child instead.
                self.dim[container] = [
                    min(max(cw, w / 0.92 + 0.01), 0.98),
                    min(max(ch, h / 0.92 + 0.01), 0.98),
                ]
                cw, ch = self.dim[container]
                pad_x, pad_y = cw * 0.03, ch * 0.03
            w, h = self.dim[child]
        lo_x = self.pos[container][0] - cw / 2 + pad_x + w / 2
        hi_x = self.pos[container][0] + cw / 2 - pad_x - w / 2
        lo_y = self.pos[container][1] - ch / 2 + pad_y + h / 2
        hi_y = self.pos[container][1] + ch / 2 - pad_y - h / 2
        cx, cy = self.pos[child]
        nx, ny = min(max(cx, lo_x), hi_x), min(max(cy, lo_y), hi_y)
        if child == self.anchor and (nx != cx or ny != cy):
            # Move the container so its interior covers the pinned anchor.
            self.pos[container][0] += cx - nx
            self.pos[container][1] += cy - ny
            self.clamp_center(container)
            return True
        if nx != cx or ny != cy:
            self.pos[child] = [nx, ny]
            return True
        return False

    def _shift(self, oid: int, axis: int, amount: float) -> None:
        if oid == self.anchor:
            return
        self.pos[oid][axis] += amount

    def projection_sweeps(self, rounds: int) -> None:
        near_limit = self.config.near_threshold - 0.01
        for _ in range(rounds):
            moved = False
            for edges, axis in ((self.x_edges, 0), (self.y_edges, 1)):
                for lo, hi in edges:
                    gap = self.pos[hi][axis] - self.pos[lo][axis]
                    if gap < _CENTER_GAP - 1e-12:
                        deficit = _CENTER_GAP - gap
                        if lo == self.anchor:
                            self._shift(hi, axis, deficit)
                        elif hi == self.anchor:
                            self._shift(lo, axis, -deficit)
                        else:
                            self._shift(lo, axis, -deficit / 2)
                            self._shift(hi, axis, deficit / 2)
                        moved = True
            for child in sorted(self.parent):
                moved |= self._clamp_inside(child, self.parent[child])
            for oid in self.ids:
                before = tuple(self.pos[oid])
                self.clamp_center(oid)
                moved |= tuple(self.pos[oid]) != before
            for a, b in self.near_pairs:
                dx = self.pos[b][0] - self.pos[a][0]
                dy = self.pos[b][1] - self.pos[a][1]
                dist = math.hypot(dx, dy)
                if dist > near_limit:
                    pull = (dist - near_limit) / dist
                    if a == self.anchor:
                        self._shift(b, 0, -dx * pull)
                        self._shift(b, 1, -dy * pull)
                    elif b == self.anchor:
                        self._shift(a, 0, dx * pull)
                        self._shift(a, 1, dy * pull)
                    else:
                        self._shift(a, 0, dx * pull / 2)
                        self._shift(a, 1, dy * pull / 2)
                        self._shift(b, 0, -dx * pull / 2)
                        self._shift(b, 1, -dy * pull / 2)
                    moved = True
            for a, b in self.overlap_pairs:
                if box_iou(self.current_box(a), self.current_box(b)) > 0.0:
                    continue
                mover = b if a == self.anchor else a
                other = a if mover == b else b
                for axis in (0, 1):
                    span = (self.dim[mover][axis] + self.dim[other][axis]) / 2
                    delta = self.pos[other][axis] - self.pos[mover][axis]
                    if abs(delta) >= span:
                        self._shift(mover, axis, delta - math.copysign(span - 0.02, delta))
                moved = True
            if not moved:
                break

    def push_apart(self) -> None:
        """Separate unintended overlapping pairs below the IoU threshold.

        Best-effort: stops at the iteration cap or when progress stalls and
        records a warning diagnostic instead of failing.
        """
        threshold = self.config.iou_threshold
        exempt: set[frozenset[int]] = set()
        for c in self.constraints:
            exempt.add(frozenset((c.a, c.b)))
        for oid in self.ids:
            node = oid
            while node in self.parent:
                node = self.parent[node]
                exempt.add(frozenset((oid, node)))

        stalled = 0
        best = math.inf
        for _ in range(self.config.max_push_iterations):
            offenders = []
            for i_pos, i in enumerate(self.ids):
                for j in self.ids[i_pos + 1 :]:
                    if frozenset((i, j)) in exempt:
                        continue
                    iou = box_iou(self.current_box(i), self.current_box(j))
                    if iou > threshold:
                        offenders.append((iou, i, j))
            if not offenders:
                return
            worst = max(o[0] for o in offenders)
            if worst < best - 1e-4:
                best = worst
                stalled = 0
            else:
                stalled += 1
                if stalled >= 12:
                    break
            for _, i, j in sorted(offenders, key=lambda o: (-o[0], o[1], o[2])):
                box_i, box_j = self.current_box(i), self.current_box(j)
                pen_x = min(box_i.x + box_i.w, box_j.x + box_j.w) - max(box_i.x, box_j.x)
                pen_y = min(box_i.y + box_i.h, box_j.y + box_j.h) - max(box_i.y, box_j.y)
                if pen_x <= 0 or pen_y <= 0:
                    continue
                axis = 0 if pen_x <= pen_y else 1
                pen = (pen_x if axis == 0 else pen_y) + 0.006
                sign = 1.0 if self.pos[i][axis] <= self.pos[j][axis] else -1.0
                if i == self.anchor:
                    self._shift(j, axis, sign * pen)
                elif j == self.anchor:
                    self._shift(i, axis, -sign * pen)
                else:
                    self._shift(i, axis, -sign * pen / 2)
                    self._shift(j, axis, sign * pen / 2)
            self.projection_sweeps(3)
        self.diagnostics.append(
            Diagnostic(
                "LAYOUT_PUSH_APART_INCOMPLETE",
                "warning",
                "push-apart hit its iteration budget; some unintended overlaps may exceed the threshold",
            )
        )

    # -- finalize ----------------------------------------------------------------

    def finalize(self) -> dict[int, BoundingBox]:
        boxes = {}
        for oid in self.ids:
            w = max(quantize(self.dim[oid][0]), 0.01)
            h = max(quantize(self.dim[oid][1]), 0.01)
            x = quantize(self.pos[oid][0] - w / 2)
            y = quantize(self.pos[oid][1] - h / 2)
            x = min(max(x, 0.0), quantize(1 - w))
            y = min(max(y, 0.0), quantize(1 - h))
            boxes[oid] = BoundingBox(x=x, y=y, w=w, h=h)
        for constraint in self.constraints:
            if constraint.kind in DIRECTIONAL_KINDS and not relation_satisfied(constraint, boxes):
                self.diagnostics.append(
                    Diagnostic(
                        "LAYOUT_CONSTRAINT_UNSATISFIED",
                        "warning",
                        f"{constraint.kind.value}({constraint.a}, {constraint.b}) "
                        "could not be satisfied exactly",
                        (constraint.a, constraint.b),
                    )
                )
        return boxes

    def run(self) -> LayoutResult:
        self.classify_constraints()
        for oid in self.ids:
            self.dim[oid] = self.base_size(oid)
        self.grow_containers()
        placed = self.place_roots(random.Random(self.config.rng_seed))
        self.place_children(placed)
        self.projection_sweeps(60)
        self.push_apart()
        boxes = self.finalize()
        return LayoutResult(boxes=boxes, diagnostics=self.diagnostics)


def solve_layout(
    graph: SceneGraph,
    objects: Sequence[SceneObject],
    constraints: Sequence[LayoutConstraint],
    config: LayoutConfig | None = None,
) -> LayoutResult:
    """Deterministically place one box per object.

    The anchor takes the configured pivot box (grown if it must contain
    other objects); constrained objects are placed to satisfy their
    constraints; unconstrained objects fill spiral slots around the anchor.
    Raises LAYOUT_INFEASIBLE for contradictory directional constraints.
    """
    if not objects:
        raise LayoutError("EMPTY_GRAPH", "cannot lay out an empty object list")
    return _Solver(graph, objects, constraints, config or LayoutConfig()).run()


# --- LLM-proposed layout -------------------------------------------------------


def llm_layout(
    prompt,
    objects: Sequence[SceneObject],
    graph: SceneGraph,
    client,
    config: LayoutConfig | None = None,
    canvas: tuple[int, int] = (512, 512),
) -> LayoutResult:
    """Ask the completion service for boxes; fall back to the solver on any failure.

    Pixel-space responses are normalized to fractions when the reply echoes a
    canvas size; every box is clamped to the canvas and to the minimum size.
    The result records which path produced it.
    """
    from .analysis.llm import LLM_BOXES_SCHEMA_ID, LlmProtocolError

    config = config or LayoutConfig()

    def fallback() -> LayoutResult:
        constraints = predicates_to_constraints(graph.edges)
        result = solve_layout(graph, objects, constraints, config)
        result.source = "fallback"
        return result

    if client is None:
        return fallback()

    objects_desc = [
        {"object_id": obj.object_id, "caption": obj.caption, "category": obj.category.value}
        for obj in objects
    ]
    try:
        reply = client.complete_json(
            "layout_boxes",
            {
                "prompt": prompt.raw_text,
                "objects": json.dumps(objects_desc, ensure_ascii=True),
                "canvas_width": str(canvas[0]),
                "canvas_height": str(canvas[1]),
            },
            schema_id=LLM_BOXES_SCHEMA_ID,
        )
    except LlmProtocolError:
        return fallback()

    raw_boxes = reply.get("boxes", {})
    echoed = reply.get("canvas")
    values = [v for box in raw_boxes.values() for v in (box["x"], box["y"], box["w"], box["h"])]
    pixel_space = bool(echoed) and any(v > 1.5 for v in values)
    scale_x = float(echoed["width_px"]) if pixel_space else 1.0
    scale_y = float(echoed["height_px"]) if pixel_space else 1.0
    if scale_x <= 0 or scale_y <= 0:
        return fallback()

    boxes: dict[int, BoundingBox] = {}
    for key, box in raw_boxes.items():
        try:
            oid = int(key)
        except ValueError:
            return fallback()
        w = min(max(box["w"] / scale_x, 0.01), 1.0)
        h = min(max(box["h"] / scale_y, 0.01), 1.0)
        x = min(max(box["x"] / scale_x, 0.0), 1.0 - w)
        y = min(max(box["y"] / scale_y, 0.0), 1.0 - h)
        boxes[oid] = BoundingBox(x=x, y=y, w=w, h=h)

    if set(boxes) != {obj.object_id for obj in objects}:
        return fallback()
    return LayoutResult(boxes=boxes, diagnostics=[], source="llm")


# --- SVG debug rendering --------------------------------------------------------

_ROUTE_COLORS = {ObjectCategory.GO: "#4477aa", ObjectCategory.TEXT: "#228833", ObjectCategory.PN: "#ee6677"}


def layout_svg(plan: ScenePlan) -> str:
    """Human-inspectable SVG of a plan's boxes and captions."""
    w_px, h_px = plan.canvas_width_px, plan.canvas_height_px
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px}" height="{h_px}" '
        f'viewBox="0 0 {w_px} {h_px}">',
        f'  <rect x="0" y="0" width="{w_px}" height="{h_px}" fill="#ffffff" stroke="#000000"/>',
    ]
    for obj in plan.objects:
        box = plan.boxes[obj.object_id]
        color = _ROUTE_COLORS[obj.category]
        x, y = box.x * w_px, box.y * h_px
        lines.append(
            f'  <rect x="{x:.1f}" y="{y:.1f}" width="{box.w * w_px:.1f}" height="{box.h * h_px:.1f}" '
            f'fill="{color}" fill-opacity="0.15" stroke="{color}"/>'
        )
        label = _xml_escape(f"{obj.object_id}: {obj.caption}")
        lines.append(f'  <text x="{x + 3:.1f}" y="{y + 13:.1f}" font-size="12" fill="{color}">{label}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _xml_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
