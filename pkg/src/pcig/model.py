"""Core scene-plan domain types, invariant validation, and canonical serialization.

A ScenePlan is the contract between prompt analysis, layout, dispatch, and
the generation backends: categorized objects, a relation triple list, the
layout anchor, and one normalized bounding box per object. All types are
immutable after construction and safe to share across threads.

Validation never raises: ``validate_plan`` returns diagnostics so that
arbitrary decoded documents can be inspected. Serialization is canonical
(sorted keys, 6-decimal fractions) so equal plans produce byte-equal files.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

from .errors import PlanParseError, PlanValidationError
from .jsonutil import canonical_dump_bytes, quantize

PLAN_SCHEMA_VERSION = "pcig-plan/1"

PN_KEY_RE = re.compile(r"[a-z0-9-]+\Z")
PREDICATE_RE = re.compile(r"[^\s]+( [^\s]+)*\Z")

MIN_BOX_DIM = 0.01
EDGE_TOL = 1e-9


class ObjectCategory(enum.Enum):
    """The three object kinds the pipeline distinguishes.

    GO: general object, drawn by the layout-conditioned backend.
    TEXT: characters to render legibly inside the image.
    PN: a named real-world entity resolved to a representative image.
    """

    GO = "GO"
    TEXT = "TEXT"
    PN = "PN"


@dataclass(frozen=True)
class PromptSpec:
    """One user prompt; ``augmented_text`` is an optional expanded variant."""

    raw_text: str
    id: str
    augmented_text: Optional[str] = None


@dataclass(frozen=True)
class SceneObject:
    """One extracted entity: caption plus category-specific payload.

    ``object_id`` is the 0-based prompt-order index. Instances expanded from
    one counted mention ("six giraffes") share ``group_key`` and carry
    distinct ``instance_index`` values.
    """

    object_id: int
    caption: str
    category: ObjectCategory
    group_key: str
    instance_index: int = 0
    text_payload: Optional[str] = None
    pn_key: Optional[str] = None


@dataclass(frozen=True)
class RelationTriple:
    """Directed (subject, predicate, object) edge between two scene objects."""

    subject_id: int
    predicate: str
    object_id: int


@dataclass(frozen=True)
class BoundingBox:
    """Normalized [x, y, w, h] placement, origin top-left, fractions of canvas.

    Coordinates are snapped to the 6-decimal grid of the canonical file
    format at construction, so parse(serialize(plan)) is exact identity.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, quantize(float(getattr(self, name))))

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class ScenePlan:
    """The end-to-end planning artifact consumed by dispatch and backends."""

    prompt: PromptSpec
    canvas_width_px: int
    canvas_height_px: int
    objects: tuple[SceneObject, ...]
    triples: tuple[RelationTriple, ...]
    anchor_id: int
    boxes: Mapping[int, BoundingBox]
    schema_version: str = PLAN_SCHEMA_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "triples", tuple(self.triples))
        object.__setattr__(self, "boxes", dict(self.boxes))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScenePlan):
            return NotImplemented
        return (
            self.prompt == other.prompt
            and self.canvas_width_px == other.canvas_width_px
            and self.canvas_height_px == other.canvas_height_px
            and self.objects == other.objects
            and self.triples == other.triples
            and self.anchor_id == other.anchor_id
            and dict(self.boxes) == dict(other.boxes)
            and self.schema_version == other.schema_version
        )


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding; ``severity`` is ``error`` or ``warning``."""

    code: str
    severity: str
    message: str
    object_ids: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "object_ids", tuple(self.object_ids))


def _sort_key(diag: Diagnostic) -> tuple[int, str, str]:
    first = min(diag.object_ids) if diag.object_ids else -1
    return (first, diag.code, diag.message)


def validate_plan(plan: ScenePlan) -> list[Diagnostic]:
    """Check every plan invariant; empty result means the plan is valid.

    Accepts arbitrary decoded plans and reports problems as data rather than
    exceptions. Diagnostics are deterministic and ordered by
    (first referenced object_id, code).
    """
    diags: list[Diagnostic] = []

    def err(code: str, message: str, object_ids: Iterable[int] = ()) -> None:
        diags.append(Diagnostic(code, "error", message, tuple(object_ids)))

    if plan.schema_version != PLAN_SCHEMA_VERSION:
        err("SCHEMA_VERSION_INVALID", f"expected {PLAN_SCHEMA_VERSION!r}, got {plan.schema_version!r}")
    if not plan.prompt.raw_text.strip():
        err("PROMPT_EMPTY", "prompt raw_text is empty after trimming")
    if plan.canvas_width_px <= 0 or plan.canvas_height_px <= 0:
        err("CANVAS_INVALID", f"canvas {plan.canvas_width_px}x{plan.canvas_height_px} is not positive")

    ids = {obj.object_id for obj in plan.objects}
    group_sizes: dict[str, int] = {}
    for obj in plan.objects:
        group_sizes[obj.group_key] = group_sizes.get(obj.group_key, 0) + 1

    seen_group_slots: set[tuple[str, int]] = set()
    for position, obj in enumerate(plan.objects):
        oid = obj.object_id
        if oid != position:
            err("OBJECT_ID_OUT_OF_ORDER", f"object at position {position} has object_id {oid}", [oid])
        if not obj.caption.strip():
            err("CAPTION_EMPTY", f"object {oid} has an empty caption", [oid])
        if obj.category is ObjectCategory.TEXT:
            if not obj.text_payload:
                err("TEXT_PAYLOAD_MISSING", f"TEXT object {oid} has no text_payload", [oid])
        elif obj.text_payload is not None:
            err("TEXT_PAYLOAD_UNEXPECTED", f"non-TEXT object {oid} carries a text_payload", [oid])
        if obj.category is ObjectCategory.PN:
            if not obj.pn_key:
                err("PN_KEY_MISSING", f"PN object {oid} has no pn_key", [oid])
            elif not PN_KEY_RE.match(obj.pn_key):
                err("PN_KEY_INVALID", f"PN object {oid} pn_key {obj.pn_key!r} is not a lowercase slug", [oid])
        elif obj.pn_key is not None:
            err("PN_KEY_UNEXPECTED", f"non-PN object {oid} carries a pn_key", [oid])
        if not 0 <= obj.instance_index < group_sizes[obj.group_key]:
            err(
                "GROUP_INDEX_INVALID",
                f"object {oid} instance_index {obj.instance_index} outside group {obj.group_key!r} "
                f"of size {group_sizes[obj.group_key]}",
                [oid],
            )
        slot = (obj.group_key, obj.instance_index)
        if slot in seen_group_slots:
            err("GROUP_INDEX_DUPLICATE", f"object {oid} repeats group slot {slot!r}", [oid])
        seen_group_slots.add(slot)

    for triple in plan.triples:
        referenced = [i for i in (triple.subject_id, triple.object_id) if i in ids]
        if triple.subject_id == triple.object_id:
            err("TRIPLE_SELF_LOOP", f"triple relates object {triple.subject_id} to itself", referenced)
        for endpoint in (triple.subject_id, triple.object_id):
            if endpoint not in ids:
                err("TRIPLE_ENDPOINT_UNKNOWN", f"triple references unknown object {endpoint}", referenced)
        if (
            not triple.predicate
            or triple.predicate != triple.predicate.lower()
            or not PREDICATE_RE.match(triple.predicate)
        ):
            err(
                "PREDICATE_INVALID",
                f"predicate {triple.predicate!r} must be non-empty, lowercase, single-spaced",
                referenced,
            )

    if plan.anchor_id not in ids:
        err("ANCHOR_UNKNOWN", f"anchor_id {plan.anchor_id} references no object")

    for oid in sorted(ids):
        if oid not in plan.boxes:
            err("BOX_MISSING", f"object {oid} has no bounding box", [oid])
    for oid in sorted(plan.boxes):
        if oid not in ids:
            err("BOX_ORPHAN", f"box keyed {oid} references no object", [oid])

    for oid in sorted(plan.boxes):
        box = plan.boxes[oid]
        ref = [oid] if oid in ids else []
        if box.w < MIN_BOX_DIM - EDGE_TOL or box.h < MIN_BOX_DIM - EDGE_TOL:
            err("BOX_TOO_SMALL", f"box {oid} is {box.w}x{box.h}, below the {MIN_BOX_DIM} minimum", ref)
        if (
            box.x < -EDGE_TOL
            or box.y < -EDGE_TOL
            or box.x + box.w > 1 + EDGE_TOL
            or box.y + box.h > 1 + EDGE_TOL
        ):
            err("BOX_OUT_OF_CANVAS", f"box {oid} [{box.x}, {box.y}, {box.w}, {box.h}] leaves the canvas", ref)

    if not diags:
        # Imported here: layout depends on these types, so a top-level import
        # would be circular.
        from .layout import spatial_triple_violations

        for triple, kind in spatial_triple_violations(plan):
            err(
                "RELATION_UNSATISFIED",
                f"triple ({triple.subject_id}, {triple.predicate!r}, {triple.object_id}) "
                f"is not satisfied by the boxes ({kind} check failed)",
                [triple.subject_id, triple.object_id],
            )

    return sorted(diags, key=_sort_key)


# --- canonical serialization -------------------------------------------------


def plan_to_document(plan: ScenePlan) -> dict[str, Any]:
    """Plain-JSON view of a plan, with optional fields serialized as null."""
    return {
        "schema_version": plan.schema_version,
        "prompt": {
            "id": plan.prompt.id,
            "raw_text": plan.prompt.raw_text,
            "augmented_text": plan.prompt.augmented_text,
        },
        "canvas": {
            "width_px": plan.canvas_width_px,
            "height_px": plan.canvas_height_px,
        },
        "objects": [
            {
                "object_id": obj.object_id,
                "caption": obj.caption,
                "category": obj.category.value,
                "group_key": obj.group_key,
                "instance_index": obj.instance_index,
                "text_payload": obj.text_payload,
                "pn_key": obj.pn_key,
            }
            for obj in plan.objects
        ],
        "triples": [
            {
                "subject_id": t.subject_id,
                "predicate": t.predicate,
                "object_id": t.object_id,
            }
            for t in plan.triples
        ],
        "anchor_id": plan.anchor_id,
        "boxes": {
            str(oid): {"x": box.x, "y": box.y, "w": box.w, "h": box.h}
            for oid, box in plan.boxes.items()
        },
    }


def serialize_plan(plan: ScenePlan) -> bytes:
    """Canonical UTF-8 JSON bytes for a valid plan.

    Raises PlanValidationError when the plan fails ``validate_plan``; only
    valid plans may be written.
    """
    diags = validate_plan(plan)
    if diags:
        raise PlanValidationError([d.code for d in diags])
    return canonical_dump_bytes(plan_to_document(plan))


class _Reader:
    """Structural decoder tracking a dotted path for error reporting."""

    def __init__(self, doc: Any):
        self.doc = doc

    def fail(self, message: str, path: str) -> PlanParseError:
        return PlanParseError("MALFORMED_PLAN", message, path)

    def get(self, mapping: Any, key: str, expected: type | tuple[type, ...], path: str) -> Any:
        if not isinstance(mapping, dict):
            raise self.fail("expected a JSON object", path.rsplit(".", 1)[0] if "." in path else "$")
        if key not in mapping:
            raise self.fail(f"missing required field {key!r}", path)
        value = mapping[key]
        if not isinstance(value, expected) or isinstance(value, bool):
            raise self.fail(f"field has wrong type {type(value).__name__}", path)
        return value

    def get_optional_str(self, mapping: dict, key: str, path: str) -> Optional[str]:
        value = mapping.get(key)
        if value is None:
            return None
        if not isinstance(value, str):
            raise self.fail(f"field has wrong type {type(value).__name__}", path)
        return value

    def get_fraction(self, mapping: Any, key: str, path: str) -> float:
        value = self.get(mapping, key, (int, float), path)
        return float(value)


def parse_plan(data: bytes | str) -> ScenePlan:
    """Decode canonical (or equivalent) plan JSON into a ScenePlan.

    Structural problems raise MALFORMED_PLAN with a path to the offending
    field; an unknown schema_version raises SCHEMA_VERSION_MISMATCH. Semantic
    invariants are *not* enforced here; run ``validate_plan`` on the result.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PlanParseError("MALFORMED_PLAN", f"not valid UTF-8: {exc}", "$") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise PlanParseError("MALFORMED_PLAN", f"not valid JSON: {exc.msg}", f"$ (line {exc.lineno})") from exc

    r = _Reader(doc)
    if not isinstance(doc, dict):
        raise r.fail("top level must be a JSON object", "$")

    version = r.get(doc, "schema_version", str, "schema_version")
    if version != PLAN_SCHEMA_VERSION:
        raise PlanParseError(
            "SCHEMA_VERSION_MISMATCH",
            f"unknown schema_version {version!r}, expected {PLAN_SCHEMA_VERSION!r}",
            "schema_version",
        )

    prompt_doc = r.get(doc, "prompt", dict, "prompt")
    prompt = PromptSpec(
        raw_text=r.get(prompt_doc, "raw_text", str, "prompt.raw_text"),
        id=r.get(prompt_doc, "id", str, "prompt.id"),
        augmented_text=r.get_optional_str(prompt_doc, "augmented_text", "prompt.augmented_text"),
    )

    canvas_doc = r.get(doc, "canvas", dict, "canvas")
    width = r.get(canvas_doc, "width_px", int, "canvas.width_px")
    height = r.get(canvas_doc, "height_px", int, "canvas.height_px")

    objects = []
    objects_doc = r.get(doc, "objects", list, "objects")
    for i, obj_doc in enumerate(objects_doc):
        path = f"objects[{i}]"
        if not isinstance(obj_doc, dict):
            raise r.fail("expected a JSON object", path)
        category_name = r.get(obj_doc, "category", str, f"{path}.category")
        try:
            category = ObjectCategory(category_name)
        except ValueError as exc:
            raise r.fail(f"unknown category {category_name!r}", f"{path}.category") from exc
        objects.append(
            SceneObject(
                object_id=r.get(obj_doc, "object_id", int, f"{path}.object_id"),
                caption=r.get(obj_doc, "caption", str, f"{path}.caption"),
                category=category,
                group_key=r.get(obj_doc, "group_key", str, f"{path}.group_key"),
                instance_index=r.get(obj_doc, "instance_index", int, f"{path}.instance_index"),
                text_payload=r.get_optional_str(obj_doc, "text_payload", f"{path}.text_payload"),
                pn_key=r.get_optional_str(obj_doc, "pn_key", f"{path}.pn_key"),
            )
        )

    triples = []
    triples_doc = r.get(doc, "triples", list, "triples")
    for i, triple_doc in enumerate(triples_doc):
        path = f"triples[{i}]"
        if not isinstance(triple_doc, dict):
            raise r.fail("expected a JSON object", path)
        triples.append(
            RelationTriple(
                subject_id=r.get(triple_doc, "subject_id", int, f"{path}.subject_id"),
                predicate=r.get(triple_doc, "predicate", str, f"{path}.predicate"),
                object_id=r.get(triple_doc, "object_id", int, f"{path}.object_id"),
            )
        )

    boxes: dict[int, BoundingBox] = {}
    boxes_doc = r.get(doc, "boxes", dict, "boxes")
    for key in boxes_doc:
        path = f"boxes[{key!r}]"
        if not isinstance(key, str) or not re.match(r"(0|[1-9][0-9]*)\Z", key):
            raise r.fail("box keys must be decimal object ids", path)
        box_doc = boxes_doc[key]
        if not isinstance(box_doc, dict):
            raise r.fail("expected a JSON object", path)
        boxes[int(key)] = BoundingBox(
            x=r.get_fraction(box_doc, "x", f"{path}.x"),
            y=r.get_fraction(box_doc, "y", f"{path}.y"),
            w=r.get_fraction(box_doc, "w", f"{path}.w"),
            h=r.get_fraction(box_doc, "h", f"{path}.h"),
        )

    return ScenePlan(
        prompt=prompt,
        canvas_width_px=width,
        canvas_height_px=height,
        objects=tuple(objects),
        triples=tuple(triples),
        anchor_id=r.get(doc, "anchor_id", int, "anchor_id"),
        boxes=boxes,
        schema_version=version,
    )
