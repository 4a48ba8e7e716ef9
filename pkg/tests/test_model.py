import json
import random

import jsonschema
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcig.errors import PlanParseError, PlanValidationError
from pcig.jsonutil import canonical_dumps, format_fraction, quantize
from pcig.model import (
    BoundingBox,
    ObjectCategory,
    PromptSpec,
    RelationTriple,
    SceneObject,
    ScenePlan,
    parse_plan,
    plan_to_document,
    serialize_plan,
    validate_plan,
)

from conftest import DATA_DIR, FIG2_TEXT
from generators import random_valid_plan


def minimal_plan(**overrides) -> ScenePlan:
    fields = dict(
        prompt=PromptSpec(raw_text="a red apple", id="p1"),
        canvas_width_px=512,
        canvas_height_px=512,
        objects=(
            SceneObject(object_id=0, caption="a red apple", category=ObjectCategory.GO, group_key="apple"),
        ),
        triples=(),
        anchor_id=0,
        boxes={0: BoundingBox(x=0.275, y=0.325, w=0.45, h=0.45)},
    )
    fields.update(overrides)
    return ScenePlan(**fields)


def hand_fig2_plan() -> ScenePlan:
    # Containment checked by hand: logo [0.35,0.47]x[0.25,0.37] and text
    # [0.30,0.70]x[0.60,0.68] both sit within the jersey [0.2,0.8]x[0.15,0.85].
    objects = (
        SceneObject(object_id=0, caption="a blue basketball jersey", category=ObjectCategory.GO, group_key="jersey"),
        SceneObject(
            object_id=1,
            caption="Golden State Warriors logo",
            category=ObjectCategory.PN,
            group_key="logo",
            pn_key="golden-state-warriors-logo",
        ),
        SceneObject(
            object_id=2,
            caption="Stephen Curry",
            category=ObjectCategory.TEXT,
            group_key="curry-text",
            text_payload="Stephen Curry",
        ),
    )
    triples = (
        RelationTriple(subject_id=1, predicate="on", object_id=0),
        RelationTriple(subject_id=2, predicate="written on", object_id=0),
    )
    boxes = {
        0: BoundingBox(x=0.2, y=0.15, w=0.6, h=0.7),
        1: BoundingBox(x=0.35, y=0.25, w=0.12, h=0.12),
        2: BoundingBox(x=0.3, y=0.6, w=0.4, h=0.08),
    }
    return ScenePlan(
        prompt=PromptSpec(raw_text=FIG2_TEXT, id="fig2-hand"),
        canvas_width_px=512,
        canvas_height_px=512,
        objects=objects,
        triples=triples,
        anchor_id=0,
        boxes=boxes,
    )


class TestValidatePlan:
    def test_minimal_plan_is_valid(self):
        assert validate_plan(minimal_plan()) == []

    def test_text_without_payload(self):
        plan = minimal_plan(
            objects=(
                SceneObject(object_id=0, caption="WELCOME", category=ObjectCategory.TEXT, group_key="sign"),
            )
        )
        codes = [d.code for d in validate_plan(plan)]
        assert codes == ["TEXT_PAYLOAD_MISSING"]

    def test_hand_authored_fig2_plan_is_valid(self):
        assert validate_plan(hand_fig2_plan()) == []

    @pytest.mark.parametrize(
        "mutate, code",
        [
            (dict(schema_version="pcig-plan/0"), "SCHEMA_VERSION_INVALID"),
            (dict(prompt=PromptSpec(raw_text="   ", id="p1")), "PROMPT_EMPTY"),
            (dict(canvas_width_px=0), "CANVAS_INVALID"),
            (dict(anchor_id=7), "ANCHOR_UNKNOWN"),
            (dict(triples=(RelationTriple(0, "on", 0),)), "TRIPLE_SELF_LOOP"),
            (dict(triples=(RelationTriple(0, "on", 5),)), "TRIPLE_ENDPOINT_UNKNOWN"),
            (dict(triples=(RelationTriple(0, "On Top", 0),)), "PREDICATE_INVALID"),
            (dict(boxes={}), "BOX_MISSING"),
            (
                dict(boxes={0: BoundingBox(0.275, 0.325, 0.45, 0.45), 3: BoundingBox(0.1, 0.1, 0.2, 0.2)}),
                "BOX_ORPHAN",
            ),
            (dict(boxes={0: BoundingBox(0.8, 0.8, 0.4, 0.4)}), "BOX_OUT_OF_CANVAS"),
            (dict(boxes={0: BoundingBox(0.1, 0.1, 0.004, 0.2)}), "BOX_TOO_SMALL"),
        ],
    )
    def test_single_violations(self, mutate, code):
        plan = minimal_plan(**mutate)
        codes = {d.code for d in validate_plan(plan)}
        assert code in codes

    def test_pn_key_rules(self):
        bad = SceneObject(object_id=0, caption="logo", category=ObjectCategory.PN, group_key="g", pn_key="Logo!")
        missing = SceneObject(object_id=0, caption="logo", category=ObjectCategory.PN, group_key="g")
        stray = SceneObject(object_id=0, caption="cat", category=ObjectCategory.GO, group_key="g", pn_key="cat")
        for obj, code in ((bad, "PN_KEY_INVALID"), (missing, "PN_KEY_MISSING"), (stray, "PN_KEY_UNEXPECTED")):
            plan = minimal_plan(objects=(obj,))
            assert code in {d.code for d in validate_plan(plan)}

    def test_group_index_rules(self):
        objects = (
            SceneObject(object_id=0, caption="a cat", category=ObjectCategory.GO, group_key="cats", instance_index=0),
            SceneObject(object_id=1, caption="a cat", category=ObjectCategory.GO, group_key="cats", instance_index=5),
        )
        boxes = {0: BoundingBox(0.1, 0.1, 0.2, 0.2), 1: BoundingBox(0.5, 0.5, 0.2, 0.2)}
        plan = minimal_plan(objects=objects, boxes=boxes)
        assert "GROUP_INDEX_INVALID" in {d.code for d in validate_plan(plan)}
        objects = (
            SceneObject(object_id=0, caption="a cat", category=ObjectCategory.GO, group_key="cats", instance_index=0),
            SceneObject(object_id=1, caption="a cat", category=ObjectCategory.GO, group_key="cats", instance_index=0),
        )
        plan = minimal_plan(objects=objects, boxes=boxes)
        assert "GROUP_INDEX_DUPLICATE" in {d.code for d in validate_plan(plan)}

    def test_relation_consistency_checked(self):
        # The logo box moved outside the jersey: "on" (inside) now fails.
        plan = hand_fig2_plan()
        boxes = dict(plan.boxes)
        boxes[1] = BoundingBox(x=0.02, y=0.02, w=0.12, h=0.12)
        broken = ScenePlan(
            prompt=plan.prompt,
            canvas_width_px=plan.canvas_width_px,
            canvas_height_px=plan.canvas_height_px,
            objects=plan.objects,
            triples=plan.triples,
            anchor_id=plan.anchor_id,
            boxes=boxes,
        )
        codes = [d.code for d in validate_plan(broken)]
        assert codes == ["RELATION_UNSATISFIED"]

    def test_diagnostics_deterministic_and_ordered(self):
        plan = minimal_plan(
            objects=(
                SceneObject(object_id=0, caption="", category=ObjectCategory.TEXT, group_key="g"),
            ),
            anchor_id=9,
        )
        first = validate_plan(plan)
        second = validate_plan(plan)
        assert first == second
        keys = [(min(d.object_ids) if d.object_ids else -1, d.code) for d in first]
        assert keys == sorted(keys)


class TestSerialization:
    def test_round_trip_identity(self):
        plan = hand_fig2_plan()
        assert parse_plan(serialize_plan(plan)) == plan

    def test_canonical_fixpoint(self):
        plan = hand_fig2_plan()
        first = serialize_plan(plan)
        assert serialize_plan(parse_plan(first)) == first

    def test_serialize_rejects_invalid_plan(self):
        plan = minimal_plan(anchor_id=9)
        with pytest.raises(PlanValidationError) as err:
            serialize_plan(plan)
        assert "ANCHOR_UNKNOWN" in err.value.codes

    def test_schema_version_mismatch(self):
        doc = json.loads(serialize_plan(minimal_plan()))
        doc["schema_version"] = "pcig-plan/0"
        with pytest.raises(PlanParseError) as err:
            parse_plan(json.dumps(doc))
        assert err.value.code == "SCHEMA_VERSION_MISMATCH"
        assert err.value.path == "schema_version"

    @pytest.mark.parametrize(
        "corrupt, path",
        [
            (lambda d: d["objects"][0].pop("caption"), "objects[0].caption"),
            (lambda d: d["boxes"]["0"].pop("x"), "boxes['0'].x"),
            (lambda d: d["prompt"].pop("id"), "prompt.id"),
            (lambda d: d.__setitem__("anchor_id", "zero"), "anchor_id"),
            (lambda d: d["triples"].append({"subject_id": 0}), "triples[0].predicate"),
        ],
    )
    def test_malformed_plan_paths(self, corrupt, path):
        doc = json.loads(serialize_plan(minimal_plan()))
        corrupt(doc)
        with pytest.raises(PlanParseError) as err:
            parse_plan(json.dumps(doc))
        assert err.value.code == "MALFORMED_PLAN"
        assert err.value.path == path

    def test_not_json(self):
        with pytest.raises(PlanParseError) as err:
            parse_plan(b"not json at all {")
        assert err.value.code == "MALFORMED_PLAN"

    def test_golden_hand_file_parses(self):
        data = (DATA_DIR / "fig2_hand_plan.json").read_bytes()
        plan = parse_plan(data)
        assert len(plan.objects) == 3
        jersey, logo, text = plan.objects
        assert (jersey.caption, jersey.category) == ("a blue basketball jersey", ObjectCategory.GO)
        assert logo.category is ObjectCategory.PN and logo.pn_key == "golden-state-warriors-logo"
        assert text.category is ObjectCategory.TEXT and text.text_payload == "Stephen Curry"
        assert validate_plan(plan) == []
        # The hand-written file is already in canonical form.
        assert serialize_plan(plan) == data

    def test_plan_document_matches_published_schema(self):
        from importlib import resources

        schema = json.loads(resources.files("pcig").joinpath("schemas/plan.schema.json").read_text("utf-8"))
        doc = plan_to_document(hand_fig2_plan())
        jsonschema.validate(doc, schema)

    def test_random_plans_round_trip(self):
        rng = random.Random(20240611)
        for _ in range(25):
            plan = random_valid_plan(rng)
            data = serialize_plan(plan)
            again = parse_plan(data)
            assert again == plan
            assert serialize_plan(again) == data


class TestCanonicalJson:
    def test_fraction_formatting(self):
        assert format_fraction(0.45) == "0.450000"
        assert format_fraction(1.0) == "1.000000"
        assert format_fraction(-0.0) == "0.000000"

    def test_sorted_keys_and_fixed_floats(self):
        text = canonical_dumps({"b": 0.1, "a": [1, {"z": 0.5, "y": None}]})
        assert text.index('"a"') < text.index('"b"')
        assert "0.100000" in text and "0.500000" in text

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    @settings(max_examples=300, deadline=None)
    def test_quantize_is_projection(self, value):
        q = quantize(value)
        assert quantize(q) == q
        assert float(format_fraction(q)) == q

    def test_box_quantized_on_construction(self):
        box = BoundingBox(x=0.1234567891, y=0.2, w=0.3, h=0.4)
        assert box.x == 0.123457
