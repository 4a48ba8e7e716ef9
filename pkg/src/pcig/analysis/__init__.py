"""Prompt analysis: object extraction, classification, counts, and triples.

Every operation works through either a completion-service client or the
deterministic fallback parser, so the whole pipeline runs offline. Results
are index-based: triples reference objects by their 0-based prompt-order id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..errors import AnalysisError
from ..model import Diagnostic, ObjectCategory, PromptSpec, RelationTriple, SceneObject
from .fallback import (
    ParsedPrompt,
    RawMention,
    RawRelation,
    classify_mention,
    parse_prompt,
    slugify,
)
from .llm import (
    LLM_ANALYSIS_SCHEMA_ID,
    FixtureTransport,
    HttpChatTransport,
    LlmClient,
    LlmProtocolError,
)

__all__ = [
    "AnalysisMode",
    "AnalysisResult",
    "RawMention",
    "LlmClient",
    "FixtureTransport",
    "HttpChatTransport",
    "LlmProtocolError",
    "analyze",
    "classify_object",
    "expand_counts",
    "extract_objects",
    "extract_triples",
]

DEFAULT_MAX_COUNT = 20


class AnalysisMode(str, enum.Enum):
    FULL = "full"
    NO_KG = "no_kg"
    NO_OBJECT_EXTRACTION = "no_object_extraction"


@dataclass
class AnalysisResult:
    objects: list[SceneObject]
    triples: list[RelationTriple]
    source: str  # "llm" or "fallback"
    diagnostics: list[Diagnostic] = field(default_factory=list)


def classify_object(candidate: RawMention) -> ObjectCategory:
    """TEXT if quoted or cue-governed, else PN on a name match, else GO."""
    return classify_mention(candidate)


def expand_counts(mentions: Sequence[RawMention], max_count: int = DEFAULT_MAX_COUNT) -> list[SceneObject]:
    """Expand counted mentions into one SceneObject per instance, in order."""
    objects: list[SceneObject] = []
    for mention in mentions:
        count = mention.count or 1
        if count > max_count:
            raise AnalysisError(
                "COUNT_OVERFLOW",
                f"mention {mention.caption!r} asks for {count} instances, above the cap of {max_count}",
                count=count,
                cap=max_count,
            )
        category = mention.category or classify_mention(mention)
        for index in range(count):
            objects.append(
                SceneObject(
                    object_id=len(objects),
                    caption=mention.caption,
                    category=category,
                    group_key=mention.group_key,
                    instance_index=index,
                    text_payload=mention.text_payload,
                    pn_key=mention.pn_key,
                )
            )
    return objects


def extract_objects(
    prompt: PromptSpec,
    client: Optional[LlmClient] = None,
    max_count: int = DEFAULT_MAX_COUNT,
) -> list[SceneObject]:
    """Objects in prompt mention order, counted plurals expanded."""
    mentions = _mentions(prompt, client)
    if not mentions:
        raise AnalysisError("NO_OBJECTS_FOUND", f"no noun phrase detected in prompt {prompt.id!r}")
    return expand_counts(mentions, max_count=max_count)


def extract_triples(
    prompt: PromptSpec,
    objects: Sequence[SceneObject],
    client: Optional[LlmClient] = None,
) -> list[RelationTriple]:
    """Relation triples with endpoints resolved to object indices.

    Endpoint mentions that resolve to no object are dropped with a warning
    diagnostic, never fabricated; use ``analyze`` to see those warnings.
    """
    triples, _ = _extract_triples_with_diags(prompt, objects, client)
    return triples


def _extract_triples_with_diags(
    prompt: PromptSpec,
    objects: Sequence[SceneObject],
    client: Optional[LlmClient],
) -> tuple[list[RelationTriple], list[Diagnostic]]:
    if not objects:
        raise AnalysisError("NO_OBJECTS_FOUND", "cannot extract triples without objects")
    if client is not None:
        reply = client.complete_json(
            "analysis_full", {"prompt": _prompt_text(prompt)}, schema_id=LLM_ANALYSIS_SCHEMA_ID
        )
        raw = [(t["subject"], t["predicate"], t["object"]) for t in reply.get("triples", [])]
    else:
        raw = _raw_relations(parse_prompt(_prompt_text(prompt)))
    return _resolve_triples(raw, objects)


def _raw_relations(parsed: ParsedPrompt) -> list[tuple[str, str, str]]:
    return [
        (parsed.mentions[r.subject].caption, r.predicate, parsed.mentions[r.object].caption)
        for r in parsed.relations
    ]


def analyze(
    prompt: PromptSpec,
    client: Optional[LlmClient] = None,
    mode: AnalysisMode = AnalysisMode.FULL,
    max_count: int = DEFAULT_MAX_COUNT,
) -> AnalysisResult:
    """Run the configured analysis mode end to end.

    ``full``: objects with categories and counts, plus triples.
    ``no_kg``: objects only, empty triple list.
    ``no_object_extraction``: raw noun chunks (all GO, no count expansion)
    with triples extracted over them.
    """
    mode = AnalysisMode(mode)
    source = "llm" if client is not None else "fallback"

    if mode is AnalysisMode.NO_OBJECT_EXTRACTION:
        if client is not None:
            reply = client.complete_json(
                "analysis_relations_only", {"prompt": _prompt_text(prompt)}, schema_id=LLM_ANALYSIS_SCHEMA_ID
            )
            mentions = _raw_chunk_mentions_from_reply(reply)
            raw = [(t["subject"], t["predicate"], t["object"]) for t in reply.get("triples", [])]
        else:
            parsed = parse_prompt(_prompt_text(prompt), parse_counts=False, classify=False)
            mentions = parsed.mentions
            raw = _raw_relations(parsed)
        if not mentions:
            raise AnalysisError("NO_OBJECTS_FOUND", f"no noun phrase detected in prompt {prompt.id!r}")
        objects = expand_counts(mentions, max_count=max_count)
        triples, diags = _resolve_triples(raw, objects)
        return AnalysisResult(objects=objects, triples=triples, source=source, diagnostics=diags)

    if mode is AnalysisMode.NO_KG:
        if client is not None:
            reply = client.complete_json(
                "analysis_objects_only", {"prompt": _prompt_text(prompt)}, schema_id=LLM_ANALYSIS_SCHEMA_ID
            )
            mentions = _mentions_from_reply(reply)
        else:
            mentions = parse_prompt(_prompt_text(prompt)).mentions
        if not mentions:
            raise AnalysisError("NO_OBJECTS_FOUND", f"no noun phrase detected in prompt {prompt.id!r}")
        objects = expand_counts(mentions, max_count=max_count)
        return AnalysisResult(objects=objects, triples=[], source=source)

    if client is not None:
        reply = client.complete_json(
            "analysis_full", {"prompt": _prompt_text(prompt)}, schema_id=LLM_ANALYSIS_SCHEMA_ID
        )
        mentions = _mentions_from_reply(reply)
        raw = [(t["subject"], t["predicate"], t["object"]) for t in reply.get("triples", [])]
    else:
        parsed = parse_prompt(_prompt_text(prompt))
        mentions = parsed.mentions
        raw = _raw_relations(parsed)
    if not mentions:
        raise AnalysisError("NO_OBJECTS_FOUND", f"no noun phrase detected in prompt {prompt.id!r}")
    objects = expand_counts(mentions, max_count=max_count)
    triples, diags = _resolve_triples(raw, objects)
    return AnalysisResult(objects=objects, triples=triples, source=source, diagnostics=diags)


# --- helpers -------------------------------------------------------------------


def _prompt_text(prompt: PromptSpec) -> str:
    return prompt.augmented_text or prompt.raw_text


def _mentions(prompt: PromptSpec, client: Optional[LlmClient]) -> list[RawMention]:
    if client is None:
        return parse_prompt(_prompt_text(prompt)).mentions
    reply = client.complete_json(
        "analysis_full", {"prompt": _prompt_text(prompt)}, schema_id=LLM_ANALYSIS_SCHEMA_ID
    )
    return _mentions_from_reply(reply)


def _raw_chunk_mentions_from_reply(reply: dict) -> list[RawMention]:
    mentions = []
    used: dict[str, int] = {}
    for i, record in enumerate(reply["objects"]):
        caption = record["caption"].strip()
        if not caption:
            continue
        group_key = _unique_key(slugify(caption), used)
        mentions.append(
            RawMention(
                surface=caption,
                caption=caption,
                group_key=group_key,
                order=i,
                category=ObjectCategory.GO,
            )
        )
    return mentions


def _mentions_from_reply(reply: dict) -> list[RawMention]:
    mentions = []
    used: dict[str, int] = {}
    for i, record in enumerate(reply["objects"]):
        caption = record["caption"].strip()
        if not caption:
            continue
        category = ObjectCategory(record.get("category", "GO"))
        payload = record.get("text_payload") or None
        pn_key = record.get("pn_key") or None
        if category is ObjectCategory.TEXT and not payload:
            payload = caption
        if category is not ObjectCategory.TEXT:
            payload = None
        if category is ObjectCategory.PN:
            pn_key = slugify(pn_key or caption)
        else:
            pn_key = None
        group_key = _unique_key(slugify(caption), used)
        mentions.append(
            RawMention(
                surface=caption,
                caption=caption,
                group_key=group_key,
                order=i,
                count=record.get("count"),
                quoted=category is ObjectCategory.TEXT,
                pn_match=category is ObjectCategory.PN,
                category=category,
                text_payload=payload,
                pn_key=pn_key,
            )
        )
    return mentions


def _unique_key(base: str, used: dict[str, int]) -> str:
    bump = used.get(base, 0)
    used[base] = bump + 1
    return base if not bump else f"{base}-{bump + 1}"


def _normalize_mention_text(text: str) -> str:
    words = text.lower().split()
    while words and words[0] in ("a", "an", "the"):
        words = words[1:]
    return " ".join(words)


def resolve_mention(text: str, objects: Sequence[SceneObject]) -> list[int]:
    """Object ids a mention string refers to, by longest-caption match.

    Exact caption matches win, then group-key matches (so a plural surface
    like "giraffes" finds the whole expanded group), then the longest caption
    containing or contained by the mention. Empty when nothing matches.
    """
    needle = _normalize_mention_text(text)
    if not needle:
        return []
    by_caption: dict[str, list[int]] = {}
    for obj in objects:
        by_caption.setdefault(_normalize_mention_text(obj.caption), []).append(obj.object_id)
    if needle in by_caption:
        return by_caption[needle]
    slug = slugify(needle)
    group_hits = [obj.object_id for obj in objects if obj.group_key in (needle, slug)]
    if group_hits:
        return group_hits
    candidates = [
        caption
        for caption in by_caption
        if caption and (needle in caption or caption in needle)
    ]
    if not candidates:
        return []
    best = max(candidates, key=len)
    return by_caption[best]


def _resolve_triples(
    raw: list[tuple[str, str, str]],
    objects: Sequence[SceneObject],
) -> tuple[list[RelationTriple], list[Diagnostic]]:
    triples: list[RelationTriple] = []
    diagnostics: list[Diagnostic] = []
    seen: set[tuple[int, str, int]] = set()
    for subject_text, predicate, object_text in raw:
        predicate = " ".join(predicate.lower().split())
        subjects = resolve_mention(subject_text, objects)
        targets = resolve_mention(object_text, objects)
        if not subjects or not targets or not predicate:
            unresolved = subject_text if not subjects else object_text
            diagnostics.append(
                Diagnostic(
                    "TRIPLE_ENDPOINT_DROPPED",
                    "warning",
                    f"relation endpoint {unresolved!r} matches no extracted object; triple dropped",
                )
            )
            continue
        for subject_id in subjects:
            for object_id in targets:
                if subject_id == object_id:
                    continue
                key = (subject_id, predicate, object_id)
                if key in seen:
                    continue
                seen.add(key)
                triples.append(RelationTriple(subject_id=subject_id, predicate=predicate, object_id=object_id))
    return triples, diagnostics
