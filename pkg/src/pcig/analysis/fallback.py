"""Deterministic rule-based prompt parser.

Used whenever no completion service is configured, and as the reference
behavior the offline test suite freezes. The grammar is intentionally small:
noun-phrase chunks (determiner/number + modifiers + nouns), quoted spans and
text-cue verbs for renderable text, a gazetteer plus capitalized-run
heuristic for named entities, and relation patterns over adjacent chunks.
Total on non-empty ASCII prompts: it either finds chunks or reports none,
never crashes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from ..model import ObjectCategory

DETERMINERS = {
    "a", "an", "the", "this", "that", "these", "those", "some",
    "its", "his", "her", "their", "my", "our", "your",
}
NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
    "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14, "fifteen": 15,
    "sixteen": 16, "seventeen": 17, "eighteen": 18, "nineteen": 19, "twenty": 20,
}
PRONOUNS = {"it", "them", "they", "he", "she", "him", "itself", "himself", "herself", "we", "us"}
CONJUNCTIONS = {"and", "or", "plus", "while", "also"}
COPULAS = {"is", "are", "was", "were", "be", "being", "been"}
TEXT_CUES = {
    "written", "says", "saying", "said", "reads", "labeled", "labelled",
    "printed", "inscribed", "spelled", "spelling", "captioned", "titled",
}
LINK_VERBS = {
    "wearing", "holding", "riding", "carrying", "hugging", "eating", "drinking",
    "chasing", "watching", "kicking", "pushing", "pulling", "facing", "touching",
    "holds", "hold", "wears", "wear", "rides", "ride", "carries", "carry",
    "has", "have", "contains", "contain", "sits", "sit", "stands", "stand",
}
PREPOSITIONS = {
    "on", "in", "under", "above", "below", "behind", "beneath", "underneath",
    "over", "inside", "within", "near", "beside", "atop", "upon", "by", "with",
    "into", "onto",
}
MULTIWORD_PREPOSITIONS = [
    "to the left of", "to the right of", "on the left of", "on the right of",
    "on top of", "in front of", "next to", "inside of", "close to",
    "left of", "right of",
]
BACKGROUND_PHRASES = {
    "in the background": "in background of",
    "in the foreground": "in foreground of",
    "in background": "in background of",
    "in foreground": "in foreground of",
}
PREPOSITION_ALIASES = {"into": "in", "onto": "on", "inside of": "inside", "close to": "near"}

_OTHER_STOPWORDS = {"of", "at", "to", "for", "from", "as", "there", "here", "very", "really", "not", "no"}

_IRREGULAR_SINGULAR = {
    "men": "man", "women": "woman", "children": "child", "people": "person",
    "geese": "goose", "mice": "mouse", "feet": "foot", "teeth": "tooth",
    "oxen": "ox", "wolves": "wolf", "leaves": "leaf", "knives": "knife",
    "loaves": "loaf", "shelves": "shelf", "lives": "life", "sheep": "sheep",
    "fish": "fish", "deer": "deer",
}

_WORD_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9'-]*")
_SINGLE_QUOTE_RE = re.compile(r"(?<![A-Za-z])'([^']+)'(?![A-Za-z])")
_DOUBLE_QUOTE_RE = re.compile(r'"([^"]+)"')


@dataclass
class RawMention:
    """One candidate object before count expansion."""

    surface: str
    caption: str
    group_key: str
    order: int
    count: Optional[int] = None
    plural_surface: Optional[str] = None
    quoted: bool = False
    cue_governed: bool = False
    pn_match: bool = False
    category: Optional[ObjectCategory] = None
    text_payload: Optional[str] = None
    pn_key: Optional[str] = None


@dataclass
class RawRelation:
    """Mention-level relation; endpoints are mention ordinals."""

    subject: int
    predicate: str
    object: int


@dataclass
class ParsedPrompt:
    mentions: list[RawMention] = field(default_factory=list)
    relations: list[RawRelation] = field(default_factory=list)


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "item"


def singularize(word: str) -> str:
    lower = word.lower()
    if lower in _IRREGULAR_SINGULAR:
        return _IRREGULAR_SINGULAR[lower]
    if lower.endswith("ies") and len(lower) > 4:
        return lower[:-3] + "y"
    if lower.endswith(("ses", "xes", "zes", "ches", "shes", "oes")):
        return lower[:-2]
    if lower.endswith("s") and not lower.endswith(("ss", "us", "is")):
        return lower[:-1]
    return lower


_gazetteer_cache: Optional[list[str]] = None


def gazetteer() -> list[str]:
    """Known proper-noun entities, one lowercase phrase per line."""
    global _gazetteer_cache
    if _gazetteer_cache is None:
        text = resources.files("pcig").joinpath("data/gazetteer.txt").read_text("utf-8")
        entries = {line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")}
        _gazetteer_cache = sorted(entries, key=len, reverse=True)
    return _gazetteer_cache


def classify_mention(mention: RawMention) -> ObjectCategory:
    """Category from the mention's cues; precedence TEXT > PN > GO."""
    if mention.quoted or mention.cue_governed:
        return ObjectCategory.TEXT
    if mention.pn_match:
        return ObjectCategory.PN
    return ObjectCategory.GO


# --- tokenizing ---------------------------------------------------------------

_KIND_WORD = "word"
_KIND_QUOTE = "quote"
_KIND_BREAK = "break"
_KIND_SENTENCE = "sentence"


@dataclass
class _Token:
    kind: str
    text: str
    capitalized: bool = False
    sentence_initial: bool = False


def _tokenize(text: str) -> list[_Token]:
    text = text.replace("‘", "'").replace("’", "'").replace("“", '"').replace("”", '"')
    spans: list[tuple[int, int, _Token]] = []
    taken = [False] * len(text)
    for pattern in (_DOUBLE_QUOTE_RE, _SINGLE_QUOTE_RE):
        for match in pattern.finditer(text):
            if any(taken[match.start() : match.end()]):
                continue
            payload = match.group(1).strip()
            if payload:
                spans.append((match.start(), match.end(), _Token(_KIND_QUOTE, payload)))
            for i in range(match.start(), match.end()):
                taken[i] = True
    for match in _WORD_RE.finditer(text):
        if any(taken[match.start() : match.end()]):
            continue
        word = match.group(0)
        spans.append((match.start(), match.end(), _Token(_KIND_WORD, word, capitalized=word[0].isupper())))
        for i in range(match.start(), match.end()):
            taken[i] = True
    for i, ch in enumerate(text):
        if taken[i]:
            continue
        if ch in ".!?;":
            spans.append((i, i + 1, _Token(_KIND_SENTENCE, ch)))
        elif ch in ",:":
            spans.append((i, i + 1, _Token(_KIND_BREAK, ch)))
    spans.sort(key=lambda s: s[0])
    tokens = [token for _, _, token in spans]
    sentence_start = True
    for token in tokens:
        if token.kind == _KIND_SENTENCE:
            sentence_start = True
        elif token.kind in (_KIND_WORD, _KIND_QUOTE):
            token.sentence_initial = sentence_start
            sentence_start = False
    return tokens


def _is_ing_verb(tokens: list[_Token], index: int, after_copula: bool) -> bool:
    word = tokens[index].text.lower()
    if word in LINK_VERBS:
        return True
    suffix_verb = (word.endswith("ing") and len(word) > 4) or (word.endswith("ed") and len(word) > 4)
    if not suffix_verb:
        return False
    if after_copula:
        return True
    for nxt in tokens[index + 1 :]:
        if nxt.kind == _KIND_QUOTE:
            return True
        if nxt.kind != _KIND_WORD:
            return False
        lower = nxt.text.lower()
        return lower in DETERMINERS or lower in NUMBER_WORDS or lower in PRONOUNS or lower in PREPOSITIONS
    return False


# --- chunk walk ---------------------------------------------------------------

_OP_CHUNK = "chunk"
_OP_PREP = "prep"
_OP_VERB = "verb"
_OP_CUE = "cue"
_OP_CUE_PREP = "cue_prep"
_OP_COPULA = "copula"
_OP_SPECIAL = "special"
_OP_PRONOUN = "pronoun"
_OP_BREAK = "break"
_OP_SENTENCE = "sentence"

_MAX_CHUNK_WORDS = 6


def parse_prompt(text: str, parse_counts: bool = True, classify: bool = True) -> ParsedPrompt:
    """Chunk the prompt into mentions and derive mention-level relations.

    ``parse_counts=False`` keeps counted plurals as single raw chunks and
    ``classify=False`` forces every mention to GO; together they implement
    the object-extraction ablation.
    """
    tokens = _tokenize(text)
    ops: list[tuple[str, object]] = []
    mentions: list[RawMention] = []
    used_group_keys: dict[str, int] = {}

    def add_mention(mention: RawMention) -> int:
        base = mention.group_key
        bump = used_group_keys.get(base, 0)
        used_group_keys[base] = bump + 1
        if bump:
            mention.group_key = f"{base}-{bump + 1}"
        mention.order = len(mentions)
        if not classify:
            mention.category = ObjectCategory.GO
            mention.text_payload = None
            mention.pn_key = None
        else:
            mention.category = classify_mention(mention)
            if mention.category is ObjectCategory.TEXT:
                mention.text_payload = mention.surface
            elif mention.category is ObjectCategory.PN:
                mention.pn_key = slugify(mention.caption)
        mentions.append(mention)
        ops.append((_OP_CHUNK, mention.order))
        return mention.order

    i = 0
    n = len(tokens)
    while i < n:
        token = tokens[i]
        if token.kind == _KIND_SENTENCE:
            ops.append((_OP_SENTENCE, token.text))
            i += 1
            continue
        if token.kind == _KIND_BREAK:
            ops.append((_OP_BREAK, token.text))
            i += 1
            continue
        if token.kind == _KIND_QUOTE:
            payload = token.text
            mention = RawMention(
                surface=payload,
                caption=payload,
                group_key=slugify(payload),
                order=0,
                quoted=True,
            )
            add_mention(mention)
            i += 1
            continue

        lower = token.text.lower()

        phrase = _match_phrase(tokens, i, BACKGROUND_PHRASES)
        if phrase:
            matched, length = phrase
            ops.append((_OP_SPECIAL, BACKGROUND_PHRASES[matched]))
            i += length
            continue
        phrase = _match_phrase(tokens, i, {p: p for p in MULTIWORD_PREPOSITIONS})
        if phrase:
            matched, length = phrase
            ops.append((_OP_PREP, PREPOSITION_ALIASES.get(matched, matched)))
            i += length
            continue

        if lower in PREPOSITIONS:
            ops.append((_OP_PREP, PREPOSITION_ALIASES.get(lower, lower)))
            i += 1
            continue
        if lower in CONJUNCTIONS:
            ops.append((_OP_BREAK, lower))
            i += 1
            continue
        if lower in COPULAS:
            ops.append((_OP_COPULA, lower))
            i += 1
            continue
        if lower in TEXT_CUES:
            ops.append((_OP_CUE, lower))
            i += 1
            continue
        if lower in PRONOUNS:
            ops.append((_OP_PRONOUN, lower))
            i += 1
            continue
        after_copula = bool(ops) and ops[-1][0] == _OP_COPULA
        if _is_ing_verb(tokens, i, after_copula):
            predicate = f"is {lower}" if after_copula else lower
            ops.append((_OP_VERB, predicate))
            i += 1
            continue
        if lower in _OTHER_STOPWORDS:
            ops.append((_OP_BREAK, lower))
            i += 1
            continue

        mention, consumed = _consume_chunk(tokens, i, parse_counts)
        if mention is None:
            i += max(consumed, 1)
            continue
        add_mention(mention)
        i += consumed

    relations = _build_relations(ops, mentions)
    return ParsedPrompt(mentions=mentions, relations=relations)


def _match_phrase(tokens: list[_Token], start: int, phrases: dict[str, str]) -> Optional[tuple[str, int]]:
    for phrase in sorted(phrases, key=len, reverse=True):
        words = phrase.split()
        end = start + len(words)
        if end > len(tokens):
            continue
        window = tokens[start:end]
        if all(t.kind == _KIND_WORD and t.text.lower() == w for t, w in zip(window, words)):
            return phrase, len(words)
    return None


def _consume_chunk(tokens: list[_Token], start: int, parse_counts: bool) -> tuple[Optional[RawMention], int]:
    i = start
    n = len(tokens)
    count: Optional[int] = None
    words: list[_Token] = []

    while i < n and tokens[i].kind == _KIND_WORD and tokens[i].text.lower() in DETERMINERS:
        words.append(tokens[i])
        i += 1
    if i < n and tokens[i].kind == _KIND_WORD:
        lower = tokens[i].text.lower()
        if lower in NUMBER_WORDS:
            count = NUMBER_WORDS[lower]
            i += 1
        elif lower.isdigit():
            count = int(lower)
            i += 1

    body: list[_Token] = []
    while i < n and len(body) < _MAX_CHUNK_WORDS:
        token = tokens[i]
        if token.kind != _KIND_WORD:
            break
        if _match_phrase(tokens, i, BACKGROUND_PHRASES) or _match_phrase(
            tokens, i, {p: p for p in MULTIWORD_PREPOSITIONS}
        ):
            break
        lower = token.text.lower()
        if lower == "of":
            nxt = tokens[i + 1] if i + 1 < n else None
            if body and nxt and nxt.kind == _KIND_WORD and _is_open_class(nxt.text.lower()):
                body.append(token)
                i += 1
                continue
            break
        if not _is_open_class(lower):
            break
        if _is_ing_verb(tokens, i, after_copula=False) and body:
            break
        body.append(token)
        i += 1

    if not body:
        return None, max(i - start, 1)

    surface = " ".join(t.text for t in words + body)
    pn_match = _has_pn_evidence(body, surface)
    article = next((w.text.lower() for w in words if w.text.lower() in ("a", "an")), None)
    body_words = [t.text for t in body]

    plural_surface = None
    if count is not None and parse_counts:
        plural_surface = body_words[-1].lower()
        body_words[-1] = singularize(body_words[-1])
        phrase = " ".join(body_words).lower()
        article = "an" if phrase[0] in "aeiou" else "a"
        caption = f"{article} {phrase}"
        group_key = plural_surface
    else:
        if count is not None:
            count = None  # counting disabled: keep the raw plural chunk
        phrase = " ".join(body_words)
        caption = phrase if pn_match else phrase.lower()
        if article:
            caption = f"{article} {caption}"
        group_key = slugify(phrase)

    mention = RawMention(
        surface=surface,
        caption=caption,
        group_key=group_key,
        order=0,
        count=count,
        plural_surface=plural_surface,
        pn_match=pn_match,
    )
    return mention, i - start


def _is_open_class(lower: str) -> bool:
    return not (
        lower in DETERMINERS
        or lower in NUMBER_WORDS
        or lower in PRONOUNS
        or lower in CONJUNCTIONS
        or lower in COPULAS
        or lower in TEXT_CUES
        or lower in PREPOSITIONS
        or lower in _OTHER_STOPWORDS
    )


def _has_pn_evidence(body: list[_Token], surface: str) -> bool:
    padded = f" {surface.lower()} "
    for entry in gazetteer():
        if f" {entry} " in padded:
            return True
    run = 0
    for token in body:
        if token.capitalized and not token.sentence_initial:
            run += 1
            if run >= 2:
                return True
        else:
            run = 0
    return False


# --- relation patterns ----------------------------------------------------------


def _build_relations(ops: list[tuple[str, object]], mentions: list[RawMention]) -> list[RawRelation]:
    relations: list[RawRelation] = []
    seen: set[tuple[int, str, int]] = set()

    def emit(subject: int, predicate: str, obj: int) -> None:
        predicate = " ".join(predicate.lower().split())
        if subject == obj or not predicate:
            return
        key = (subject, predicate, obj)
        if key not in seen:
            seen.add(key)
            relations.append(RawRelation(subject, predicate, obj))

    def default_referent() -> Optional[int]:
        for mention in mentions:
            if mention.category is ObjectCategory.GO:
                return mention.order
        return mentions[0].order if mentions else None

    last_chunk: Optional[int] = None
    prev_chunks: list[int] = []
    pending: Optional[tuple[str, str]] = None  # (op kind, predicate so far)

    for kind, value in ops:
        if kind == _OP_SENTENCE:
            last_chunk = None
            pending = None
        elif kind == _OP_CHUNK:
            order = int(value)  # type: ignore[arg-type]
            if pending is not None:
                p_kind, predicate = pending
                if p_kind in (_OP_PREP, _OP_VERB) and last_chunk is not None:
                    emit(last_chunk, predicate, order)
                elif p_kind == _OP_CUE_PREP and last_chunk is not None and mentions[last_chunk].quoted:
                    # "'X' written on a wall": attach the quote to the surface.
                    emit(last_chunk, predicate, order)
                elif p_kind == _OP_CUE:
                    # "... reads STOP": the following chunk is the rendered text.
                    mention = mentions[order]
                    if mention.category is not ObjectCategory.PN and last_chunk is not None:
                        mention.cue_governed = True
                        mention.category = ObjectCategory.TEXT
                        mention.text_payload = mention.surface
                        mention.pn_key = None
                        emit(order, "written on", last_chunk)
                pending = None
            prev_chunks.append(order)
            last_chunk = order
        elif kind == _OP_PREP:
            if pending and pending[0] == _OP_CUE:
                pending = (_OP_CUE_PREP, f"{pending[1]} {value}")
            elif pending and pending[0] == _OP_VERB:
                pending = (_OP_VERB, f"{pending[1]} {value}")
            else:
                pending = (_OP_PREP, str(value))
        elif kind == _OP_VERB:
            pending = (_OP_VERB, str(value))
        elif kind == _OP_CUE:
            pending = (_OP_CUE, str(value))
        elif kind == _OP_PRONOUN:
            if pending is not None:
                p_kind, predicate = pending
                referent = default_referent()
                if referent is not None and last_chunk is not None:
                    if p_kind == _OP_CUE_PREP and mentions[last_chunk].quoted:
                        emit(last_chunk, predicate, referent)
                    elif p_kind in (_OP_PREP, _OP_VERB) and referent != last_chunk:
                        emit(last_chunk, predicate, referent)
                pending = None
        elif kind == _OP_SPECIAL:
            if last_chunk is not None:
                target = next((c for c in reversed(prev_chunks) if c != last_chunk), None)
                if target is not None:
                    emit(last_chunk, str(value), target)
            pending = None
        elif kind == _OP_BREAK:
            if pending and pending[0] != _OP_CUE:
                pending = None
    return relations
