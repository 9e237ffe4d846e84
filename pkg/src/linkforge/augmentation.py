"""Augmentation prompts, robust response parsing, and span rewriting.

Two strategies are supported: mention expansion (rewrite ambiguous surfaces
such as ``AK`` into linkable ones such as ``Alaska``) and entity listing
(ask for additional entity surfaces and merge them as new spans). Both run
once per document. Expansions are applied under exact-match rules, and the
resulting :class:`ExpansionMap` is invertible so final annotations can be
reported at original document offsets.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from linkforge.annotation import BEGIN_TAG, END_TAG, MentionSpan
from linkforge.errors import EmptyMentionList

logger = logging.getLogger(__name__)

_EXPANSION_FORMAT_LINE = (
    "Answer with one unformatted JSON object mapping each mention to its "
    "expansion. Do not format the json output."
)


@dataclass(frozen=True)
class ExpansionResult:
    """Surface-to-expansion mapping accepted from an LLM response."""

    expansions: dict[str, str]
    diagnostics: tuple[str, ...] = field(default=())

    def __bool__(self) -> bool:
        return bool(self.expansions)


@dataclass(frozen=True)
class ExpansionMap:
    """Invertible record of in-place span replacements.

    ``pairs`` lists every annotated span in ascending order as
    ``(original_span, expanded_span)``; unexpanded spans map to themselves
    (shifted). Text outside the mapped spans is identical in both texts.
    """

    pairs: tuple[tuple[MentionSpan, MentionSpan], ...]
    original_text: str
    expanded_text: str


def _quote(mention: str) -> str:
    return "'" + mention.replace("\\", "\\\\").replace("'", "\\'") + "'"


def build_mention_expansion_prompt(mentions: list[str], context: str) -> str:
    """One prompt per document asking for expansions of all mention surfaces."""
    if not mentions:
        raise EmptyMentionList("mention expansion requires at least one mention")
    listed = ", ".join(_quote(m) for m in mentions)
    return (
        f"Expand the following entity mentions {listed} based on the context.\n"
        f"Context: '{context}'\n"
        f"{_EXPANSION_FORMAT_LINE}"
    )


def build_entity_listing_prompt(context: str) -> str:
    return (
        "Please generate one list with all entities from the following text "
        "in JSON format, excluding numbers. Do not format the json output: "
        f"Context: '{context}'"
    )


def _first_json_value(text: str, opener: str) -> object | None:
    """Decode the first balanced JSON value starting at any ``opener`` char."""
    decoder = json.JSONDecoder()
    start = text.find(opener)
    while start != -1:
        try:
            value, _ = decoder.raw_decode(text, start)
            return value
        except ValueError:
            start = text.find(opener, start + 1)
    return None


def parse_expansion_response(text: str, allowed_mentions: set[str]) -> ExpansionResult:
    """Extract the first JSON object and keep only non-hallucinated expansions.

    A key survives only if it exactly equals one of the NER-stage surfaces;
    self-expansions are dropped silently, as are values that would inject
    reserved tag tokens into the text.
    """
    diagnostics: list[str] = []
    obj = _first_json_value(text, "{")
    if not isinstance(obj, dict):
        diagnostics.append("no JSON object found in expansion response")
        return ExpansionResult({}, tuple(diagnostics))
    expansions: dict[str, str] = {}
    for key, value in obj.items():
        if not isinstance(key, str) or not isinstance(value, str) or not key or not value:
            continue
        if key not in allowed_mentions:
            diagnostics.append(f"expansion for unannotated span {key!r} dropped")
            continue
        if value == key:
            continue
        if BEGIN_TAG in value or END_TAG in value:
            diagnostics.append(f"expansion for {key!r} contains a reserved token; dropped")
            continue
        expansions[key] = value
    return ExpansionResult(expansions, tuple(diagnostics))


def parse_entity_list_response(text: str) -> list[str]:
    """Extract the first JSON array of strings, deduplicated in order."""
    value = _first_json_value(text, "[")
    if not isinstance(value, list):
        return []
    seen: set[str] = set()
    out: list[str] = []
    for item in value:
        if not isinstance(item, str) or not item or item in seen:
            continue
        seen.add(item)
        out.append(item)
    return out


def apply_expansions(
    doc_text: str,
    annotated_spans: list[MentionSpan],
    expansions: ExpansionResult,
) -> ExpansionMap:
    """Replace every annotated span whose surface has an expansion, in place.

    All occurrences among the annotated spans are replaced (there is no
    per-occurrence signal to do otherwise). Spans without expansions map to
    themselves at their shifted positions.
    """
    parts: list[str] = []
    pairs: list[tuple[MentionSpan, MentionSpan]] = []
    cursor = 0
    shift = 0
    for span in annotated_spans:
        parts.append(doc_text[cursor:span.start])
        replacement = expansions.expansions.get(span.surface, span.surface)
        new_start = span.start + shift
        parts.append(replacement)
        pairs.append((span, MentionSpan(new_start, new_start + len(replacement), replacement)))
        shift += len(replacement) - len(span.surface)
        cursor = span.end
    parts.append(doc_text[cursor:])
    return ExpansionMap(tuple(pairs), doc_text, "".join(parts))


def merge_listed_spans(
    doc_text: str,
    existing: list[MentionSpan],
    candidates: list[str],
) -> list[MentionSpan]:
    """Add LLM-listed entity surfaces as new spans under non-overlap rules.

    Candidates that do not occur verbatim in the text are dropped. The rest
    are processed longest first; every occurrence of a candidate becomes a
    span unless it overlaps an existing or previously added span.
    """
    taken: list[MentionSpan] = list(existing)
    usable = [c for c in candidates if c and c in doc_text]
    usable.sort(key=len, reverse=True)  # stable: input order breaks length ties
    for candidate in usable:
        start = doc_text.find(candidate)
        while start != -1:
            span = MentionSpan(start, start + len(candidate), candidate)
            if not any(span.overlaps(t) for t in taken):
                taken.append(span)
            start = doc_text.find(candidate, start + 1)
    return sorted(taken)


def remap_span(emap: ExpansionMap, span_in_expanded: MentionSpan) -> MentionSpan:
    """Map a span in the expanded text back to original-document offsets.

    A span equal to a mapped expanded span returns its original span. A span
    entirely outside replaced regions is shifted by the cumulative length
    delta of preceding replacements. A span straddling a replaced region
    returns the smallest original span covering its pre-image (positions
    inside a replacement cannot be subdivided).
    """
    exact = {
        (exp.start, exp.end): orig for orig, exp in emap.pairs
    }
    key = (span_in_expanded.start, span_in_expanded.end)
    if key in exact:
        return exact[key]

    # Only pairs that changed the text matter for shifting and covering.
    replacements = [(orig, exp) for orig, exp in emap.pairs if orig.surface != exp.surface]

    def shift(pos: int) -> int:
        delta = 0
        for orig, exp in replacements:
            if exp.end <= pos:
                delta += (exp.end - exp.start) - (orig.end - orig.start)
        return pos - delta

    start, end = span_in_expanded.start, span_in_expanded.end
    new_start: int | None = None
    new_end: int | None = None
    for orig, exp in replacements:
        if exp.start <= start < exp.end:
            new_start = orig.start
        if exp.start < end <= exp.end:
            new_end = orig.end
    if new_start is None:
        new_start = shift(start)
    if new_end is None:
        new_end = shift(end)
    return MentionSpan(new_start, new_end, emap.original_text[new_start:new_end])
