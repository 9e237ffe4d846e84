"""Span algebra, the tagged-sequence codec, and model-output alignment.

All offsets are Unicode code points, which is what Python string indexing
counts, so slicing doubles as the offset oracle. Mention markers are the
literal tokens ``[BEGIN_ENT]`` / ``[END_ENT]`` with single-space framing;
a disambiguated mention is followed by `` [<KB title>]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from linkforge.errors import (
    MissingTitle,
    OverlappingSpans,
    SpanOutOfBounds,
    TagTokenInText,
)

if TYPE_CHECKING:
    from linkforge.augmentation import ExpansionMap

BEGIN_TAG = "[BEGIN_ENT]"
END_TAG = "[END_ENT]"


@dataclass(frozen=True)
class Document:
    """A source text with a stable id.

    The text must not contain the reserved tag tokens; such documents are
    rejected at ingestion instead of escaped.
    """

    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        for token in (BEGIN_TAG, END_TAG):
            if token in self.text:
                raise TagTokenInText(
                    f"document {self.id!r} contains reserved token {token}"
                )


@dataclass(frozen=True, order=True)
class MentionSpan:
    """Half-open code-point span [start, end) with its surface text."""

    start: int
    end: int
    surface: str

    @classmethod
    def from_text(cls, text: str, start: int, end: int) -> "MentionSpan":
        span = cls(start, end, text[start:end])
        span.validate(text)
        return span

    def validate(self, text: str) -> None:
        if not (0 <= self.start < self.end <= len(text)):
            raise SpanOutOfBounds(
                f"span [{self.start},{self.end}) out of bounds for text of "
                f"length {len(text)}"
            )
        if text[self.start:self.end] != self.surface:
            raise SpanOutOfBounds(
                f"span [{self.start},{self.end}) surface mismatch: "
                f"{self.surface!r} != {text[self.start:self.end]!r}"
            )

    def overlaps(self, other: "MentionSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Annotation:
    """A mention span, optionally resolved to a KB title and URI.

    ``uri`` is only ever set by a dictionary lookup, never synthesized.
    """

    span: MentionSpan
    title: str | None = None
    uri: str | None = None

    def triple(self) -> tuple[int, int, str | None]:
        return (self.span.start, self.span.end, self.uri)


@dataclass(frozen=True)
class TaggedEntry:
    """One tagged mention inside a raw model string.

    ``position`` is the code-point offset of ``mention`` within the raw
    string; ``plain_position`` is its offset within the tag-stripped text.
    """

    mention: str
    title: str | None
    position: int
    plain_position: int


@dataclass(frozen=True)
class TaggedSequence:
    """A raw tagged string together with its parsed entries.

    ``plain_text`` is the raw string with markers and titles stripped;
    for codec output it equals the encoded document text exactly.
    """

    raw: str
    entries: tuple[TaggedEntry, ...]
    plain_text: str
    diagnostics: tuple[str, ...] = field(default=())


def _check_encodable(doc: Document, spans: list[MentionSpan]) -> None:
    prev: MentionSpan | None = None
    for span in spans:
        span.validate(doc.text)
        if prev is not None:
            if span.start < prev.start:
                raise OverlappingSpans(
                    f"spans not sorted: [{span.start},{span.end}) after "
                    f"[{prev.start},{prev.end})"
                )
            if prev.overlaps(span):
                raise OverlappingSpans(
                    f"spans [{prev.start},{prev.end}) and "
                    f"[{span.start},{span.end}) overlap"
                )
        prev = span


def _encode(doc: Document, spans: list[MentionSpan], titles: list[str] | None) -> TaggedSequence:
    _check_encodable(doc, spans)
    parts: list[str] = []
    entries: list[TaggedEntry] = []
    cursor = 0
    raw_len = 0
    for i, span in enumerate(spans):
        gap = doc.text[cursor:span.start]
        parts.append(gap)
        raw_len += len(gap)
        opening = BEGIN_TAG + " "
        parts.append(opening)
        position = raw_len + len(opening)
        parts.append(span.surface)
        closing = " " + END_TAG
        parts.append(closing)
        raw_len = position + len(span.surface) + len(closing)
        title = None if titles is None else titles[i]
        if title is not None:
            suffix = f" [{title}]"
            parts.append(suffix)
            raw_len += len(suffix)
        entries.append(TaggedEntry(span.surface, title, position, span.start))
        cursor = span.end
    parts.append(doc.text[cursor:])
    return TaggedSequence("".join(parts), tuple(entries), doc.text)


def encode_ner_target(doc: Document, spans: list[MentionSpan]) -> TaggedSequence:
    """Wrap each span as ``[BEGIN_ENT] surface [END_ENT]`` in place."""
    return _encode(doc, list(spans), None)


def encode_ed_target(doc: Document, annotations: list[Annotation]) -> TaggedSequence:
    """Like :func:`encode_ner_target`, with `` [<title>]`` after each closing tag."""
    titles: list[str] = []
    for ann in annotations:
        if not ann.title:
            raise MissingTitle(f"annotation at [{ann.span.start},{ann.span.end}) has no title")
        titles.append(ann.title)
    return _encode(doc, [a.span for a in annotations], titles)


def parse_tagged(raw: str, expect_titles: bool) -> TaggedSequence:
    """Scan arbitrary model output for tagged mentions. Never fails.

    Malformed fragments (unclosed tags, nested openers, dangling titles,
    empty mentions) are skipped and reported in ``diagnostics``. When
    ``expect_titles`` is set, a bracketed group immediately after a closing
    tag is consumed as the entry's title, terminated by the first ``]``.
    """
    entries: list[TaggedEntry] = []
    diagnostics: list[str] = []
    plain_parts: list[str] = []
    plain_len = 0
    pos = 0

    def emit_plain(segment: str) -> None:
        nonlocal plain_len
        plain_parts.append(segment)
        plain_len += len(segment)

    while True:
        begin = raw.find(BEGIN_TAG, pos)
        if begin == -1:
            emit_plain(raw[pos:])
            break
        emit_plain(raw[pos:begin])
        content_start = begin + len(BEGIN_TAG)
        end = raw.find(END_TAG, content_start)
        if end == -1:
            diagnostics.append(f"unclosed {BEGIN_TAG} at offset {begin}")
            emit_plain(raw[content_start:])
            break
        nested = raw.find(BEGIN_TAG, content_start)
        if nested != -1 and nested < end:
            diagnostics.append(f"nested {BEGIN_TAG} at offset {begin}; outer tag skipped")
            emit_plain(raw[content_start:nested])
            pos = nested
            continue

        inner = raw[content_start:end]
        mention_start = content_start
        # The codec frames the surface with exactly one space per side;
        # remove only that framing so surfaces may themselves carry spaces.
        if inner.startswith(" "):
            inner = inner[1:]
            mention_start += 1
        if inner.endswith(" "):
            inner = inner[:-1]
        after = end + len(END_TAG)

        title: str | None = None
        if expect_titles:
            j = after
            while j < len(raw) and raw[j] == " ":
                j += 1
            if raw.startswith("[", j) and not raw.startswith(BEGIN_TAG, j):
                close = raw.find("]", j + 1)
                if close == -1:
                    diagnostics.append(f"dangling title bracket at offset {j}")
                else:
                    title = raw[j + 1:close]
                    after = close + 1
            else:
                diagnostics.append(f"entity at offset {begin} has no title")

        if not inner:
            diagnostics.append(f"empty mention at offset {begin}")
        else:
            entries.append(TaggedEntry(inner, title, mention_start, plain_len))
            emit_plain(inner)
        pos = after

    return TaggedSequence(raw, tuple(entries), "".join(plain_parts), tuple(diagnostics))


def _whitespace_tolerant_find(text: str, needle: str, start: int) -> tuple[int, int] | None:
    """Find needle at or after start, tolerating differing whitespace runs."""
    exact = text.find(needle, start)
    if exact != -1:
        return exact, exact + len(needle)
    tokens = needle.split()
    if not tokens:
        return None
    pattern = r"\s+".join(re.escape(tok) for tok in tokens)
    match = re.compile(pattern).search(text, start)
    if match is None:
        return None
    return match.start(), match.end()


def align_to_source(
    doc: Document,
    tagged: TaggedSequence,
    offset_map: "ExpansionMap | None" = None,
    diagnostics: list[str] | None = None,
) -> list[Annotation]:
    """Assign source-document offsets to the entries of a tagged sequence.

    If the tag-stripped text reproduces the (possibly expanded) source
    exactly, offsets carry over directly. Otherwise each mention is located
    by a greedy in-order search that tolerates whitespace differences;
    entries that cannot be located are dropped with a diagnostic. When an
    ``offset_map`` (an :class:`~linkforge.augmentation.ExpansionMap`) is
    given, spans found in the expanded text are remapped to original
    document offsets.
    """
    from linkforge.augmentation import remap_span  # circular at import time

    sink = diagnostics if diagnostics is not None else []
    target = offset_map.expanded_text if offset_map is not None else doc.text

    located: list[tuple[MentionSpan, str | None]] = []
    if tagged.plain_text == target:
        for entry in tagged.entries:
            span = MentionSpan(
                entry.plain_position, entry.plain_position + len(entry.mention), entry.mention
            )
            located.append((span, entry.title))
    else:
        cursor = 0
        for entry in tagged.entries:
            hit = _whitespace_tolerant_find(target, entry.mention, cursor)
            if hit is None:
                sink.append(f"could not align mention {entry.mention!r}; dropped")
                continue
            start, end = hit
            located.append((MentionSpan(start, end, target[start:end]), entry.title))
            cursor = end

    annotations: list[Annotation] = []
    for span, title in located:
        if offset_map is not None:
            span = remap_span(offset_map, span)
        surface = doc.text[span.start:span.end]
        annotations.append(Annotation(MentionSpan(span.start, span.end, surface), title))
    return annotations
