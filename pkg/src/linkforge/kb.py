"""Title-to-URI dictionary of the target knowledge graph.

The dictionary backs the hallucination filter: model-produced titles that
have no exact match here are discarded. Lookup normalization is minimal on
purpose (Wikipedia title conventions only); anything fuzzier would break
the exact-match policy.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from linkforge.annotation import Annotation
from linkforge.errors import EmptyDictionary

logger = logging.getLogger(__name__)

_SPACE_RUN = re.compile(r" +")


def normalize_title(title: str) -> str:
    """Canonicalize a title: underscores to spaces, collapse space runs,
    uppercase the first code point."""
    title = _SPACE_RUN.sub(" ", title.replace("_", " "))
    return title[:1].upper() + title[1:]


@dataclass(frozen=True)
class KBEntry:
    title: str
    uri: str


class KBDictionary:
    """Read-only map from normalized KB title to URI.

    Plain in-memory hash map: O(length) lookup, bulk load of multi-million
    entry dumps in seconds.
    """

    def __init__(self, entries: dict[str, str], diagnostics: list[str] | None = None,
                 skipped: int = 0):
        self._entries = entries
        self.diagnostics = tuple(diagnostics or ())
        self.skipped = skipped
        self._uri_values: frozenset[str] | None = None

    @property
    def size(self) -> int:
        return len(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def resolve_title(self, title: str) -> KBEntry | None:
        """Exact-match lookup after normalization; None on miss, never fuzzy."""
        key = normalize_title(title)
        uri = self._entries.get(key)
        if uri is None:
            return None
        return KBEntry(key, uri)

    def filter_annotations(self, annotations: list[Annotation]) -> list[Annotation]:
        """Keep only annotations whose title resolves; fill in URIs.

        The result is a subsequence of the input, order preserved, and each
        survivor carries the dictionary URI for its title.
        """
        kept: list[Annotation] = []
        for ann in annotations:
            if not ann.title:
                continue
            entry = self.resolve_title(ann.title)
            if entry is None:
                continue
            kept.append(Annotation(ann.span, ann.title, entry.uri))
        return kept

    def uri_values(self) -> frozenset[str]:
        """Set of all URIs, for InKB membership tests."""
        if self._uri_values is None:
            self._uri_values = frozenset(self._entries.values())
        return self._uri_values

    def items(self):
        """Iterate (title, uri) pairs in load order."""
        return self._entries.items()


def load_dictionary(path: str | Path) -> KBDictionary:
    """Load a UTF-8 TSV of ``title<TAB>uri`` records.

    Duplicate titles (after normalization) keep the first occurrence.
    Malformed lines are skipped and counted; a file with zero valid records
    raises :class:`EmptyDictionary`.
    """
    path = Path(path)
    entries: dict[str, str] = {}
    diagnostics: list[str] = []
    skipped = 0
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            title, sep, uri = line.partition("\t")
            if not sep or not title or not uri:
                skipped += 1
                logger.debug("skipping malformed dictionary line %d", lineno)
                continue
            key = normalize_title(title)
            if key in entries:
                diagnostics.append(f"line {lineno}: duplicate title {key!r}; kept first")
                continue
            entries[key] = uri
    if not entries:
        raise EmptyDictionary(f"{path}: no valid title/uri records")
    if skipped:
        diagnostics.append(f"{skipped} malformed line(s) skipped")
    return KBDictionary(entries, diagnostics, skipped)
