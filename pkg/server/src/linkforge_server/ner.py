"""Off-the-shelf span taggers behind /v1/ner.

The default "capitalized" tagger groups runs of capitalized tokens into
spans, which is enough for smoke-level NER on English-like input. A
HuggingFace token-classification model can be plugged in with the tagger
value ``hf:<model-path>``.
"""

from __future__ import annotations

import re

_CAP_TOKEN = re.compile(r"\b[A-Z][\w'-]*", re.UNICODE)
# Sentence-initial stop words that a capitalized-token heuristic would
# otherwise always tag.
_STOP = {"The", "A", "An", "In", "On", "At", "And", "Or", "But", "It", "He",
         "She", "They", "We", "I", "This", "That"}


def tag_capitalized(text: str) -> list[dict]:
    """Group adjacent capitalized tokens (single spaces between) into spans."""
    spans: list[dict] = []
    current: tuple[int, int] | None = None
    for match in _CAP_TOKEN.finditer(text):
        if match.group() in _STOP:
            continue
        if current is not None and text[current[1]:match.start()] == " ":
            current = (current[0], match.end())
        else:
            if current is not None:
                spans.append(_to_span(text, current))
            current = (match.start(), match.end())
    if current is not None:
        spans.append(_to_span(text, current))
    return spans


def _to_span(text: str, bounds: tuple[int, int]) -> dict:
    start, end = bounds
    return {"start": start, "end": end, "surface": text[start:end]}


class HfTagger:
    """Token-classification model wrapper (loaded lazily)."""

    def __init__(self, model_path: str, device: str = "cpu"):
        from transformers import pipeline

        self._pipe = pipeline(
            "token-classification",
            model=model_path,
            aggregation_strategy="simple",
            device=-1 if device == "cpu" else device,
        )

    def __call__(self, text: str) -> list[dict]:
        spans = []
        for hit in self._pipe(text):
            start, end = int(hit["start"]), int(hit["end"])
            spans.append({"start": start, "end": end, "surface": text[start:end]})
        return spans


def build_tagger(tagger: str, device: str = "cpu"):
    if tagger == "capitalized":
        return tag_capitalized
    if tagger.startswith("hf:"):
        return HfTagger(tagger[3:], device)
    raise ValueError(f"unknown tagger {tagger!r}")
