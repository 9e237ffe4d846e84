"""End-to-end annotation flow in all supported configurations.

Modes:

* ``joint``        one model does NER then disambiguation, two passes.
* ``external-ner`` an external NER service replaces the first pass.
* ``e2e``          one pass predicts mentions and titles directly; with
                   augmentation the first pass only harvests mentions and a
                   second pass runs on the expanded plain text.
* ``mixed``        e2e pass for mention detection, then the joint ED stage.
* ``llm-only``     chat model lists spans, seq2seq model resolves titles.

Augmentation failures (chat backend down, unparseable reply) degrade to
the unaugmented path with a diagnostic; they never abort a document.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from linkforge import backend as backend_mod
from linkforge.annotation import (
    Annotation,
    Document,
    MentionSpan,
    TaggedSequence,
    align_to_source,
    encode_ed_target,
    encode_ner_target,
    parse_tagged,
)
from linkforge.augmentation import (
    ExpansionMap,
    ExpansionResult,
    apply_expansions,
    build_entity_listing_prompt,
    build_mention_expansion_prompt,
    merge_listed_spans,
    parse_entity_list_response,
    parse_expansion_response,
)
from linkforge.backend import BackendConfig, ChatRequest, GenerationRequest
from linkforge.errors import (
    BackendError,
    BackendUnavailable,
    ConfigError,
    TagTokenInText,
)
from linkforge.kb import KBDictionary, load_dictionary

logger = logging.getLogger(__name__)

MODES = ("joint", "external-ner", "e2e", "mixed", "llm-only")

NER_SUFFIX = " target_ner"
ED_SUFFIX = " target_el"


@dataclass(frozen=True)
class PipelineConfig:
    mode: str
    backends: dict[str, BackendConfig]
    dictionary_path: str | Path | None = None
    mention_expansion: bool = False
    ner_expansion: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        have = set(self.backends)
        if "seq2seq" not in have:
            raise ConfigError("all modes require a 'seq2seq' backend")
        if self.mode == "external-ner" and "ner-service" not in have:
            raise ConfigError("external-ner mode requires a 'ner-service' backend")
        if self.mode == "llm-only" and "chat" not in have:
            raise ConfigError("llm-only mode requires a 'chat' backend")
        if (self.mention_expansion or self.ner_expansion) and "chat" not in have:
            raise ConfigError("expansion flags require a 'chat' backend")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "PipelineConfig":
        """Build from the JSON configuration document.

        Relative fixture/dictionary paths resolve against ``base_dir``.
        """

        def resolve(value: str | None) -> str | None:
            if value is None or base_dir is None:
                return value
            path = Path(value)
            return str(path if path.is_absolute() else base_dir / path)

        backends: dict[str, BackendConfig] = {}
        for name, spec in (data.get("backends") or {}).items():
            if not isinstance(spec, dict) or "kind" not in spec:
                raise ConfigError(f"backend {name!r} must be an object with a 'kind'")
            try:
                backends[name] = BackendConfig(
                    kind=spec["kind"],
                    endpoint=spec.get("endpoint", ""),
                    fixture=resolve(spec.get("fixture")),
                    timeout=spec.get("timeout", 60.0),
                    max_retries=spec.get("max_retries", 2),
                    temperature=spec.get("temperature", 0.0),
                    max_new_tokens=spec.get("max_new_tokens", 1024),
                )
            except ValueError as exc:
                raise ConfigError(f"backend {name!r}: {exc}") from exc
        config = cls(
            mode=data.get("mode", "joint"),
            backends=backends,
            dictionary_path=resolve(data.get("dictionary")),
            mention_expansion=bool(data.get("mention_expansion", False)),
            ner_expansion=bool(data.get("ner_expansion", False)),
        )
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(data, base_dir=path.parent)


@dataclass(frozen=True)
class LinkedDocument:
    doc: Document
    annotations: tuple[Annotation, ...]
    diagnostics: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "id": self.doc.id,
            "annotations": [
                {
                    "start": a.span.start,
                    "end": a.span.end,
                    "surface": a.span.surface,
                    "title": a.title,
                    "uri": a.uri,
                }
                for a in self.annotations
            ],
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True)
class TrainingSample:
    input: str
    target: str
    task: str


def build_training_samples(doc: Document, gold: list[Annotation]) -> list[TrainingSample]:
    """Emit the three joint fine-tuning samples for one gold document.

    NER: plain text + suffix -> tagged text. ED: tagged text + suffix ->
    tagged text with titles. E2E: plain text -> tagged text with titles.
    """
    ordered = sorted(gold, key=lambda a: a.span.start)
    spans = [a.span for a in ordered]
    ner_target = encode_ner_target(doc, spans).raw
    ed_target = encode_ed_target(doc, ordered).raw
    return [
        TrainingSample(doc.text + NER_SUFFIX, ner_target, "ner"),
        TrainingSample(ner_target + ED_SUFFIX, ed_target, "ed"),
        TrainingSample(doc.text, ed_target, "e2e"),
    ]


def _sanitize_spans(
    spans: list[MentionSpan], diagnostics: list[str]
) -> list[MentionSpan]:
    """Sort and drop overlaps (first wins) so codec preconditions hold."""
    clean: list[MentionSpan] = []
    for span in sorted(spans):
        if clean and span.overlaps(clean[-1]):
            diagnostics.append(
                f"span [{span.start},{span.end}) overlaps a previous span; dropped"
            )
            continue
        clean.append(span)
    return clean


class Pipeline:
    """Per-document annotation engine; shareable across threads."""

    def __init__(self, config: PipelineConfig, dictionary: KBDictionary):
        config.validate()
        self.config = config
        self.dictionary = dictionary

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Pipeline":
        if config.dictionary_path is None:
            raise ConfigError("pipeline requires a 'dictionary' path")
        return cls(config, load_dictionary(config.dictionary_path))

    @classmethod
    def from_config_file(cls, path: str | Path) -> "Pipeline":
        return cls.from_config(PipelineConfig.from_file(path))

    # -- backend helpers ------------------------------------------------------

    def _backend(self, role: str) -> BackendConfig:
        try:
            return self.config.backends[role]
        except KeyError:
            raise ConfigError(f"no {role!r} backend configured") from None

    def _generate(self, task: str, text: str) -> str:
        try:
            return backend_mod.generate(self._backend("seq2seq"), GenerationRequest(task, text))
        except BackendError as exc:
            raise BackendUnavailable(f"seq2seq backend failed on task {task!r}: {exc}") from exc

    def _chat(self, prompt: str) -> str:
        return backend_mod.chat(self._backend("chat"), ChatRequest(prompt))

    # -- stages ---------------------------------------------------------------

    def _detect_spans(self, doc: Document, diagnostics: list[str]) -> list[MentionSpan]:
        """Mode-specific mention detection over the raw document text."""
        mode = self.config.mode
        if mode == "joint":
            raw = self._generate("ner", doc.text + NER_SUFFIX)
            tagged = parse_tagged(raw, expect_titles=False)
            diagnostics.extend(tagged.diagnostics)
            found = align_to_source(doc, tagged, diagnostics=diagnostics)
            return [a.span for a in found]
        if mode == "external-ner":
            try:
                return backend_mod.detect_mentions(
                    self._backend("ner-service"), doc.text, diagnostics=diagnostics
                )
            except BackendError as exc:
                raise BackendUnavailable(f"NER service failed: {exc}") from exc
        if mode in ("e2e", "mixed"):
            raw = self._generate("e2e", doc.text)
            tagged = parse_tagged(raw, expect_titles=True)
            diagnostics.extend(tagged.diagnostics)
            found = align_to_source(doc, tagged, diagnostics=diagnostics)
            return [a.span for a in found]
        if mode == "llm-only":
            prompt = build_entity_listing_prompt(doc.text)
            try:
                reply = self._chat(prompt)
            except BackendError as exc:
                raise BackendUnavailable(f"chat backend failed on entity listing: {exc}") from exc
            candidates = parse_entity_list_response(reply)
            if not candidates:
                diagnostics.append("entity listing reply contained no usable spans")
            return merge_listed_spans(doc.text, [], candidates)
        raise ConfigError(f"unknown mode {mode!r}")

    def _expand_ner(
        self, doc: Document, spans: list[MentionSpan], diagnostics: list[str]
    ) -> list[MentionSpan]:
        """Entity-listing augmentation: merge extra LLM-found spans."""
        try:
            reply = self._chat(build_entity_listing_prompt(doc.text))
        except BackendError as exc:
            diagnostics.append(f"NER expansion skipped: {exc}")
            return spans
        candidates = parse_entity_list_response(reply)
        return merge_listed_spans(doc.text, spans, candidates)

    def _expand_mentions(
        self, doc: Document, spans: list[MentionSpan], diagnostics: list[str]
    ) -> ExpansionMap:
        """Mention-expansion augmentation; identity map when it fails."""
        identity = apply_expansions(doc.text, spans, ExpansionResult({}))
        if not self.config.mention_expansion or not spans:
            return identity
        surfaces = [span.surface for span in spans]
        prompt = build_mention_expansion_prompt(surfaces, doc.text)
        try:
            reply = self._chat(prompt)
        except BackendError as exc:
            diagnostics.append(f"mention expansion skipped: {exc}")
            return identity
        result = parse_expansion_response(reply, set(surfaces))
        diagnostics.extend(result.diagnostics)
        return apply_expansions(doc.text, spans, result)

    def _ed_stage(
        self, doc: Document, spans: list[MentionSpan], diagnostics: list[str]
    ) -> list[Annotation]:
        """Expansion, re-encoding, disambiguation pass, and re-alignment."""
        if self.config.ner_expansion:
            spans = _sanitize_spans(self._expand_ner(doc, spans, diagnostics), diagnostics)
        if not spans:
            return []
        emap = self._expand_mentions(doc, spans, diagnostics)
        try:
            expanded_doc = Document(doc.id, emap.expanded_text)
        except TagTokenInText as exc:
            diagnostics.append(f"expansion injected a reserved token; discarded ({exc})")
            emap = apply_expansions(doc.text, spans, ExpansionResult({}))
            expanded_doc = Document(doc.id, emap.expanded_text)
        tagged_input = encode_ner_target(expanded_doc, [exp for _, exp in emap.pairs])
        raw = self._generate("ed", tagged_input.raw + ED_SUFFIX)
        tagged = parse_tagged(raw, expect_titles=True)
        diagnostics.extend(tagged.diagnostics)
        return align_to_source(doc, tagged, offset_map=emap, diagnostics=diagnostics)

    def _e2e_stage(
        self, doc: Document, spans: list[MentionSpan], first_pass: TaggedSequence | None,
        diagnostics: list[str],
    ) -> list[Annotation]:
        """Second e2e pass over expanded plain text (tags omitted)."""
        if self.config.ner_expansion:
            spans = _sanitize_spans(self._expand_ner(doc, spans, diagnostics), diagnostics)
        emap = self._expand_mentions(doc, spans, diagnostics)
        if emap.expanded_text == doc.text and first_pass is not None:
            # Nothing changed: the first pass already carries the titles.
            return align_to_source(doc, first_pass, diagnostics=diagnostics)
        raw = self._generate("e2e", emap.expanded_text)
        tagged = parse_tagged(raw, expect_titles=True)
        diagnostics.extend(tagged.diagnostics)
        return align_to_source(doc, tagged, offset_map=emap, diagnostics=diagnostics)

    # -- entry point ----------------------------------------------------------

    def run(self, doc: Document) -> LinkedDocument:
        """Annotate one document; final annotations are KB-filtered and at
        original-document offsets."""
        diagnostics: list[str] = []
        if not doc.text.strip():
            return LinkedDocument(doc, (), ())

        mode = self.config.mode
        first_pass: TaggedSequence | None = None
        if mode == "e2e":
            raw = self._generate("e2e", doc.text)
            first_pass = parse_tagged(raw, expect_titles=True)
            diagnostics.extend(first_pass.diagnostics)
            found = align_to_source(doc, first_pass, diagnostics=diagnostics)
            spans = _sanitize_spans([a.span for a in found], diagnostics)
            annotations = self._e2e_stage(doc, spans, first_pass, diagnostics)
        else:
            spans = _sanitize_spans(self._detect_spans(doc, diagnostics), diagnostics)
            annotations = self._ed_stage(doc, spans, diagnostics)

        final: list[Annotation] = []
        for ann in sorted(annotations, key=lambda a: (a.span.start, a.span.end)):
            if final and ann.span.overlaps(final[-1].span):
                diagnostics.append(
                    f"annotation at [{ann.span.start},{ann.span.end}) overlaps a "
                    "previous one; dropped"
                )
                continue
            final.append(ann)
        filtered = self.dictionary.filter_annotations(final)
        dropped = len(final) - len(filtered)
        if dropped:
            diagnostics.append(f"{dropped} annotation(s) removed by the KB title filter")
        return LinkedDocument(doc, tuple(filtered), tuple(diagnostics))
