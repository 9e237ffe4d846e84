"""linkforge: deterministic entity-linking pipeline engine and evaluation harness."""

__version__ = "0.1.0"

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
from linkforge.kb import KBDictionary, KBEntry, load_dictionary
from linkforge.pipeline import LinkedDocument, Pipeline, PipelineConfig, build_training_samples

__all__ = [
    "Annotation",
    "Document",
    "KBDictionary",
    "KBEntry",
    "LinkedDocument",
    "MentionSpan",
    "Pipeline",
    "PipelineConfig",
    "TaggedSequence",
    "__version__",
    "align_to_source",
    "build_training_samples",
    "encode_ed_target",
    "encode_ner_target",
    "load_dictionary",
    "parse_tagged",
]
