"""Gold corpora, InKB filtering, strong matching, and micro P/R/F1.

Matching is strong: a prediction counts only when start, end, and URI all
equal a gold annotation. Counts are aggregated over all documents before
the ratios are taken (micro averaging), and only gold mentions whose URI
exists in the dictionary participate (InKB).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from linkforge.annotation import Annotation, Document, MentionSpan
from linkforge.errors import DuplicateDocId, MalformedRecord, UnknownDocId
from linkforge.kb import KBDictionary

logger = logging.getLogger(__name__)

MATCHING_MODE = "strong"


@dataclass(frozen=True)
class GoldCorpus:
    name: str
    docs: tuple[Document, ...]
    gold: dict[str, list[Annotation]]


@dataclass(frozen=True)
class DocCounts:
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    micro_precision: float
    micro_recall: float
    micro_f1: float
    per_doc: dict[str, DocCounts]
    inkb_excluded_gold: int
    matching: str = MATCHING_MODE

    def to_dict(self) -> dict:
        return {
            "matching": self.matching,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "inkb_excluded_gold": self.inkb_excluded_gold,
            "per_doc": {
                doc_id: {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for doc_id, c in self.per_doc.items()
            },
        }


def load_corpus(path: str | Path, name: str | None = None) -> GoldCorpus:
    """Load a JSON-Lines gold corpus.

    One record per document: ``{"id": str, "text": str, "gold": [{"start",
    "end", "uri"}]}`` where ``uri`` may be null for out-of-KB mentions and
    an optional ``"title"`` field is honored when present.
    """
    path = Path(path)
    docs: list[Document] = []
    gold: dict[str, list[Annotation]] = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise MalformedRecord(f"invalid JSON: {exc}", lineno) from exc
            if not isinstance(record, dict):
                raise MalformedRecord("record is not an object", lineno)
            doc_id = record.get("id")
            text = record.get("text")
            if not isinstance(doc_id, str) or not doc_id:
                raise MalformedRecord("missing or empty 'id'", lineno)
            if not isinstance(text, str):
                raise MalformedRecord(f"doc {doc_id!r}: missing 'text'", lineno)
            if doc_id in gold:
                raise DuplicateDocId(f"duplicate document id {doc_id!r} at line {lineno}")
            try:
                doc = Document(doc_id, text)
            except Exception as exc:
                raise MalformedRecord(f"doc {doc_id!r}: {exc}", lineno) from exc
            annotations: list[Annotation] = []
            for item in record.get("gold") or []:
                if not isinstance(item, dict):
                    raise MalformedRecord(f"doc {doc_id!r}: gold entry not an object", lineno)
                start, end = item.get("start"), item.get("end")
                uri = item.get("uri")
                title = item.get("title")
                if not isinstance(start, int) or not isinstance(end, int):
                    raise MalformedRecord(f"doc {doc_id!r}: non-integer gold offsets", lineno)
                try:
                    span = MentionSpan.from_text(text, start, end)
                except Exception as exc:
                    raise MalformedRecord(f"doc {doc_id!r}: {exc}", lineno) from exc
                annotations.append(
                    Annotation(
                        span,
                        title if isinstance(title, str) and title else None,
                        uri if isinstance(uri, str) and uri else None,
                    )
                )
            docs.append(doc)
            gold[doc_id] = annotations
    if not docs:
        logger.warning("corpus %s is empty", path)
    return GoldCorpus(name or path.stem, tuple(docs), gold)


def inkb_filter(corpus: GoldCorpus, dictionary: KBDictionary) -> tuple[GoldCorpus, int]:
    """Drop gold mentions without a URI or whose URI is absent from the KB.

    Returns the filtered corpus and the number of excluded gold mentions.
    """
    uris = dictionary.uri_values()
    filtered: dict[str, list[Annotation]] = {}
    excluded = 0
    for doc_id, annotations in corpus.gold.items():
        kept = [a for a in annotations if a.uri is not None and a.uri in uris]
        excluded += len(annotations) - len(kept)
        filtered[doc_id] = kept
    return GoldCorpus(corpus.name, corpus.docs, filtered), excluded


def match_strong(gold: list[Annotation], pred: list[Annotation]) -> tuple[int, int, int]:
    """Count (tp, fp, fn) under strong (start, end, uri) triple equality."""
    gold_triples = {a.triple() for a in gold}
    pred_triples = {a.triple() for a in pred}
    tp = len(gold_triples & pred_triples)
    return tp, len(pred) - tp, len(gold) - tp


def evaluate(
    corpus: GoldCorpus,
    predictions: dict[str, list[Annotation]],
    dictionary: KBDictionary,
) -> EvalReport:
    """InKB micro P/R/F1 over the whole corpus.

    Documents without predictions count all their gold mentions as false
    negatives. Predictions for unknown document ids are an error.
    """
    known = {doc.id for doc in corpus.docs}
    unknown = set(predictions) - known
    if unknown:
        raise UnknownDocId(f"predictions for unknown document id(s): {sorted(unknown)}")

    inkb, excluded = inkb_filter(corpus, dictionary)
    per_doc: dict[str, DocCounts] = {}
    tp = fp = fn = 0
    for doc in corpus.docs:
        counts = DocCounts(*match_strong(inkb.gold[doc.id], predictions.get(doc.id, [])))
        per_doc[doc.id] = counts
        tp += counts.tp
        fp += counts.fp
        fn += counts.fn

    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    # Single division keeps the value exactly equal to 2tp/(2tp+fp+fn).
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return EvalReport(tp, fp, fn, precision, recall, f1, per_doc, excluded)


def format_report_table(reports: dict[str, EvalReport]) -> str:
    """Plain-text table, one dataset per row plus a macro average."""
    header = f"{'dataset':<20} {'P':>8} {'R':>8} {'F1':>8} {'tp':>6} {'fp':>6} {'fn':>6} {'excl':>6}"
    lines = [header, "-" * len(header)]
    for name, report in reports.items():
        lines.append(
            f"{name:<20} {report.micro_precision:>8.4f} {report.micro_recall:>8.4f} "
            f"{report.micro_f1:>8.4f} {report.tp:>6} {report.fp:>6} {report.fn:>6} "
            f"{report.inkb_excluded_gold:>6}"
        )
    if len(reports) > 1:
        avg = sum(r.micro_f1 for r in reports.values()) / len(reports)
        lines.append("-" * len(header))
        lines.append(f"{'Avg':<20} {'':>8} {'':>8} {avg:>8.4f}")
    return "\n".join(lines)
