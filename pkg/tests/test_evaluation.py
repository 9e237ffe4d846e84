"""Corpus loading, InKB filtering, strong matching, and micro metrics."""

from __future__ import annotations

import json
import random

import pytest

from linkforge.annotation import Annotation, MentionSpan
from linkforge.errors import DuplicateDocId, MalformedRecord, UnknownDocId
from linkforge.evaluation import evaluate, inkb_filter, load_corpus, match_strong
from linkforge.kb import KBDictionary
from oracles import brute_force_counts, brute_force_micro

TEXT = "aaaa bbbb cccc dddd eeee ffff"


def kb_of(uris: list[str]) -> KBDictionary:
    return KBDictionary({f"Title {i}": uri for i, uri in enumerate(uris)})


def ann(start: int, end: int, uri: str | None) -> Annotation:
    return Annotation(MentionSpan.from_text(TEXT, start, end), None, uri)


def write_corpus(path, records):
    path.write_text(
        "".join(json.dumps(r) + "\n" for r in records), encoding="utf-8"
    )
    return path


class TestLoadCorpus:
    def test_valid_corpus(self, tmp_path):
        corpus = load_corpus(write_corpus(tmp_path / "c.jsonl", [
            {"id": "a", "text": TEXT, "gold": [{"start": 0, "end": 4, "uri": "u1"}]},
            {"id": "b", "text": TEXT, "gold": [{"start": 5, "end": 9, "uri": None}]},
        ]))
        assert len(corpus.docs) == 2
        assert corpus.gold["a"][0].uri == "u1"
        assert corpus.gold["b"][0].uri is None
        assert corpus.gold["a"][0].span.surface == "aaaa"

    def test_empty_file_is_valid(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("", encoding="utf-8")
        assert load_corpus(path).docs == ()

    def test_reversed_offsets_rejected(self, tmp_path):
        path = write_corpus(tmp_path / "c.jsonl", [
            {"id": "a", "text": TEXT, "gold": [{"start": 4, "end": 0, "uri": "u"}]},
        ])
        with pytest.raises(MalformedRecord) as exc:
            load_corpus(path)
        assert exc.value.line == 1
        assert "a" in str(exc.value)

    def test_duplicate_doc_id_rejected(self, tmp_path):
        path = write_corpus(tmp_path / "c.jsonl", [
            {"id": "a", "text": TEXT, "gold": []},
            {"id": "a", "text": TEXT, "gold": []},
        ])
        with pytest.raises(DuplicateDocId):
            load_corpus(path)

    def test_invalid_json_line_number(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "a", "text": "x", "gold": []}\nnot json\n', encoding="utf-8")
        with pytest.raises(MalformedRecord) as exc:
            load_corpus(path)
        assert exc.value.line == 2


class TestInKbFilter:
    def test_null_uri_excluded(self, tmp_path):
        corpus = load_corpus(write_corpus(tmp_path / "c.jsonl", [
            {"id": "a", "text": TEXT, "gold": [
                {"start": 0, "end": 4, "uri": "u1"},
                {"start": 5, "end": 9, "uri": None},
            ]},
        ]))
        filtered, excluded = inkb_filter(corpus, kb_of(["u1"]))
        assert excluded == 1
        assert [a.uri for a in filtered.gold["a"]] == ["u1"]

    def test_all_in_kb_unchanged(self, tmp_path):
        corpus = load_corpus(write_corpus(tmp_path / "c.jsonl", [
            {"id": "a", "text": TEXT, "gold": [{"start": 0, "end": 4, "uri": "u1"}]},
        ]))
        filtered, excluded = inkb_filter(corpus, kb_of(["u1"]))
        assert excluded == 0
        assert filtered.gold == corpus.gold

    def test_unknown_uri_excluded(self, tmp_path):
        corpus = load_corpus(write_corpus(tmp_path / "c.jsonl", [
            {"id": "a", "text": TEXT, "gold": [{"start": 0, "end": 4, "uri": "mystery"}]},
        ]))
        filtered, excluded = inkb_filter(corpus, kb_of(["u1"]))
        assert excluded == 1
        assert filtered.gold["a"] == []


class TestMatchStrong:
    def test_identical_lists(self):
        gold = [ann(0, 4, "u1"), ann(5, 9, "u2"), ann(10, 14, "u3"), ann(15, 19, "u4")]
        assert match_strong(gold, list(gold)) == (4, 0, 0)

    def test_partial_overlap(self):
        gold = [ann(0, 4, "u1"), ann(5, 9, "u2"), ann(10, 14, "u3"), ann(15, 19, "u4")]
        pred = [ann(0, 4, "u1"), ann(5, 9, "u2"), ann(20, 24, "u9")]
        assert match_strong(gold, pred) == (2, 1, 2)

    def test_correct_span_wrong_uri_counts_both_ways(self):
        gold = [ann(0, 4, "u1")]
        pred = [ann(0, 4, "u2")]
        assert match_strong(gold, pred) == (0, 1, 1)


class TestEvaluate:
    @pytest.fixture
    def corpus(self, tmp_path):
        return load_corpus(write_corpus(tmp_path / "c.jsonl", [
            {"id": "A", "text": TEXT, "gold": [
                {"start": 0, "end": 4, "uri": "u1"},
                {"start": 5, "end": 9, "uri": "u2"},
            ]},
            {"id": "B", "text": TEXT, "gold": [
                {"start": 0, "end": 4, "uri": "u1"},
                {"start": 5, "end": 9, "uri": "u2"},
                {"start": 10, "end": 14, "uri": "u3"},
                {"start": 15, "end": 19, "uri": "u4"},
            ]},
        ]))

    def test_worked_micro_example(self, corpus):
        # Doc A perfect (2,0,0); doc B (2,1,2).
        predictions = {
            "A": [ann(0, 4, "u1"), ann(5, 9, "u2")],
            "B": [ann(0, 4, "u1"), ann(5, 9, "u2"), ann(20, 24, "u9")],
        }
        report = evaluate(corpus, predictions, kb_of(["u1", "u2", "u3", "u4"]))
        assert (report.tp, report.fp, report.fn) == (4, 1, 2)
        assert report.micro_precision == pytest.approx(4 / 5, abs=1e-12)
        assert report.micro_recall == pytest.approx(4 / 6, abs=1e-12)
        assert abs(report.micro_f1 - 8 / 11) < 1e-9
        p, r = report.micro_precision, report.micro_recall
        assert report.micro_f1 == pytest.approx(2 * p * r / (p + r), abs=1e-12)

    def test_empty_predictions(self, corpus):
        report = evaluate(corpus, {}, kb_of(["u1", "u2", "u3", "u4"]))
        assert report.micro_precision == 0.0
        assert report.micro_recall == 0.0
        assert report.micro_f1 == 0.0
        assert report.fn == 6

    def test_perfect_predictions(self, corpus):
        predictions = {doc.id: list(corpus.gold[doc.id]) for doc in corpus.docs}
        report = evaluate(corpus, predictions, kb_of(["u1", "u2", "u3", "u4"]))
        assert report.micro_f1 == 1.0

    def test_unknown_doc_id(self, corpus):
        with pytest.raises(UnknownDocId):
            evaluate(corpus, {"nope": []}, kb_of(["u1"]))

    def test_permutation_invariance(self, tmp_path, corpus):
        predictions = {
            "A": [ann(0, 4, "u1")],
            "B": [ann(5, 9, "u2"), ann(10, 14, "u3")],
        }
        kb = kb_of(["u1", "u2", "u3", "u4"])
        report = evaluate(corpus, predictions, kb)
        reversed_corpus = load_corpus(write_corpus(tmp_path / "r.jsonl", [
            {"id": "B", "text": TEXT, "gold": [
                {"start": s, "end": e, "uri": u}
                for s, e, u in [(0, 4, "u1"), (5, 9, "u2"), (10, 14, "u3"), (15, 19, "u4")]
            ]},
            {"id": "A", "text": TEXT, "gold": [
                {"start": 0, "end": 4, "uri": "u1"}, {"start": 5, "end": 9, "uri": "u2"},
            ]},
        ]))
        flipped = evaluate(reversed_corpus, predictions, kb)
        assert (flipped.tp, flipped.fp, flipped.fn) == (report.tp, report.fp, report.fn)
        assert flipped.micro_f1 == report.micro_f1

    def test_monotonicity(self, corpus):
        kb = kb_of(["u1", "u2", "u3", "u4"])
        predictions = {"A": [ann(0, 4, "u1")]}
        base = evaluate(corpus, predictions, kb)
        more_correct = evaluate(
            corpus, {"A": [ann(0, 4, "u1"), ann(5, 9, "u2")]}, kb
        )
        assert more_correct.micro_f1 >= base.micro_f1
        more_wrong = evaluate(
            corpus, {"A": [ann(0, 4, "u1"), ann(20, 24, "u9")]}, kb
        )
        assert more_wrong.micro_precision <= base.micro_precision

    def test_against_brute_force_oracle(self, tmp_path):
        rng = random.Random(4242)
        uri_pool = [f"u{i}" for i in range(8)]
        kb = kb_of(uri_pool[:5])
        for trial in range(60):
            starts = list(range(0, 25, 5))
            records = []
            gold_by_doc = {}
            pred_by_doc = {}
            for d in range(rng.randint(1, 4)):
                doc_id = f"doc{d}"
                gold = []
                for s in rng.sample(starts, rng.randint(0, 5)):
                    gold.append((s, s + 4, rng.choice(uri_pool + [None])))
                records.append({
                    "id": doc_id, "text": TEXT,
                    "gold": [{"start": s, "end": e, "uri": u} for s, e, u in gold],
                })
                pred = []
                for s in rng.sample(starts, rng.randint(0, 5)):
                    pred.append((s, s + 4, rng.choice(uri_pool)))
                pred_by_doc[doc_id] = [ann(s, e, u) for s, e, u in pred]
                in_kb = {u for u in uri_pool[:5]}
                gold_by_doc[doc_id] = [
                    (s, e, u) for s, e, u in gold if u is not None and u in in_kb
                ]
            corpus = load_corpus(write_corpus(tmp_path / f"t{trial}.jsonl", records))
            report = evaluate(corpus, pred_by_doc, kb)
            per_doc = [
                brute_force_counts(
                    gold_by_doc[doc_id],
                    [a.triple() for a in pred_by_doc[doc_id]],
                )
                for doc_id in gold_by_doc
            ]
            precision, recall, f1 = brute_force_micro(per_doc)
            assert report.tp == sum(c[0] for c in per_doc)
            assert report.fp == sum(c[1] for c in per_doc)
            assert report.fn == sum(c[2] for c in per_doc)
            assert report.micro_precision == float(precision)
            assert report.micro_recall == float(recall)
            assert report.micro_f1 == float(f1)
