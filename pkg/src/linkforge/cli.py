"""Command-line frontend.

Exit codes: 0 success, 2 configuration/usage error, 3 backend failure,
4 malformed corpus or dump input.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import os
import sys
import tempfile
from pathlib import Path

import click

import linkforge
from linkforge.annotation import Annotation, Document
from linkforge.errors import (
    BackendUnavailable,
    ConfigError,
    DuplicateDocId,
    EmptyDictionary,
    LinkforgeError,
    MalformedRecord,
)
from linkforge.evaluation import EvalReport, evaluate, format_report_table, load_corpus
from linkforge.kb import load_dictionary, normalize_title
from linkforge.pipeline import Pipeline, PipelineConfig, build_training_samples

CONFIG_ENV_VAR = "LINKFORGE_CONFIG"

EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_INPUT = 4


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Immutable record of one evaluation run; reports reference it."""

    engine_version: str
    timestamp: str
    config: dict
    corpora: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "engine_version": self.engine_version,
            "timestamp": self.timestamp,
            "config": self.config,
            "corpora": list(self.corpora),
        }


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_pipeline(config_path: str | None) -> tuple[Pipeline, dict]:
    path = config_path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        raise click.UsageError(
            f"--config is required (or set {CONFIG_ENV_VAR})"
        )
    try:
        config = PipelineConfig.from_file(path)
        snapshot = json.loads(Path(path).read_text(encoding="utf-8"))
        return Pipeline.from_config(config), snapshot
    except (ConfigError, EmptyDictionary, OSError) as exc:
        _fail(str(exc), EXIT_CONFIG)
        raise AssertionError  # unreachable


def _write_atomic(path: Path, payload: str) -> None:
    # Never leave a partial report behind: write to a sibling temp file,
    # then rename into place.
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@click.group()
@click.version_option(linkforge.__version__)
def main() -> None:
    """Entity-linking pipeline engine and evaluation harness."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help=f"Pipeline config JSON (fallback: ${CONFIG_ENV_VAR}).")
@click.option("--text", default=None, help="Text to annotate.")
@click.option("--file", "file_path", type=click.Path(exists=True), default=None,
              help="Read the text from a file.")
def annotate(config_path: str | None, text: str | None, file_path: str | None) -> None:
    """Annotate one text and print the result as JSON."""
    pipeline, _ = _load_pipeline(config_path)
    if text is None and file_path is not None:
        text = Path(file_path).read_text(encoding="utf-8")
    if text is None:
        text = click.get_text_stream("stdin").read()
    try:
        doc = Document("cli", text)
        linked = pipeline.run(doc)
    except BackendUnavailable as exc:
        _fail(str(exc), EXIT_BACKEND)
        raise AssertionError
    except LinkforgeError as exc:
        _fail(str(exc), EXIT_CONFIG)
        raise AssertionError
    click.echo(json.dumps(linked.to_dict(), indent=2, ensure_ascii=False))


@main.command(name="evaluate")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help=f"Pipeline config JSON (fallback: ${CONFIG_ENV_VAR}).")
@click.option("--corpus", "corpora", type=click.Path(exists=True), multiple=True,
              required=True, help="Gold corpus JSONL; repeatable.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the JSON report (with run manifest) here.")
def evaluate_cmd(config_path: str | None, corpora: tuple[str, ...],
                 out_path: str | None) -> None:
    """Run the pipeline over gold corpora and report InKB micro P/R/F1."""
    pipeline, snapshot = _load_pipeline(config_path)
    reports: dict[str, EvalReport] = {}
    for corpus_path in corpora:
        try:
            corpus = load_corpus(corpus_path)
        except (MalformedRecord, DuplicateDocId, ValueError) as exc:
            _fail(f"{corpus_path}: {exc}", EXIT_INPUT)
            raise AssertionError
        if corpus.name in reports:  # same file stem passed twice
            corpus = dataclasses.replace(corpus, name=f"{corpus.name}#{len(reports)}")
        predictions: dict[str, list[Annotation]] = {}
        try:
            for doc in corpus.docs:
                predictions[doc.id] = list(pipeline.run(doc).annotations)
        except BackendUnavailable as exc:
            _fail(str(exc), EXIT_BACKEND)
            raise AssertionError
        report = evaluate(corpus, predictions, pipeline.dictionary)
        reports[corpus.name] = report
        click.echo(
            f"{corpus.name}: micro-P {report.micro_precision:.3f} "
            f"micro-R {report.micro_recall:.3f} micro-F1 {report.micro_f1:.3f}"
        )
    if len(reports) > 1:
        average = sum(r.micro_f1 for r in reports.values()) / len(reports)
        click.echo(f"Avg micro-F1 {average:.3f}")
    click.echo(format_report_table(reports))

    if out_path is not None:
        manifest = RunManifest(
            engine_version=linkforge.__version__,
            timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
            config=snapshot,
            corpora=tuple(reports),
        )
        payload = {
            "manifest": manifest.to_dict(),
            "datasets": {name: report.to_dict() for name, report in reports.items()},
        }
        if len(reports) > 1:
            payload["average_micro_f1"] = sum(
                r.micro_f1 for r in reports.values()
            ) / len(reports)
        _write_atomic(Path(out_path), json.dumps(payload, indent=2, ensure_ascii=False))


@main.command(name="build-trainset")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--dictionary", "dict_path", type=click.Path(exists=True), default=None,
              help="Resolve gold titles from URIs via this TSV when absent.")
def build_trainset(corpus_path: str, out_path: str, dict_path: str | None) -> None:
    """Convert a gold corpus into joint fine-tuning samples (JSONL)."""
    try:
        corpus = load_corpus(corpus_path)
    except (MalformedRecord, DuplicateDocId, ValueError) as exc:
        _fail(f"{corpus_path}: {exc}", EXIT_INPUT)
        raise AssertionError

    title_by_uri: dict[str, str] = {}
    if dict_path is not None:
        try:
            dictionary = load_dictionary(dict_path)
        except (EmptyDictionary, OSError) as exc:
            _fail(str(exc), EXIT_CONFIG)
            raise AssertionError
        for title, uri in dictionary.items():
            title_by_uri.setdefault(uri, title)

    lines: list[str] = []
    for doc in corpus.docs:
        gold: list[Annotation] = []
        for ann in corpus.gold[doc.id]:
            title = ann.title
            if title is None and ann.uri is not None:
                title = title_by_uri.get(ann.uri)
            if title is None:
                _fail(
                    f"doc {doc.id!r}: gold span [{ann.span.start},{ann.span.end}) "
                    "has no title (provide one or pass --dictionary)",
                    EXIT_INPUT,
                )
                raise AssertionError
            gold.append(Annotation(ann.span, title, ann.uri))
        try:
            samples = build_training_samples(doc, gold)
        except LinkforgeError as exc:
            _fail(f"doc {doc.id!r}: {exc}", EXIT_INPUT)
            raise AssertionError
        for sample in samples:
            lines.append(json.dumps(
                {"input": sample.input, "target": sample.target, "task": sample.task},
                ensure_ascii=False,
            ))
    _write_atomic(Path(out_path), "".join(line + "\n" for line in lines))
    click.echo(f"wrote {len(lines)} sample(s) to {out_path}")


@main.group()
def kb() -> None:
    """Knowledge-base dictionary utilities."""


@kb.command(name="build")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="Raw dump: one 'title<TAB>uri' record per line.")
@click.option("--out", "out_path", type=click.Path(), required=True)
def kb_build(input_path: str, out_path: str) -> None:
    """Validate and deduplicate a raw title dump into the canonical TSV."""
    entries: dict[str, str] = {}
    duplicates = 0
    malformed = 0
    with open(input_path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            title, sep, uri = line.partition("\t")
            if not sep or not title or not uri:
                malformed += 1
                continue
            key = normalize_title(title)
            if key in entries:
                duplicates += 1
                continue
            entries[key] = uri
    if not entries:
        _fail(f"{input_path}: no valid title/uri records", EXIT_INPUT)
        raise AssertionError
    _write_atomic(
        Path(out_path),
        "".join(f"{title}\t{uri}\n" for title, uri in entries.items()),
    )
    click.echo(
        f"wrote {len(entries)} title(s) to {out_path} "
        f"({duplicates} duplicate(s) dropped, {malformed} malformed line(s) skipped)"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help=f"Pipeline config JSON (fallback: ${CONFIG_ENV_VAR}).")
@click.option("--listen", default="127.0.0.1:8765", show_default=True,
              help="host:port to bind.")
def serve(config_path: str | None, listen: str) -> None:
    """Serve the annotation endpoint (POST /annotate, GET /health)."""
    import uvicorn

    from linkforge.service import create_app

    pipeline, _ = _load_pipeline(config_path)
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError("--listen must look like host:port")
    app = create_app(pipeline.config, pipeline)
    uvicorn.run(app, host=host, port=int(port_text))


if __name__ == "__main__":
    main()
