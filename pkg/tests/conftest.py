"""Shared fixtures: the worked example, mock backends, and fixture files."""

from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from linkforge.annotation import Annotation, Document, MentionSpan

ANGELINA_TEXT = "Angelina met her partner Brad and her father Jon in AK"
ANGELINA_OFFSETS = [(0, 8), (25, 29), (45, 48), (52, 54)]
ANGELINA_TITLES = ["Angelina Jolie", "Brad Pitt", "Jon Voight", "Alaska"]

NER_TAGGED = (
    "[BEGIN_ENT] Angelina [END_ENT] met her partner [BEGIN_ENT] Brad [END_ENT] "
    "and her father [BEGIN_ENT] Jon [END_ENT] in [BEGIN_ENT] AK [END_ENT]"
)

EXPANDED_TEXT = "Angelina Jolie met her partner Brad and her father Jon in Alaska"

# The disambiguation pass sees the expanded text re-encoded with tags.
ED_INPUT_TAGGED = (
    "[BEGIN_ENT] Angelina Jolie [END_ENT] met her partner [BEGIN_ENT] Brad [END_ENT] "
    "and her father [BEGIN_ENT] Jon [END_ENT] in [BEGIN_ENT] Alaska [END_ENT]"
)

ED_OUTPUT_TAGGED = (
    "[BEGIN_ENT] Angelina Jolie [END_ENT] [Angelina Jolie] met her partner "
    "[BEGIN_ENT] Brad [END_ENT] [Brad Pitt] and her father "
    "[BEGIN_ENT] Jon [END_ENT] [Jon Voight] in [BEGIN_ENT] Alaska [END_ENT] [Alaska]"
)

# Disambiguation output over the original (unexpanded) sentence.
ED_OUTPUT_UNEXPANDED = (
    "[BEGIN_ENT] Angelina [END_ENT] [Angelina Jolie] met her partner "
    "[BEGIN_ENT] Brad [END_ENT] [Brad Pitt] and her father "
    "[BEGIN_ENT] Jon [END_ENT] [Jon Voight] in [BEGIN_ENT] AK [END_ENT] [Alaska]"
)

# Pinned literal of the per-document expansion prompt for the sentence.
EXPANSION_PROMPT = (
    "Expand the following entity mentions 'Angelina', 'Brad', 'Jon', 'AK' "
    "based on the context.\n"
    "Context: 'Angelina met her partner Brad and her father Jon in AK'\n"
    "Answer with one unformatted JSON object mapping each mention to its "
    "expansion. Do not format the json output."
)

EXPANSION_REPLY = '{"Angelina": "Angelina Jolie", "AK": "Alaska"}'

URIS = {
    "Angelina Jolie": "https://en.wikipedia.org/wiki/Angelina_Jolie",
    "Brad Pitt": "https://en.wikipedia.org/wiki/Brad_Pitt",
    "Jon Voight": "https://en.wikipedia.org/wiki/Jon_Voight",
    "Alaska": "https://en.wikipedia.org/wiki/Alaska",
}


@pytest.fixture
def angelina_doc() -> Document:
    return Document("angelina", ANGELINA_TEXT)


@pytest.fixture
def angelina_spans() -> list[MentionSpan]:
    return [MentionSpan.from_text(ANGELINA_TEXT, s, e) for s, e in ANGELINA_OFFSETS]


@pytest.fixture
def angelina_annotations(angelina_spans) -> list[Annotation]:
    return [Annotation(span, title) for span, title in zip(angelina_spans, ANGELINA_TITLES)]


@pytest.fixture
def dictionary_file(tmp_path: Path) -> Path:
    path = tmp_path / "titles.tsv"
    path.write_text(
        "".join(f"{title}\t{uri}\n" for title, uri in URIS.items()),
        encoding="utf-8",
    )
    return path


def write_joint_config(
    tmp_path: Path,
    ed_output: str = ED_OUTPUT_TAGGED,
    mention_expansion: bool = True,
) -> Path:
    """Materialize mock fixtures + config for the joint-mode worked example."""
    seq2seq = {
        f"ner::{ANGELINA_TEXT} target_ner": NER_TAGGED,
        f"ed::{ED_INPUT_TAGGED} target_el": ed_output,
        # Unexpanded variant, for runs with augmentation disabled or degraded.
        f"ed::{NER_TAGGED} target_el": ED_OUTPUT_UNEXPANDED,
    }
    chat = {EXPANSION_PROMPT: EXPANSION_REPLY}
    (tmp_path / "seq2seq.json").write_text(json.dumps(seq2seq), encoding="utf-8")
    (tmp_path / "chat.json").write_text(json.dumps(chat), encoding="utf-8")
    dict_path = tmp_path / "titles.tsv"
    if not dict_path.exists():
        dict_path.write_text(
            "".join(f"{title}\t{uri}\n" for title, uri in URIS.items()),
            encoding="utf-8",
        )
    config = {
        "mode": "joint",
        "mention_expansion": mention_expansion,
        "ner_expansion": False,
        "dictionary": "titles.tsv",
        "backends": {
            "seq2seq": {"kind": "mock", "fixture": "seq2seq.json"},
            "chat": {"kind": "mock", "fixture": "chat.json"},
        },
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return config_path


@pytest.fixture
def joint_config(tmp_path: Path) -> Path:
    return write_joint_config(tmp_path)


class StubScript:
    """Programmable responses for the stub HTTP server, plus a request log."""

    def __init__(self):
        self.responses: list[tuple[int, object]] = []
        self.requests: list[dict] = []
        self.delay = 0.0
        self.endpoint = ""

    def next_response(self) -> tuple[int, object]:
        if len(self.responses) > 1:
            return self.responses.pop(0)
        return self.responses[0]


@pytest.fixture
def stub_server():
    script = StubScript()

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            script.requests.append({"path": self.path, "body": body})
            if script.delay:
                import time

                time.sleep(script.delay)
            status, payload = script.next_response()
            data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
            try:
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
            except (BrokenPipeError, ConnectionResetError):
                pass  # client gave up (timeout tests)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    script.endpoint = f"http://127.0.0.1:{server.server_address[1]}"
    yield script
    server.shutdown()
