"""Uniform client contract for generative backends.

One wire contract covers the fine-tuned seq2seq model, the chat LLM used
for augmentation, and external NER services:

    POST /v1/generate  {"task": "ner"|"ed"|"e2e", "input": str, "max_new_tokens": int}
                       -> {"output": str}
    POST /v1/chat      {"prompt": str, "temperature": num, "max_new_tokens": int}
                       -> {"text": str}
    POST /v1/ner       {"text": str} -> {"spans": [{"start", "end", "surface"}]}
    GET  /health       -> {"status": "ok"}

Offsets on the wire are Unicode code points. Transport failures (connect
errors, timeouts, 5xx) are retried with exponential backoff; contract
violations (bad body, 4xx) are not.

A deterministic mock backend reads a JSON fixture file mapping a request's
canonical form to its response string:

    generate  ->  "<task>::<input>"
    chat      ->  "<prompt>"
    ner       ->  "ner-service::<text>"   (response: JSON array of spans)
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import httpx

from linkforge.annotation import MentionSpan
from linkforge.errors import MockMiss, ProtocolError, Timeout, TransportError

logger = logging.getLogger(__name__)

KINDS = ("seq2seq", "chat", "ner-service", "mock")
TASKS = ("ner", "ed", "e2e")

BACKOFF_BASE_SECONDS = 0.25


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str = ""
    fixture: str | Path | None = None
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    max_new_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.kind == "mock" and self.fixture is None:
            raise ValueError("mock backend requires a fixture path")


@dataclass(frozen=True)
class GenerationRequest:
    task: str
    input: str

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not self.input:
            raise ValueError("generation input must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    prompt: str

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("chat prompt must be non-empty")


# --- mock fixtures -----------------------------------------------------------

_fixture_cache: dict[Path, tuple[float, dict[str, str]]] = {}


def _load_fixture(path: str | Path) -> dict[str, str]:
    path = Path(path)
    mtime = path.stat().st_mtime
    cached = _fixture_cache.get(path)
    if cached is not None and cached[0] == mtime:
        return cached[1]
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ProtocolError(f"mock fixture {path} must be a JSON object")
    _fixture_cache[path] = (mtime, data)
    return data


def _mock_lookup(cfg: BackendConfig, key: str) -> str:
    fixture = _load_fixture(cfg.fixture)
    if key not in fixture:
        raise MockMiss(f"no fixture entry for request {key!r}")
    return fixture[key]


# --- transport ---------------------------------------------------------------

def _request_json(cfg: BackendConfig, path: str, payload: dict[str, Any]) -> dict[str, Any]:
    url = cfg.endpoint.rstrip("/") + path
    attempt = 0
    while True:
        timed_out = False
        try:
            response = httpx.post(url, json=payload, timeout=cfg.timeout)
        except httpx.TimeoutException as exc:
            timed_out = True
            failure: Exception = exc
        except httpx.HTTPError as exc:
            failure = exc
        else:
            if response.status_code < 500:
                if response.status_code >= 400:
                    raise ProtocolError(
                        f"{url} rejected the request: HTTP {response.status_code}"
                    )
                try:
                    body = response.json()
                except ValueError as exc:
                    raise ProtocolError(f"{url} returned non-JSON body") from exc
                if not isinstance(body, dict):
                    raise ProtocolError(f"{url} returned a non-object body")
                return body
            failure = TransportError(f"{url} returned HTTP {response.status_code}")

        if attempt >= cfg.max_retries:
            if timed_out:
                raise Timeout(f"{url} timed out after {attempt + 1} attempt(s)") from failure
            raise TransportError(
                f"{url} unreachable after {attempt + 1} attempt(s): {failure}"
            ) from failure
        delay = BACKOFF_BASE_SECONDS * (2 ** attempt)
        logger.debug("retrying %s in %.2fs (%s)", url, delay, failure)
        time.sleep(delay)
        attempt += 1


def _require_field(body: dict[str, Any], name: str, url_hint: str) -> str:
    value = body.get(name)
    if not isinstance(value, str):
        raise ProtocolError(f"{url_hint} response missing string field {name!r}")
    return value


# --- operations --------------------------------------------------------------

def generate(cfg: BackendConfig, req: GenerationRequest) -> str:
    """Run the seq2seq backend on a task-suffixed input; returns raw output."""
    if cfg.kind == "mock":
        return _mock_lookup(cfg, f"{req.task}::{req.input}")
    if cfg.kind != "seq2seq":
        raise ValueError(f"generate requires a seq2seq backend, got {cfg.kind!r}")
    body = _request_json(
        cfg,
        "/v1/generate",
        {"task": req.task, "input": req.input, "max_new_tokens": cfg.max_new_tokens},
    )
    return _require_field(body, "output", "/v1/generate")


def chat(cfg: BackendConfig, req: ChatRequest) -> str:
    """Send an augmentation prompt to the chat backend; returns raw text."""
    if cfg.kind == "mock":
        return _mock_lookup(cfg, req.prompt)
    if cfg.kind != "chat":
        raise ValueError(f"chat requires a chat backend, got {cfg.kind!r}")
    body = _request_json(
        cfg,
        "/v1/chat",
        {"prompt": req.prompt, "temperature": cfg.temperature,
         "max_new_tokens": cfg.max_new_tokens},
    )
    return _require_field(body, "text", "/v1/chat")


def detect_mentions(
    cfg: BackendConfig,
    text: str,
    diagnostics: list[str] | None = None,
) -> list[MentionSpan]:
    """Call an external NER service and validate every returned span.

    Spans whose offsets or surface do not match the text are dropped.
    """
    sink = diagnostics if diagnostics is not None else []
    if not text:
        return []
    if cfg.kind == "mock":
        raw = _mock_lookup(cfg, f"ner-service::{text}")
        try:
            items = json.loads(raw)
        except ValueError as exc:
            raise ProtocolError("mock NER fixture is not valid JSON") from exc
    elif cfg.kind == "ner-service":
        body = _request_json(cfg, "/v1/ner", {"text": text})
        items = body.get("spans")
    else:
        raise ValueError(f"detect_mentions requires a ner-service backend, got {cfg.kind!r}")

    if not isinstance(items, list):
        raise ProtocolError("/v1/ner response missing list field 'spans'")
    spans: list[MentionSpan] = []
    for item in items:
        if not isinstance(item, dict):
            sink.append(f"NER service returned a non-object span: {item!r}")
            continue
        start, end, surface = item.get("start"), item.get("end"), item.get("surface")
        if (
            not isinstance(start, int)
            or not isinstance(end, int)
            or not isinstance(surface, str)
            or not (0 <= start < end <= len(text))
            or text[start:end] != surface
        ):
            sink.append(f"NER service span {item!r} does not match the text; dropped")
            logger.warning("dropping invalid NER span %r", item)
            continue
        spans.append(MentionSpan(start, end, surface))
    return spans


def health(cfg: BackendConfig) -> bool:
    """True when GET /health answers ``{"status": "ok"}``."""
    if cfg.kind == "mock":
        return True
    try:
        response = httpx.get(cfg.endpoint.rstrip("/") + "/health", timeout=cfg.timeout)
        return response.status_code == 200 and response.json().get("status") == "ok"
    except (httpx.HTTPError, ValueError):
        return False
