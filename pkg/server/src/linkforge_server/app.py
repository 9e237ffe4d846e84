"""FastAPI application implementing the backend wire contract.

    POST /v1/generate  {"task": "ner"|"ed"|"e2e", "input": str, "max_new_tokens": int}
                       -> {"output": str}
    POST /v1/chat      {"prompt": str, "temperature": num, "max_new_tokens": int}
                       -> {"text": str}
    POST /v1/ner       {"text": str} -> {"spans": [{"start", "end", "surface"}]}
    GET  /health       -> {"status": "ok"}

Schema violations answer 400; endpoints whose model section is absent or
still loading answer 503. Offsets are Unicode code points.
"""

from __future__ import annotations

import logging
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from linkforge_server.config import ServerConfig
from linkforge_server.engine import ModelHost

logger = logging.getLogger(__name__)

TASKS = ("ner", "ed", "e2e")


def create_app(config: ServerConfig, preload: bool = True) -> FastAPI:
    app = FastAPI(title="linkforge-server", docs_url=None, redoc_url=None)
    state: dict = {"host": None}
    ready = threading.Event()

    def load() -> None:
        state["host"] = ModelHost(config)
        ready.set()

    if preload:
        load()
    else:
        threading.Thread(target=load, daemon=True).start()

    def bad_request(message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=400)

    def unavailable(message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=503)

    async def read_object(request: Request) -> dict | JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return bad_request("body is not valid JSON")
        if not isinstance(body, dict):
            return bad_request("body must be a JSON object")
        return body

    def optional_budget(body: dict):
        value = body.get("max_new_tokens")
        if value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
            return bad_request("'max_new_tokens' must be a positive integer")
        return value

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/v1/generate")
    async def generate(request: Request):
        body = await read_object(request)
        if isinstance(body, JSONResponse):
            return body
        task = body.get("task")
        text = body.get("input")
        if task not in TASKS:
            return bad_request(f"'task' must be one of {list(TASKS)}")
        if not isinstance(text, str) or not text:
            return bad_request("'input' must be a non-empty string")
        budget = optional_budget(body)
        if isinstance(budget, JSONResponse):
            return budget
        if not ready.is_set():
            return unavailable("models are still loading")
        host: ModelHost = state["host"]
        if host.seq2seq is None:
            return unavailable("no seq2seq model configured")
        return JSONResponse({"output": host.run_task(task, text, budget)})

    @app.post("/v1/chat")
    async def chat(request: Request):
        body = await read_object(request)
        if isinstance(body, JSONResponse):
            return body
        prompt = body.get("prompt")
        if not isinstance(prompt, str) or not prompt:
            return bad_request("'prompt' must be a non-empty string")
        temperature = body.get("temperature", 0.0)
        if isinstance(temperature, bool) or not isinstance(temperature, (int, float)) \
                or temperature < 0:
            return bad_request("'temperature' must be a non-negative number")
        budget = optional_budget(body)
        if isinstance(budget, JSONResponse):
            return budget
        if not ready.is_set():
            return unavailable("models are still loading")
        host: ModelHost = state["host"]
        if host.chat is None:
            return unavailable("no chat model configured")
        return JSONResponse({"text": host.run_chat(prompt, float(temperature), budget)})

    @app.post("/v1/ner")
    async def ner(request: Request):
        body = await read_object(request)
        if isinstance(body, JSONResponse):
            return body
        text = body.get("text")
        if not isinstance(text, str):
            return bad_request("'text' must be a string")
        if not ready.is_set():
            return unavailable("models are still loading")
        host: ModelHost = state["host"]
        if host.tagger is None:
            return unavailable("no NER tagger configured")
        return JSONResponse({"spans": host.run_ner(text)})

    return app
