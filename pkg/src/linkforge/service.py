"""Annotation web service: the benchmark-facing JSON endpoint.

    POST /annotate  {"text": str, "mode": optional str}
                    -> {"annotations": [{"start", "end", "surface", "title",
                        "uri"}], "diagnostics": [...]}
    GET  /health    -> {"status": "ok"}

Malformed bodies get 400; unreachable backends get 503 with a diagnostic
body. Requests are served independently over shared read-only state.
"""

from __future__ import annotations

import dataclasses
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from linkforge.annotation import Document
from linkforge.errors import BackendUnavailable, ConfigError, TagTokenInText
from linkforge.pipeline import MODES, Pipeline, PipelineConfig

logger = logging.getLogger(__name__)


def create_app(config: PipelineConfig, pipeline: Pipeline | None = None) -> FastAPI:
    app = FastAPI(title="linkforge", docs_url=None, redoc_url=None)
    base = pipeline if pipeline is not None else Pipeline.from_config(config)
    # One pipeline per requested mode, sharing the dictionary.
    pipelines: dict[str, Pipeline] = {config.mode: base}

    def pipeline_for(mode: str) -> Pipeline:
        if mode not in pipelines:
            variant = dataclasses.replace(config, mode=mode)
            variant.validate()
            pipelines[mode] = Pipeline(variant, base.dictionary)
        return pipelines[mode]

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/annotate")
    async def annotate(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("text"), str) or not body["text"]:
            return JSONResponse(
                {"error": "body must be an object with a non-empty string 'text'"},
                status_code=400,
            )
        mode = body.get("mode", config.mode)
        if mode not in MODES:
            return JSONResponse({"error": f"unknown mode {mode!r}"}, status_code=400)
        try:
            worker = pipeline_for(mode)
        except ConfigError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        try:
            doc = Document("request", body["text"])
        except TagTokenInText as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        try:
            linked = worker.run(doc)
        except BackendUnavailable as exc:
            logger.warning("backend unavailable: %s", exc)
            return JSONResponse(
                {"error": "backend unavailable", "diagnostics": [str(exc)]},
                status_code=503,
            )
        payload = linked.to_dict()
        return JSONResponse(
            {"annotations": payload["annotations"], "diagnostics": payload["diagnostics"]}
        )

    return app
