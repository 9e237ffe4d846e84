from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from linkforge_server.app import create_app
from linkforge_server.config import ServerConfig
from linkforge_server.finetune import init_tiny_model

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> Path:
    """Untrained tiny byte-level seq2seq, enough for wire-contract checks."""
    out = tmp_path_factory.mktemp("ckpt") / "tiny"
    tokenizer, model = init_tiny_model()
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return out


@pytest.fixture(scope="session")
def contract_client(tiny_checkpoint) -> TestClient:
    config = ServerConfig.from_dict({
        "seq2seq": {"model": str(tiny_checkpoint), "beam_size": 1, "max_new_tokens": 32},
        "chat": {"model": str(tiny_checkpoint), "max_new_tokens": 32},
        "ner": {"tagger": "capitalized"},
    })
    return TestClient(create_app(config))


def recorded_requests() -> list[dict]:
    return json.loads((DATA_DIR / "recorded_requests.json").read_text(encoding="utf-8"))
