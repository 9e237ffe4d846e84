"""Annotation web service behavior, via the in-process test client."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from conftest import ANGELINA_OFFSETS, ANGELINA_TEXT, ANGELINA_TITLES, write_joint_config
from linkforge.pipeline import PipelineConfig
from linkforge.service import create_app


@pytest.fixture
def client(tmp_path) -> TestClient:
    config_path = write_joint_config(tmp_path)
    config = PipelineConfig.from_file(config_path)
    return TestClient(create_app(config))


class TestAnnotateEndpoint:
    def test_worked_example(self, client):
        response = client.post("/annotate", json={"text": ANGELINA_TEXT})
        assert response.status_code == 200
        body = response.json()
        assert [
            ((a["start"], a["end"]), a["title"]) for a in body["annotations"]
        ] == list(zip(ANGELINA_OFFSETS, ANGELINA_TITLES))
        assert all(a["uri"] for a in body["annotations"])
        assert isinstance(body["diagnostics"], list)

    def test_byte_identical_responses(self, client):
        payload = {"text": ANGELINA_TEXT}
        first = client.post("/annotate", json=payload)
        second = client.post("/annotate", json=payload)
        assert first.content == second.content

    def test_empty_object_is_400(self, client):
        assert client.post("/annotate", json={}).status_code == 400

    def test_non_json_body_is_400(self, client):
        response = client.post(
            "/annotate", content=b"not json", headers={"Content-Type": "application/json"}
        )
        assert response.status_code == 400

    def test_wrong_text_type_is_400(self, client):
        assert client.post("/annotate", json={"text": 42}).status_code == 400

    def test_unknown_mode_is_400(self, client):
        response = client.post("/annotate", json={"text": "x", "mode": "psychic"})
        assert response.status_code == 400

    def test_reserved_tag_token_in_text_is_400(self, client):
        response = client.post("/annotate", json={"text": "sneaky [BEGIN_ENT] injection"})
        assert response.status_code == 400

    def test_mode_without_backend_is_400(self, client):
        response = client.post(
            "/annotate", json={"text": "x", "mode": "external-ner"}
        )
        assert response.status_code == 400

    def test_dead_backend_is_503(self, tmp_path):
        write_joint_config(tmp_path)
        config_data = {
            "mode": "joint",
            "dictionary": "titles.tsv",
            "backends": {"seq2seq": {
                "kind": "seq2seq", "endpoint": "http://127.0.0.1:9",
                "timeout": 0.3, "max_retries": 0,
            }},
        }
        path = tmp_path / "dead.json"
        path.write_text(json.dumps(config_data), encoding="utf-8")
        client = TestClient(create_app(PipelineConfig.from_file(path)))
        response = client.post("/annotate", json={"text": ANGELINA_TEXT})
        assert response.status_code == 503
        assert response.json()["diagnostics"]


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}
