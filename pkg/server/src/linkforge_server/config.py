"""Server configuration: model sections and decoding settings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Seq2SeqSection:
    model: str
    beam_size: int = 5
    max_new_tokens: int = 256


@dataclass(frozen=True)
class ChatSection:
    model: str
    max_new_tokens: int = 256


@dataclass(frozen=True)
class NerSection:
    tagger: str = "capitalized"


@dataclass(frozen=True)
class ServerConfig:
    """At least one model section must be present."""

    seq2seq: Seq2SeqSection | None = None
    chat: ChatSection | None = None
    ner: NerSection | None = None
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.seq2seq is None and self.chat is None and self.ner is None:
            raise ValueError("server config needs at least one model section")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ServerConfig":
        def resolve(model: str) -> str:
            path = Path(model)
            if base_dir is not None and not path.is_absolute() and (base_dir / path).exists():
                return str(base_dir / path)
            return model

        seq2seq = None
        if "seq2seq" in data:
            section = data["seq2seq"]
            seq2seq = Seq2SeqSection(
                model=resolve(section["model"]),
                beam_size=int(section.get("beam_size", 5)),
                max_new_tokens=int(section.get("max_new_tokens", 256)),
            )
        chat = None
        if "chat" in data:
            section = data["chat"]
            chat = ChatSection(
                model=resolve(section["model"]),
                max_new_tokens=int(section.get("max_new_tokens", 256)),
            )
        ner = None
        if "ner" in data:
            ner = NerSection(tagger=data["ner"].get("tagger", "capitalized"))
        return cls(seq2seq=seq2seq, chat=chat, ner=ner, device=data.get("device", "cpu"))

    @classmethod
    def from_file(cls, path: str | Path) -> "ServerConfig":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data, base_dir=path.parent)
