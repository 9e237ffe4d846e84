"""Model hosting and generation.

One lock per hosted model serializes generation; the wire contract makes
no ordering promises, so a simple queue discipline is fine. Greedy and
temperature-0 decoding paths are deterministic run to run.
"""

from __future__ import annotations

import logging
import threading

import torch

from linkforge_server.config import ServerConfig
from linkforge_server.ner import build_tagger

logger = logging.getLogger(__name__)


class _HostedModel:
    def __init__(self, model_path: str, device: str):
        from transformers import AutoConfig, AutoModelForCausalLM, AutoModelForSeq2SeqLM, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        config = AutoConfig.from_pretrained(model_path)
        self.is_encoder_decoder = bool(getattr(config, "is_encoder_decoder", False))
        loader = AutoModelForSeq2SeqLM if self.is_encoder_decoder else AutoModelForCausalLM
        self.model = loader.from_pretrained(model_path).to(device).eval()
        self.device = device
        self.lock = threading.Lock()

    @torch.no_grad()
    def generate(self, text: str, max_new_tokens: int, num_beams: int = 1,
                 temperature: float = 0.0) -> str:
        encoded = self.tokenizer(text, return_tensors="pt", truncation=True,
                                 max_length=1024).to(self.device)
        kwargs: dict = {"max_new_tokens": max_new_tokens, "num_beams": num_beams}
        if temperature > 0:
            kwargs.update(do_sample=True, temperature=temperature)
        else:
            kwargs.update(do_sample=False)
        with self.lock:
            output = self.model.generate(**encoded, **kwargs)
        tokens = output[0]
        if not self.is_encoder_decoder:
            tokens = tokens[encoded["input_ids"].shape[1]:]  # strip the echoed prompt
        return self.tokenizer.decode(tokens, skip_special_tokens=True)


class ModelHost:
    """Loads the configured model sections and answers generation calls."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.seq2seq: _HostedModel | None = None
        self.chat: _HostedModel | None = None
        self.tagger = None
        if config.seq2seq is not None:
            logger.info("loading seq2seq model from %s", config.seq2seq.model)
            self.seq2seq = _HostedModel(config.seq2seq.model, config.device)
        if config.chat is not None:
            if config.seq2seq is not None and config.chat.model == config.seq2seq.model:
                self.chat = self.seq2seq  # share weights when both point at one checkpoint
            else:
                logger.info("loading chat model from %s", config.chat.model)
                self.chat = _HostedModel(config.chat.model, config.device)
        if config.ner is not None:
            self.tagger = build_tagger(config.ner.tagger, config.device)

    def run_task(self, task: str, text: str, max_new_tokens: int | None) -> str:
        assert self.seq2seq is not None and self.config.seq2seq is not None
        budget = max_new_tokens or self.config.seq2seq.max_new_tokens
        budget = min(budget, 4096)
        return self.seq2seq.generate(
            text, budget, num_beams=self.config.seq2seq.beam_size
        )

    def run_chat(self, prompt: str, temperature: float, max_new_tokens: int | None) -> str:
        assert self.chat is not None and self.config.chat is not None
        budget = max_new_tokens or self.config.chat.max_new_tokens
        budget = min(budget, 4096)
        return self.chat.generate(prompt, budget, temperature=temperature)

    def run_ner(self, text: str) -> list[dict]:
        assert self.tagger is not None
        return self.tagger(text)
