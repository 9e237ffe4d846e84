"""Fine-tuning on trainset JSONL files.

The trainset format is one sample per line: ``{"input": str, "target": str,
"task": "ner"|"ed"|"e2e"}``. NER and disambiguation samples are mixed in one
dataset so a single checkpoint is trained jointly for all tasks.

The sentinel base model ``tiny-random`` materializes a small randomly
initialized byte-level encoder-decoder, which keeps smoke-scale runs
self-contained (no downloads).
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import torch

logger = logging.getLogger(__name__)

TASKS = ("ner", "ed", "e2e")
TINY_RANDOM = "tiny-random"


class TrainsetError(ValueError):
    """Malformed trainset input; message carries the offending line."""


@dataclass(frozen=True)
class Sample:
    input: str
    target: str
    task: str


def load_trainset(path: str | Path) -> list[Sample]:
    samples: list[Sample] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise TrainsetError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise TrainsetError(f"line {lineno}: record is not an object")
            text = record.get("input")
            target = record.get("target")
            task = record.get("task")
            if not isinstance(text, str) or not text:
                raise TrainsetError(f"line {lineno}: missing or empty 'input'")
            if not isinstance(target, str):
                raise TrainsetError(f"line {lineno}: missing 'target'")
            if task not in TASKS:
                raise TrainsetError(f"line {lineno}: 'task' must be one of {list(TASKS)}")
            samples.append(Sample(text, target, task))
    if not samples:
        raise TrainsetError(f"{path}: trainset contains no samples")
    return samples


def init_tiny_model():
    """Small randomly initialized byte-level seq2seq (no downloads needed)."""
    from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration

    tokenizer = ByT5Tokenizer()
    config = T5Config(
        vocab_size=384,
        d_model=64,
        d_ff=128,
        d_kv=16,
        num_layers=2,
        num_heads=4,
        dropout_rate=0.0,
        decoder_start_token_id=0,
        pad_token_id=0,
        eos_token_id=1,
    )
    return tokenizer, T5ForConditionalGeneration(config)


def _load_base(base_model: str):
    if base_model == TINY_RANDOM:
        return init_tiny_model()
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    return AutoTokenizer.from_pretrained(base_model), AutoModelForSeq2SeqLM.from_pretrained(
        base_model
    )


def _batch(tokenizer, samples: list[Sample], device: str):
    encoded = tokenizer(
        [s.input for s in samples], return_tensors="pt", padding=True,
        truncation=True, max_length=512,
    ).to(device)
    labels = tokenizer(
        [s.target for s in samples], return_tensors="pt", padding=True,
        truncation=True, max_length=512,
    ).input_ids.to(device)
    labels[labels == tokenizer.pad_token_id] = -100
    return encoded, labels


@torch.no_grad()
def _dev_loss(model, tokenizer, dev: list[Sample], device: str, batch_size: int) -> float:
    model.eval()
    total = 0.0
    count = 0
    for i in range(0, len(dev), batch_size):
        chunk = dev[i:i + batch_size]
        encoded, labels = _batch(tokenizer, chunk, device)
        loss = model(**encoded, labels=labels).loss
        total += float(loss) * len(chunk)
        count += len(chunk)
    model.train()
    return total / count


def finetune(
    samples_path: str | Path,
    base_model: str,
    out_dir: str | Path,
    epochs: int = 30,
    lr: float = 3e-3,
    batch_size: int = 4,
    dev_fraction: float = 0.2,
    patience: int = 3,
    seed: int = 13,
    device: str = "cpu",
) -> Path:
    """Train a joint checkpoint and return its directory.

    Stops early when the dev loss has not improved for ``patience`` epochs;
    the best-dev state is what gets saved. Per-epoch losses land in
    ``train_log.json`` next to the weights.
    """
    samples = load_trainset(samples_path)
    rng = random.Random(seed)
    torch.manual_seed(seed)
    shuffled = list(samples)
    rng.shuffle(shuffled)
    dev_size = max(1, int(len(shuffled) * dev_fraction)) if len(shuffled) >= 2 else 0
    dev, train = shuffled[:dev_size], shuffled[dev_size:]
    if not train:
        train, dev = dev, []

    tokenizer, model = _load_base(base_model)
    model.to(device).train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=lr)

    log: list[dict] = []
    best_loss = float("inf")
    best_state = None
    stale = 0
    for epoch in range(1, epochs + 1):
        rng.shuffle(train)
        epoch_loss = 0.0
        for i in range(0, len(train), batch_size):
            chunk = train[i:i + batch_size]
            encoded, labels = _batch(tokenizer, chunk, device)
            loss = model(**encoded, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(chunk)
        train_loss = epoch_loss / len(train)
        monitored = _dev_loss(model, tokenizer, dev, device, batch_size) if dev else train_loss
        log.append({"epoch": epoch, "train_loss": train_loss, "dev_loss": monitored})
        logger.info("epoch %d: train %.4f dev %.4f", epoch, train_loss, monitored)
        if monitored < best_loss - 1e-4:
            best_loss = monitored
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                logger.info("early stop after epoch %d (best dev %.4f)", epoch, best_loss)
                break

    if best_state is not None:
        model.load_state_dict(best_state)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    (out / "train_log.json").write_text(
        json.dumps({"base_model": base_model, "epochs": log, "best_dev_loss": best_loss},
                   indent=2),
        encoding="utf-8",
    )
    return out
