"""Command-line entry points for serving and fine-tuning."""

from __future__ import annotations

import sys

import click

from linkforge_server.config import ServerConfig
from linkforge_server.finetune import TINY_RANDOM, TrainsetError, finetune


@click.group()
def main() -> None:
    """Model server for the entity-linking backend wire contract."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True,
              help="Server config JSON (model sections, device, decoding).")
@click.option("--listen", default="127.0.0.1:8000", show_default=True)
def serve(config_path: str, listen: str) -> None:
    """Serve /v1/generate, /v1/chat, /v1/ner, and /health."""
    import uvicorn

    from linkforge_server.app import create_app

    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError("--listen must look like host:port")
    config = ServerConfig.from_file(config_path)
    app = create_app(config, preload=False)
    uvicorn.run(app, host=host, port=int(port_text))


@main.command(name="finetune")
@click.option("--trainset", type=click.Path(exists=True), required=True,
              help="Trainset JSONL ({'input','target','task'} per line).")
@click.option("--base", default=TINY_RANDOM, show_default=True,
              help="Base checkpoint path, or 'tiny-random' for a fresh toy model.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--epochs", default=30, show_default=True)
@click.option("--lr", default=3e-3, show_default=True)
@click.option("--batch-size", default=4, show_default=True)
@click.option("--patience", default=3, show_default=True)
@click.option("--seed", default=13, show_default=True)
def finetune_cmd(trainset: str, base: str, out_dir: str, epochs: int, lr: float,
                 batch_size: int, patience: int, seed: int) -> None:
    """Fine-tune a joint checkpoint from a trainset JSONL."""
    try:
        out = finetune(trainset, base, out_dir, epochs=epochs, lr=lr,
                       batch_size=batch_size, patience=patience, seed=seed)
    except TrainsetError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(4)
    click.echo(f"checkpoint written to {out}")


if __name__ == "__main__":
    main()
