"""Command line entry points: train, extract, serve."""

from __future__ import annotations

import sys

import click

from .data import SampleError
from .represent import extract_representations
from .train import TrainConfig, finetune


@click.group()
def cli():
    """Query intent generator: training, extraction, serving."""


@cli.command("train")
@click.argument("samples", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--objective", type=click.Choice(["dclm", "clm"]), default="dclm",
              show_default=True)
@click.option("--lr", type=float, default=5e-5, show_default=True)
@click.option("--epochs", type=int, default=3, show_default=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def train(samples, out_dir, objective, lr, epochs, batch_size, seed):
    """Fine-tune on a JSONL sample file and write a checkpoint."""
    cfg = TrainConfig(objective=objective, lr=lr, epochs=epochs,
                      batch_size=batch_size, seed=seed)
    try:
        result = finetune(samples, cfg, out_dir)
    except SampleError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    first, last = result.history[0][0], result.history[-1][-1]
    click.echo(f"checkpoint: {result.checkpoint}")
    click.echo(f"loss: {first:.4f} -> {last:.4f}")


@cli.command("extract")
@click.argument("checkpoint", type=click.Path())
@click.argument("term")
@click.argument("passages", type=click.Path())
@click.argument("out", type=click.Path())
@click.option("--budget", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def extract(checkpoint, term, passages, out, budget, seed):
    """Extract contextual vectors for TERM from a passages JSONL file."""
    count = extract_representations(checkpoint, term, passages, out,
                                    budget=budget, seed=seed)
    click.echo(f"wrote {count} vectors to {out}")


@cli.command("serve")
@click.argument("checkpoint", type=click.Path())
@click.option("--tcp", is_flag=True, help="Serve on TCP instead of stdio.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
def serve(checkpoint, tcp, host, port):
    """Answer generation requests over stdio (default) or TCP."""
    from .server import serve_stdio, serve_tcp

    if tcp:
        serve_tcp(checkpoint, host=host, port=port)
    else:
        serve_stdio(checkpoint)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
