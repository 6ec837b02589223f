"""The mlm-sidecar command group: build-model, finetune, serve."""

from __future__ import annotations

import sys

import click

from mlm_sidecar import __version__
from mlm_sidecar.errors import SidecarError
from mlm_sidecar.model import ModelConfig, build_model, load_model, save_model
from mlm_sidecar.server import ServeConfig, build_server
from mlm_sidecar.training import finetune, read_training_file
from mlm_sidecar.vocab import load_vocab


@click.group()
@click.version_option(version=__version__, prog_name="mlm-sidecar")
def main() -> None:
    """Masked-LM fill-mask scoring server and fine-tuning."""


@main.command("build-model")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(),
              help="Vocabulary file, one token per line.")
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(),
              help="Checkpoint directory to create.")
@click.option("--hidden", default=64, show_default=True)
@click.option("--layers", default=2, show_default=True)
@click.option("--heads", default=4, show_default=True)
@click.option("--feed-forward", default=128, show_default=True)
@click.option("--window", default=512, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_build_model(vocab_path, out_dir, hidden, layers, heads,
                    feed_forward, window, seed) -> None:
    """Initialize a fresh checkpoint from a seed (no pre-training)."""
    try:
        vocab = load_vocab(vocab_path)
        config = ModelConfig(
            vocab_size=len(vocab), vocab_digest=vocab.digest, hidden=hidden,
            layers=layers, heads=heads, feed_forward=feed_forward,
            window=window, seed=seed,
        )
        save_model(build_model(config), out_dir)
    except SidecarError as exc:
        raise click.ClickException(str(exc)) from None
    params = sum(p.numel() for p in build_model(config).parameters())
    click.echo(f"built {params} parameter model over {len(vocab)} tokens at {out_dir}")


@main.command("finetune")
@click.argument("model_dir", type=click.Path())
@click.argument("training_file", type=click.Path())
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(),
              help="Directory for the tuned model and checkpoints.")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(),
              help="Vocabulary file the training export was built with.")
@click.option("--epochs", default=3, show_default=True)
@click.option("--lr", default=5e-3, show_default=True)
@click.option("--batch-size", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_finetune(model_dir, training_file, out_dir, vocab_path,
                 epochs, lr, batch_size, seed) -> None:
    """Tune a checkpoint on an exported full-span training file."""
    try:
        vocab = load_vocab(vocab_path)
        model = load_model(model_dir)
        records = read_training_file(training_file)
        log = finetune(
            model, records, vocab, out_dir,
            epochs=epochs, lr=lr, batch_size=batch_size, seed=seed,
        )
    except SidecarError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    first = log["initial_loss"]
    last = log["epochs"][-1]["dataset_loss"]
    click.echo(
        f"tuned on {log['records']} record(s) for {epochs} epoch(s): "
        f"loss {first:.4f} -> {last:.4f}; model at {out_dir}"
    )


@main.command("serve")
@click.argument("model_dir", type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path(),
              help="Vocabulary file; its digest must match the checkpoint.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8756, show_default=True)
@click.option("--top-k-cap", default=50, show_default=True)
@click.option("--max-batch", default=8, show_default=True)
def cmd_serve(model_dir, vocab_path, host, port, top_k_cap, max_batch) -> None:
    """Serve fill-mask scoring over HTTP."""
    import uvicorn

    try:
        config = ServeConfig(
            model_dir=model_dir, vocab_path=vocab_path, host=host, port=port,
            top_k_cap=top_k_cap, max_batch=max_batch,
        )
        app, state = build_server(config)
    except SidecarError as exc:
        raise click.ClickException(str(exc)) from None
    window = state.model.config.window
    click.echo(f"serving on http://{host}:{port} (window {window})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
