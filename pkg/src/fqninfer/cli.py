"""Command-line entry point wiring the pipeline end to end.

Subcommands: ``annotate`` (resolve FQNs from imports), ``gen-prompts``
(corpus to masked training prompts plus split manifest), ``train-scorer``
(n-gram model from a training file), ``detect`` (list inference points),
``infer`` (predict FQNs at every point), ``eval`` (metrics report).

Settings resolve as flags > FQNINFER_* environment variables > --config
file > defaults. Commands that write files also write a run manifest with
the config digest, seed, and input/output digests, so a run can be traced
and replayed byte for byte.
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from fqninfer import __version__
from fqninfer import backend as backend_mod
from fqninfer import corpus as corpus_mod
from fqninfer import evaluation as eval_mod
from fqninfer import promptgen as promptgen_mod
from fqninfer.config import BACKEND_KINDS, RunConfig
from fqninfer.detect import find_points
from fqninfer.errors import ConfigError, FqnInferError
from fqninfer.infer import (
    SETTINGS,
    SpanSearchConfig,
    point_record,
    predict_all,
    result_record,
)
from fqninfer.tokenizer import Vocab

logger = logging.getLogger(__name__)


@dataclass
class CliState:
    cfg: RunConfig
    strict: bool


def _guarded(fn):
    """Turn pipeline errors into exit code 2 with a diagnostic on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FqnInferError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _read_source(source: str) -> tuple[str, str]:
    """Read a snippet from a path or stdin ('-'); returns (unit_id, text)."""
    if source == "-":
        return "stdin", sys.stdin.read()
    path = Path(source)
    try:
        return path.stem, path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from None


def _emit(out: str | None, text: str) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_manifest(
    manifest_path: Path, command: str, cfg: RunConfig, inputs, outputs
) -> None:
    payload = {
        "command": command,
        "config": cfg.to_dict(),
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "inputs": {str(p): _sha256_file(Path(p)) for p in inputs},
        "outputs": {str(p): _sha256_file(Path(p)) for p in outputs},
    }
    manifest_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_vocab(cfg: RunConfig) -> Vocab:
    if cfg.vocab_path is None:
        raise ConfigError("a vocabulary file is required (--vocab or config)")
    return Vocab.from_file(cfg.vocab_path)


def _build_backend(cfg: RunConfig, vocab: Vocab):
    if cfg.backend == "ngram":
        if cfg.model_path is None:
            raise ConfigError("ngram backend needs model_path")
        return backend_mod.NgramBackend(backend_mod.load_model(cfg.model_path, vocab))
    if cfg.backend == "remote":
        if cfg.base_url is None:
            raise ConfigError("remote backend needs base_url")
        return backend_mod.RemoteBackend(cfg.base_url, vocab=vocab)
    if cfg.script_path is None:
        raise ConfigError("scripted backend needs script_path")
    return backend_mod.ScriptedBackend.from_file(cfg.script_path)


@click.group()
@click.version_option(version=__version__, prog_name="fqninfer")
@click.option("--config", "config_path", envvar="FQNINFER_CONFIG", default=None,
              type=click.Path(), help="JSON config file.")
@click.option("--seed", type=int, envvar="FQNINFER_SEED", default=None,
              help="Seed for all randomness.")
@click.option("--vocab", "vocab_path", envvar="FQNINFER_VOCAB", default=None,
              type=click.Path(), help="Vocabulary file, one token per line.")
@click.option("--backend", "backend", envvar="FQNINFER_BACKEND", default=None,
              type=click.Choice(BACKEND_KINDS), help="Fill-mask backend kind.")
@click.option("--jobs", type=int, envvar="FQNINFER_JOBS", default=None,
              help="Concurrent points during inference.")
@click.option("--strict", is_flag=True, envvar="FQNINFER_STRICT",
              help="Exit 1 when any item fails.")
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug.")
@click.pass_context
def main(ctx, config_path, seed, vocab_path, backend, jobs, strict, verbose):
    """Infer fully qualified type names in partial Java code."""
    level = logging.WARNING - min(verbose, 2) * 10
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        base = RunConfig.from_file(config_path) if config_path else RunConfig()
        cfg = base.merged(seed=seed, vocab_path=vocab_path, backend=backend, jobs=jobs)
    except FqnInferError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    ctx.obj = CliState(cfg=cfg, strict=strict)


@main.command()
@click.argument("source")
@click.option("--out", "-o", type=click.Path(), default=None,
              help="Output corpus file (default: stdout).")
@click.option("--id", "unit_id", default=None, help="Unit id for a single snippet.")
@click.option("--library", default="", help="Library label stored on each unit.")
@click.pass_obj
@_guarded
def annotate(state: CliState, source, out, unit_id, library):
    """Annotate SOURCE (a .java file, a directory, or - for stdin)."""
    inputs: list[Path] = []
    units = []
    if source == "-":
        text = sys.stdin.read()
        units.append(
            corpus_mod.annotate_by_imports(
                text, unit_id=unit_id or "stdin", library=library
            )
        )
    else:
        path = Path(source)
        files = sorted(path.rglob("*.java")) if path.is_dir() else [path]
        if not files:
            raise ConfigError(f"no .java files under {source}")
        for file in files:
            inputs.append(file)
            try:
                text = file.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read {file}: {exc}") from None
            units.append(
                corpus_mod.annotate_by_imports(
                    text, unit_id=unit_id or file.stem, library=library
                )
            )
    unresolved = sorted(
        {name for unit in units for name in unit.provenance.get("unresolved", ())}
    )
    if unresolved:
        logger.warning("unresolved simple names: %s", ", ".join(unresolved))
    lines = "".join(
        json.dumps(corpus_mod.serialize_unit(unit), sort_keys=True) + "\n"
        for unit in units
    )
    _emit(out, lines)
    if out is not None:
        _write_run_manifest(
            Path(out).with_name(Path(out).name + ".run.json"),
            "annotate", state.cfg, inputs, [Path(out)],
        )
    total = sum(len(unit.annotations) for unit in units)
    click.echo(f"annotated {len(units)} unit(s), {total} annotation(s)", err=True)
    if state.strict and unresolved:
        sys.exit(1)


@main.command("gen-prompts")
@click.argument("corpus_file", type=click.Path(exists=True))
@click.option("--out-dir", "-o", type=click.Path(), default="prompts",
              help="Directory for training.jsonl and split_manifest.json.")
@click.option("--strategy", type=click.Choice(["full_span", "random"]), default=None,
              help="Masking strategy override.")
@click.option("--ratio", type=float, default=None, help="Random mask ratio override.")
@click.option("--compress", is_flag=True, help="Write training.jsonl.gz.")
@click.pass_obj
@_guarded
def gen_prompts(state: CliState, corpus_file, out_dir, strategy, ratio, compress):
    """Generate masked training prompts from an annotated CORPUS_FILE."""
    cfg = state.cfg.merged(mask_strategy=strategy, mask_ratio=ratio)
    vocab = _load_vocab(cfg)
    units = corpus_mod.load_corpus(corpus_file)
    mask_strategy = promptgen_mod.MaskStrategy(cfg.mask_strategy, cfg.mask_ratio)
    prompts = []
    failures = 0
    for unit in units:
        try:
            prompts.extend(
                promptgen_mod.gen_prompts(
                    unit, mask_strategy, vocab,
                    t=cfg.t, rng_seed=cfg.seed, window=cfg.window,
                )
            )
        except FqnInferError as exc:
            failures += 1
            logger.warning("unit %r skipped: %s", unit.unit.id, exc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    training_path = out / ("training.jsonl.gz" if compress else "training.jsonl")
    written = promptgen_mod.export_training(prompts, training_path)
    manifest = eval_mod.build_manifest(units, prompts, vocab, theta=cfg.theta)
    manifest_path = out / "split_manifest.json"
    eval_mod.save_manifest(manifest, manifest_path)
    _write_run_manifest(
        out / "run_manifest.json", "gen-prompts", cfg,
        [Path(corpus_file), Path(cfg.vocab_path)], [training_path, manifest_path],
    )
    click.echo(
        f"wrote {written} training record(s) from {len(units)} unit(s) to {out}",
        err=True,
    )
    if state.strict and failures:
        sys.exit(1)


@main.command("train-scorer")
@click.argument("training_file", type=click.Path(exists=True))
@click.option("--out", "-o", type=click.Path(), default="ngram.bin",
              help="Output model file.")
@click.option("--order", type=int, default=None, help="Highest n-gram order.")
@click.option("--alpha", type=float, default=None, help="Laplace smoothing weight.")
@click.pass_obj
@_guarded
def train_scorer(state: CliState, training_file, out, order, alpha):
    """Train the n-gram fill-mask scorer from a TRAINING_FILE."""
    cfg = state.cfg.merged(order=order, alpha=alpha)
    vocab = _load_vocab(cfg)
    data = promptgen_mod.read_training(training_file)
    sequences = [
        promptgen_mod.restore_sequence(tokens, labels) for tokens, labels in data
    ]
    model = backend_mod.train_ngram(sequences, vocab, order=cfg.order, alpha=cfg.alpha)
    backend_mod.save_model(model, out)
    _write_run_manifest(
        Path(out).with_name(Path(out).name + ".run.json"),
        "train-scorer", cfg,
        [Path(training_file), Path(cfg.vocab_path)], [Path(out)],
    )
    contexts = sum(len(table) for table in model.counts.values())
    click.echo(
        f"trained order-{model.order} model on {len(sequences)} sequence(s), "
        f"{contexts} context(s)",
        err=True,
    )


@main.command()
@click.argument("source", default="-")
@click.option("--out", "-o", type=click.Path(), default=None,
              help="Output file (default: stdout).")
@_guarded
def detect(source, out):
    """List type-inference points in SOURCE (.java file or - for stdin)."""
    unit_id, text = _read_source(source)
    unit = corpus_mod.SourceUnit(id=unit_id, raw_text=text)
    points = find_points(unit)
    payload = [point_record(p) for p in points]
    _emit(out, json.dumps(payload, indent=2) + "\n")


@main.command()
@click.argument("source", default="-")
@click.option("--out", "-o", type=click.Path(), default=None,
              help="Output file (default: stdout).")
@click.option("--setting", type=click.Choice(list(SETTINGS)), default=None,
              help="Prompt setting override.")
@click.pass_obj
@_guarded
def infer(state: CliState, source, out, setting):
    """Predict an FQN at every inference point of SOURCE."""
    cfg = state.cfg.merged(setting=setting)
    vocab = _load_vocab(cfg)
    backend = _build_backend(cfg, vocab)
    unit_id, text = _read_source(source)
    annotated = corpus_mod.annotate_by_imports(text, unit_id=unit_id)
    span_cfg = SpanSearchConfig(
        min_len=cfg.min_len, max_len=cfg.max_len,
        aggregate=cfg.aggregate, window=cfg.window,
    )
    results = predict_all(
        annotated, backend, span_cfg,
        vocab=vocab, setting=cfg.setting, t=cfg.t, jobs=cfg.jobs,
    )
    payload = [result_record(r) for r in results]
    _emit(out, json.dumps(payload, indent=2) + "\n")
    failures = sum(1 for r in results if r.error is not None)
    if state.strict and failures:
        sys.exit(1)


@main.command("eval")
@click.argument("records_file", type=click.Path(exists=True))
@click.argument("manifest_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              help="Report format.")
@click.option("--aliases", type=click.Path(exists=True), default=None,
              help="JSON table of package prefix aliases applied before matching.")
@click.option("--out", "-o", type=click.Path(), default=None,
              help="Output file (default: stdout).")
@click.pass_obj
@_guarded
def eval_cmd(state: CliState, records_file, manifest_file, fmt, aliases, out):
    """Score RECORDS_FILE against MANIFEST_FILE and print the report."""
    cfg = state.cfg
    vocab = _load_vocab(cfg)
    records = eval_mod.load_records(records_file)
    manifest = eval_mod.load_manifest(manifest_file)
    alias_table = None
    if aliases is not None:
        alias_table = json.loads(Path(aliases).read_text(encoding="utf-8"))
    report = eval_mod.split_report(records, manifest, vocab, alias_table)
    overall = eval_mod.accuracy(records, alias_table)
    if fmt == "json":
        payload = {"accuracy": overall, **report.to_dict()}
        _emit(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        _emit(out, f"overall accuracy: {overall:.3f}\n" + report.format_text())


if __name__ == "__main__":
    main()
