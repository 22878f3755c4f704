"""Command-line surface: preprocess, train, eval, gradcheck, dump-attention.

Every command writes a run manifest into its output directory before doing
any work, never mutates its inputs, and exits 0 on success, 1 on numerical
or data failures, 2 on usage errors. The output directory defaults to the
CHROMAGT_OUTDIR environment variable, then to "./run".
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .autodiff import grad_check
from .config import ModelConfig, TrainConfig
from .errors import ChromagtError
from .graphs import load_dataset
from .model import ChromaticGraphTransformer, loss_fn, metric_fn
from .sidecar import build_sidecar, load_sidecar, save_sidecar
from .structure import compute_structure
from .synthetic import SyntheticTaskSpec, generate_synthetic, task_kind
from .training import train_model


def _outdir(path: str | None) -> Path:
    out = Path(path or os.environ.get("CHROMAGT_OUTDIR", "run"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(outdir: Path, command: str, seed: int | None = None,
                    config_path: str | None = None,
                    dataset_path: str | None = None) -> None:
    manifest = {
        "command": command,
        "config_path": config_path,
        "dataset_path": dataset_path,
        "output_dir": str(outdir),
        "seed": seed,
        "tool_version": __version__,
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _load_configs(path: str | None) -> tuple[ModelConfig, TrainConfig]:
    """A config file either mirrors ModelConfig directly or nests
    {"model": {...}, "train": {...}}."""
    if path is None:
        return ModelConfig(), TrainConfig()
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if "model" in raw or "train" in raw:
        model = ModelConfig.from_dict(raw.get("model", {}))
        train = TrainConfig.from_dict(raw.get("train", {}))
        return model, train
    return ModelConfig.from_dict(raw), TrainConfig()


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@click.group()
@click.version_option(__version__)
def main():
    """Graph transformer with per-channel attention filters."""


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--rpe", type=click.Choice(["rwse", "spde", "none"]), default="rwse",
              help="Pairwise encoding the sidecar is meant to serve.")
@click.option("--steps", type=int, default=8, show_default=True,
              help="Random-walk steps / distance cap to precompute.")
@click.option("--rings", default="off", show_default=True,
              help="Maximum ring size to enumerate, or 'off'.")
@click.option("--task", type=click.Choice(["regression", "node_class"]),
              default="regression", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Sidecar path (default: DATASET.sidecar.json).")
@click.option("--outdir", type=click.Path(file_okay=False), default=None)
def preprocess(dataset, rpe, steps, rings, task, out, outdir):
    """Precompute per-graph structure into a sidecar file."""
    if rings != "off":
        try:
            rings = int(rings)
        except ValueError:
            raise click.UsageError(f"--rings must be an integer or 'off', got {rings!r}")
    max_ring = None if rings == "off" else rings
    if steps < 1:
        raise click.UsageError("--steps must be >= 1")
    out_path = Path(out) if out else Path(str(dataset) + ".sidecar.json")
    run_dir = _outdir(outdir)
    _write_manifest(run_dir, "preprocess", dataset_path=str(dataset))
    try:
        ds = load_dataset(dataset, task=task)
        structures = build_sidecar(ds, steps=steps, max_ring_size=max_ring)
        save_sidecar(out_path, structures, steps=steps, max_ring_size=max_ring)
    except ChromagtError as exc:
        _fail(exc)
    click.echo(f"wrote {out_path} ({len(ds)} graphs, {steps} steps, rings={rings})")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config (ModelConfig fields, or nested model/train).")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--sidecar", "sidecar_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--outdir", type=click.Path(file_okay=False), default=None)
def train(config_path, dataset_path, sidecar_path, seed, outdir):
    """Train a model; writes checkpoint.json and metrics.json."""
    run_dir = _outdir(outdir)
    try:
        model_cfg, train_cfg = _load_configs(config_path)
        if seed is not None:
            train_cfg.seed = seed
        _write_manifest(run_dir, "train", seed=train_cfg.seed,
                        config_path=config_path, dataset_path=dataset_path)
        ds = load_dataset(dataset_path, task=model_cfg.task)
        structures = load_sidecar(sidecar_path, expected_graphs=len(ds))
        model = ChromaticGraphTransformer(model_cfg, seed=train_cfg.seed)
        result = train_model(model, ds, structures, train_cfg)
        model.save(run_dir / "checkpoint.json")
        with open(run_dir / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
    except ChromagtError as exc:
        _fail(exc)
    click.echo(
        f"best val {result['best_val']:.6f} (epoch {result['best_epoch']}), "
        f"test {result['test_metric']:.6f}"
    )


@main.command("eval")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--sidecar", "sidecar_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--split", type=click.Choice(["train", "val", "test"]), default="test",
              show_default=True)
@click.option("--outdir", type=click.Path(file_okay=False), default=None)
def eval_cmd(checkpoint, dataset_path, sidecar_path, split, outdir):
    """Evaluate a checkpoint on one dataset split."""
    run_dir = _outdir(outdir)
    _write_manifest(run_dir, "eval", dataset_path=dataset_path)
    try:
        model = ChromaticGraphTransformer.load(checkpoint)
        ds = load_dataset(dataset_path, task=model.cfg.task)
        structures = load_sidecar(sidecar_path, expected_graphs=len(ds))
        metric = metric_fn(model, ds.graphs, structures, ds.indices(split))
    except ChromagtError as exc:
        _fail(exc)
    with open(run_dir / "eval.json", "w", encoding="utf-8") as fh:
        json.dump({"split": split, "metric": metric}, fh, indent=2, sort_keys=True)
    click.echo(f"{split} metric {metric:.10f}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--eps", type=float, default=1e-3, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True,
              help="Maximum acceptable relative error.")
@click.option("--outdir", type=click.Path(file_okay=False), default=None)
def gradcheck(config_path, eps, tol, outdir):
    """Check analytic gradients against central differences on a small
    random graph; exits 1 when any parameter is off."""
    run_dir = _outdir(outdir)
    _write_manifest(run_dir, "gradcheck", config_path=config_path)
    try:
        if config_path is not None:
            model_cfg, _ = _load_configs(config_path)
        else:
            model_cfg = ModelConfig(layers=2, width=8, heads=2, rpe_steps=4,
                                    rpe_dim=4, node_pe_steps=4, node_pe_dim=4,
                                    bond_dim=4)
        spec = SyntheticTaskSpec(
            kind="ring-regression" if model_cfg.task == "regression" else "sbm-cluster",
            count=1, min_nodes=6, max_nodes=6, seed=11,
        )
        graph = generate_synthetic(spec).graphs[0]
        ring_size = model_cfg.max_ring_size if model_cfg.rings else None
        steps = max(model_cfg.node_pe_steps, model_cfg.rpe_steps, 1)
        structure = compute_structure(graph, steps, ring_size)
        model = ChromaticGraphTransformer(model_cfg, seed=5)

        def f():
            out = model.forward(graph, structure, train=True, update_stats=False)
            return loss_fn(out, graph.target, model_cfg.task)

        report = grad_check(f, model.store, eps=eps)
    except ChromagtError as exc:
        _fail(exc)
    with open(run_dir / "gradcheck.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    click.echo(f"max relative error {report['max_rel_err']:.3e} over "
               f"{len(report['params'])} parameters")
    if not report["ok"] or report["max_rel_err"] >= tol:
        click.echo("gradient check FAILED", err=True)
        sys.exit(1)


@main.command("dump-attention")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument("graph_index", type=int)
@click.argument("layer", type=int)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--sidecar", "sidecar_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Output path (default: OUTDIR/attention.json).")
@click.option("--outdir", type=click.Path(file_okay=False), default=None)
def dump_attention(checkpoint, graph_index, layer, dataset_path, sidecar_path,
                   out, outdir):
    """Export the normalized per-channel attention maps of one layer for
    one graph as JSON."""
    run_dir = _outdir(outdir)
    _write_manifest(run_dir, "dump-attention", dataset_path=dataset_path)
    try:
        model = ChromaticGraphTransformer.load(checkpoint)
        ds = load_dataset(dataset_path, task=model.cfg.task)
        structures = load_sidecar(sidecar_path, expected_graphs=len(ds))
        if not (0 <= graph_index < len(ds)):
            raise click.UsageError(f"graph index {graph_index} outside dataset")
        if not (0 <= layer < model.cfg.layers):
            raise click.UsageError(f"layer {layer} outside the {model.cfg.layers}-layer stack")
        capture: dict = {}
        model.forward(ds.graphs[graph_index], structures[graph_index],
                      train=False, capture_layer=layer, capture=capture)
        filters = capture["filters"]  # (N, N, width)
        payload = {
            "graph_id": graph_index,
            "layer": layer,
            "channels": [
                {"c": c, "rows": filters[:, :, c].tolist()}
                for c in range(filters.shape[2])
            ],
        }
    except ChromagtError as exc:
        _fail(exc)
    out_path = Path(out) if out else run_dir / "attention.json"
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--kind", type=click.Choice(["ring-regression", "triangle-regression",
                                           "sbm-cluster"]),
              default="ring-regression", show_default=True)
@click.option("--count", type=int, default=300, show_default=True)
@click.option("--min-nodes", type=int, default=8, show_default=True)
@click.option("--max-nodes", type=int, default=24, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.argument("out", type=click.Path(dir_okay=False))
def synth(kind, count, min_nodes, max_nodes, seed, out):
    """Generate a synthetic JSONL dataset."""
    from .graphs import save_dataset

    try:
        spec = SyntheticTaskSpec(kind=kind, count=count, min_nodes=min_nodes,
                                 max_nodes=max_nodes, seed=seed)
        ds = generate_synthetic(spec)
        save_dataset(ds, out)
    except ChromagtError as exc:
        _fail(exc)
    click.echo(f"wrote {out} ({count} graphs, task={task_kind(kind)})")


if __name__ == "__main__":
    main()
