"""Main entry point for the shiftlab CLI."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .checkpoint import load_model, save_checkpoint
from .config import Config
from .errors import ConfigError, DatasetError, ShiftlabError
from .metrics import build_report, select_tau, write_report
from .models.batch import SceneCache, single_query_batch
from .models.factory import MODEL_KINDS, create_model
from .models.query import MASK_MODES, MASKED, Query, parse_query
from .models.ssas import SsasModel
from .saccade import argmax_cell, load_graph, traverse
from .scenes.dataset import (
    load_dataset,
    load_split,
    read_meta,
    save_dataset,
    without_categories,
    write_meta,
)
from .scenes.generator import SPLITS, census, generate_split
from .scenes.models import Scene, Vocabulary
from .scenes.raster import rasterize_pixels, write_ppm
from .scenes.spatial import estimate_spatial_shift_kernels
from .tensor import Tensor
from .training import Trainer, write_log
from .visualize import export_saccade, export_trace, render_shift_kernel, write_json

console = Console()
logger = logging.getLogger("shiftlab")


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _status(message: str) -> None:
    console.print(f"[dim]{message}[/dim]")


def _cache(scenes: List[Scene], vocabulary: Vocabulary, config: Config) -> SceneCache:
    encoder = config.encoder
    cache = SceneCache(scenes, vocabulary, encoder.grid_size, encoder.mode, config.threads)
    cache.warm()
    return cache


def _holdout_ids(names: List[str], vocabulary: Vocabulary) -> List[int]:
    unknown = [n for n in names if n not in vocabulary.categories]
    if unknown:
        raise ConfigError(f"Unknown held-out categories {unknown}")
    return [vocabulary.category_id(n) for n in names]


def _find_scene(data: str, split: str, scene_id: str):
    scenes, vocabulary, _ = load_split(data, split)
    for index, scene in enumerate(scenes):
        if scene.id == scene_id:
            return scenes, index, vocabulary
    raise DatasetError(f"No scene {scene_id!r} in the {split} split of {data}")


def cmd_generate(args: argparse.Namespace) -> int:
    config = Config(args.config)
    gen = config.generation
    vocabulary = Vocabulary.from_config(gen)
    sizes = {"train": gen.train_size, "val": gen.val_size, "test": gen.test_size}
    if args.count is not None:
        sizes["train"] = args.count
    out = Path(args.out)

    stats = {}
    for split in SPLITS:
        _status(f"Generating {sizes[split]} {split} scenes")
        scenes = generate_split(gen, args.seed, split, sizes[split], config.threads)
        save_dataset(out / split, scenes, vocabulary, rasters=not args.no_rasters)
        stats[split] = census(scenes, vocabulary)
    write_meta(out, gen, args.seed, sizes)
    write_json(out / "census.json", stats)

    table = Table(title="Dataset census")
    table.add_column("split")
    table.add_column("scenes", justify="right")
    table.add_column("ambiguous scenes", justify="right")
    table.add_column("ambiguous queries", justify="right")
    for predicate in vocabulary.predicates:
        table.add_column(predicate, justify="right")
    for split, row in stats.items():
        table.add_row(
            split,
            str(row["scenes"]),
            f"{row['ambiguous_fraction']:.3f}",
            f"{row['ambiguous_query_fraction']:.3f}",
            *(str(row["per_predicate"][p]) for p in vocabulary.predicates),
        )
    console.print(table)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = Config(args.config)
    if args.iterations is not None:
        config.set("training.iterations", args.iterations)
    if args.mask_rate is not None:
        config.set("training.mask_rate", args.mask_rate)
    if args.epochs is not None:
        config.set("training.epochs", args.epochs)
    if args.holdout:
        config.set("training.holdout_categories", args.holdout)
    config.set("training.seed", args.seed)

    train_scenes, vocabulary, gen = load_split(args.data, "train")
    val_scenes = load_dataset(Path(args.data) / "val", vocabulary)
    config.set("generation", gen.model_dump())
    training = config.training
    held_out = _holdout_ids(training.holdout_categories, vocabulary)
    if held_out:
        train_scenes = without_categories(train_scenes, held_out)
        val_scenes = without_categories(val_scenes, held_out)
        if not train_scenes:
            raise DatasetError("Holding out those categories leaves no training scenes")

    stat_kernels = None
    if args.model == "spatialshift":
        stat_kernels = estimate_spatial_shift_kernels(
            train_scenes, vocabulary, config.encoder.grid_size
        )
    model = create_model(args.model, vocabulary, config, args.seed, stat_kernels)

    console.print(
        Panel(
            f"[bold cyan]{args.model}[/bold cyan] on {len(train_scenes)} scenes, "
            f"t={training.iterations}, mask rate {training.mask_rate}, seed {args.seed}",
            expand=False,
        )
    )
    trainer = Trainer(
        model,
        training,
        _cache(train_scenes, vocabulary, config),
        _cache(val_scenes, vocabulary, config),
    )
    trainer.set_status_callback(_status)
    records = trainer.train()

    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_suffix(".csv")
    write_log(log_path, records)
    final = [r for r in records if r.split == "val"]
    metrics = {"val_loss": final[-1].loss} if final else {}
    epochs_run = records[-1].epoch if records else 0
    save_checkpoint(out, model, config, vocabulary, args.seed, epochs_run, metrics)
    console.print(f"[green]Checkpoint written to {out}; log at {log_path}[/green]")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model, _, vocabulary, config = load_model(args.ckpt)
    _, data_vocab = read_meta(args.data)
    if data_vocab != vocabulary:
        raise ConfigError("Dataset vocabulary differs from the checkpoint's")
    evaluation = config.evaluation
    threads = config.threads
    only = None
    if args.holdout_only:
        only = _holdout_ids(config.training.holdout_categories, vocabulary)
        if not only:
            raise ConfigError("--holdout-only needs a checkpoint trained with held-out categories")

    val_cache = _cache(load_dataset(Path(args.data) / "val", vocabulary), vocabulary, config)
    tau = select_tau(model, val_cache, evaluation, args.mask, threads, only)
    test_cache = _cache(load_dataset(Path(args.data) / args.split, vocabulary), vocabulary, config)
    report = build_report(model, test_cache, evaluation, tau, args.mask, threads, only)
    paths = write_report(report, args.out)

    table = Table(title=f"{model.kind} on {args.split} (mask: {args.mask}, tau {tau:.1f})")
    for column in ("subset", "n", "S-IoU", "O-IoU", "S-KL", "O-KL"):
        table.add_column(column, justify="right" if column != "subset" else "left")
    for row in [report.overall, report.ambiguous, *report.by_predicate]:
        table.add_row(
            row.category, str(row.n), f"{row.s_iou:.3f}", f"{row.o_iou:.3f}",
            f"{row.s_kl:.3f}", f"{row.o_kl:.3f}",
        )
    console.print(table)
    console.print(f"[green]Reports written to {paths['metrics'].parent}[/green]")
    return 0


def cmd_visualize(args: argparse.Namespace) -> int:
    model, _, vocabulary, config = load_model(args.ckpt)
    scenes, index, _ = _find_scene(args.data, args.split, args.scene)
    query = parse_query(args.query, vocabulary)
    cache = SceneCache(scenes, vocabulary, config.encoder.grid_size, config.encoder.mode)
    output = model.forward(single_query_batch(cache, index, query))

    out = Path(args.out)
    stats = export_trace(output, out)
    write_ppm(out / "scene.ppm", rasterize_pixels(scenes[index], vocabulary))
    console.print(f"[green]{len(stats)} heatmaps for {query.describe(vocabulary)} in {out}[/green]")
    return 0


def cmd_render_shift(args: argparse.Namespace) -> int:
    model, _, vocabulary, config = load_model(args.ckpt)
    predicate = vocabulary.predicate_id(args.predicate)
    sidecar = render_shift_kernel(
        model, predicate, args.predicate, config.encoder.grid_size, args.out
    )
    for direction in ("forward", "inverse"):
        d_row, d_col = sidecar[direction]["displacement"]
        console.print(f"{args.predicate} {direction}: Δrow {d_row:+.2f}, Δcol {d_col:+.2f}")
    return 0


def cmd_saccade(args: argparse.Namespace) -> int:
    model, _, vocabulary, config = load_model(args.ckpt)
    if not isinstance(model, SsasModel):
        raise ConfigError(f"Saccades need an ssas checkpoint, got {model.kind}")
    scenes, index, _ = _find_scene(args.data, args.split, args.scene)
    graph = load_graph(args.graph, vocabulary)
    cache = SceneCache(scenes, vocabulary, config.encoder.grid_size, config.encoder.mode)
    mu = model.features(single_query_batch(cache, index, Query(MASKED, 0, MASKED)))
    maps = traverse(Tensor(mu.values[0]), graph, model.params)

    names = [vocabulary.categories[c] for c in graph.nodes]
    export_saccade(maps, names, args.out)
    for node, attention in maps.items():
        console.print(f"node {node} ({names[node]}): argmax {argmax_cell(attention)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Referring relationships with learned attention shifts"
    )
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument(
            "--config",
            type=str,
            default="config.yaml",
            help="Path to config file (default: config.yaml)",
        )

    p = sub.add_parser("generate", help="Generate a synthetic dataset")
    with_config(p)
    p.add_argument("--out", required=True, help="Dataset directory")
    p.add_argument("--seed", type=int, default=17, help="Master seed")
    p.add_argument("--count", type=int, default=None, help="Number of training scenes")
    p.add_argument("--no-rasters", action="store_true", help="Skip writing PPM rasters")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="Train a model")
    with_config(p)
    p.add_argument("--model", choices=MODEL_KINDS, default="ssas")
    p.add_argument("--data", required=True, help="Dataset directory")
    p.add_argument("--out", required=True, help="Checkpoint path")
    p.add_argument("--seed", type=int, default=17)
    p.add_argument("--iterations", type=int, default=None, help="Override rollout iterations")
    p.add_argument(
        "--mask-rate", type=float, nargs="?", const=0.3, default=None,
        help="Query masking rate (0.3 when given without a value)",
    )
    p.add_argument("--epochs", type=int, default=None, help="Override epoch count")
    p.add_argument(
        "--holdout", action="append", default=None, metavar="CATEGORY",
        help="Remove scenes holding this category from training (repeatable)",
    )
    p.add_argument("--log", default=None, help="Training log CSV (default: next to checkpoint)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--mask", choices=MASK_MODES, default="none")
    p.add_argument(
        "--holdout-only", action="store_true",
        help="Score only queries naming a category held out during training",
    )
    p.add_argument("--out", default="eval", help="Report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="Per-iteration attention heatmaps for one query")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--scene", required=True, help="Scene id")
    p.add_argument("--query", required=True, help='"subject,predicate,object"; "_" masks')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("render-shift", help="Render a predicate's shift of centred attention")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--predicate", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_shift)

    p = sub.add_parser("saccade", help="Traverse a scene-graph path")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--scene", required=True)
    p.add_argument("--graph", required=True, help="Graph JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_saccade)
    return parser


def main(argv: Optional[List[str]] = None):
    """Main CLI entry point."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        code = args.func(args)
    except ShiftlabError as e:
        console.print(f"[red]Error: {e}[/red]")
        diagnostics = getattr(e, "diagnostics", None)
        if diagnostics:
            console.print_json(json.dumps(diagnostics, default=str))
        sys.exit(e.exit_code)
    except OSError as e:
        console.print(f"[red]I/O error: {e}[/red]")
        sys.exit(4)
    sys.exit(code)


if __name__ == "__main__":
    main()
