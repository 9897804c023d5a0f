"""Single executable for the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data error. The seed falls back to
the TSVMORPH_SEED environment variable when --seed is not given.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import click

from . import architectures
from .architectures import ArchitectureId
from .augment import AUGMENTATION_TYPES, augment_records
from .cropper import DEFAULT_THETA, crop_mosaic, estimate_grid
from .errors import TsvMorphError
from .manifest import LABELS, MorphologyLabel, load_manifest, save_manifest
from .surface import parse_wli, read_png, render_grayscale, write_png, write_wli
from .synth import GenParams, generate_mosaic
from .training import (
    TrainConfig,
    evaluate,
    load_model,
    sweep as run_sweep,
    synthetic_dataset,
    train as run_train,
)

ARCH_CHOICES = [a.value for a in ArchitectureId]


def _seed_option(value):
    if value is not None:
        return value
    return int(os.environ.get("TSVMORPH_SEED", "0"))


def _parse_range(text: str, cast, step=None):
    """Accept 'a-b' (inclusive, with step for floats), 'a,b,c', or 'a'."""
    text = text.strip()
    if "-" in text and not text.startswith("-"):
        lo, hi = text.split("-", 1)
        lo, hi = cast(lo), cast(hi)
        if step is None:
            return list(range(int(lo), int(hi) + 1))
        out = []
        v = lo
        while v <= hi + 1e-9:
            out.append(round(v, 10))
            v += step
        return out
    return [cast(v) for v in text.split(",") if v]


def _load_image(path: Path):
    data = path.read_bytes()
    if path.suffix.lower() == ".wli":
        return render_grayscale(parse_wli(data))
    return read_png(data)


@click.group()
def cli():
    """Via surface-map pipeline: generate, crop, label, augment, train, sweep."""


@cli.command()
@click.option("--rows", default=4, show_default=True)
@click.option("--cols", default=5, show_default=True)
@click.option("--seed", type=int, default=None, help="Falls back to TSVMORPH_SEED.")
@click.option("--gap", default=6, show_default=True)
@click.option("--labels", default="cycle",
              help="'cycle', 'random', or comma list of class names.")
@click.option("--mode", type=click.Choice(["mosaic", "dataset"]), default="mosaic",
              show_default=True)
@click.option("--train-per-class", default=100, show_default=True)
@click.option("--test-per-class", default=30, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def generate(rows, cols, seed, gap, labels, mode, train_per_class, test_per_class, out):
    """Generate a synthetic mosaic (.wli + .png + truth) or a labeled dataset."""
    seed = _seed_option(seed)
    out.mkdir(parents=True, exist_ok=True)
    params = GenParams(seed=seed)
    if mode == "dataset":
        train_recs, test_recs = synthetic_dataset(train_per_class, test_per_class,
                                                  params, seed=seed)
        save_manifest(train_recs + test_recs, out / "manifest.jsonl")
        click.echo(f"wrote {len(train_recs)} train + {len(test_recs)} test records "
                   f"to {out / 'manifest.jsonl'}")
        return

    import numpy as np
    if labels == "cycle":
        chosen = [LABELS[i % 3] for i in range(rows * cols)]
    elif labels == "random":
        rng = np.random.default_rng(seed)
        chosen = [LABELS[rng.integers(0, 3)] for _ in range(rows * cols)]
    else:
        chosen = [MorphologyLabel(name.strip()) for name in labels.split(",")]
    mosaic = generate_mosaic(rows, cols, chosen, params, gap=gap)
    (out / "mosaic.wli").write_bytes(write_wli(mosaic.heightmap))
    (out / "mosaic.png").write_bytes(write_png(render_grayscale(mosaic.heightmap)))
    truth = [
        {"row": r, "col": c, "box": [x0, y0, x1, y1], "label": label.value}
        for r, c, x0, y0, x1, y1, label in mosaic.boxes
    ]
    (out / "truth.json").write_text(json.dumps(truth, indent=2))
    click.echo(f"wrote mosaic.wli, mosaic.png, truth.json to {out}")


@cli.command("import")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), required=True)
def import_cmd(files, out):
    """Convert raw .wli / grayscale .png files into normalized PNGs + an index."""
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for path in files:
        img = _load_image(path)
        dest = out / (path.stem + ".png")
        dest.write_bytes(write_png(img))
        rows.append({"path": dest.name, "source": str(path),
                     "width": img.width, "height": img.height})
    index = out / "import_manifest.jsonl"
    index.write_text("".join(json.dumps(r) + "\n" for r in rows))
    click.echo(f"imported {len(rows)} image(s) into {out}")


@cli.command()
@click.option("--image", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--grid-rows", type=int, required=True)
@click.option("--grid-cols", type=int, required=True)
@click.option("--theta", default=DEFAULT_THETA, show_default=True)
@click.option("--x-offset", type=int, default=None, help="Override the fitted grid.")
@click.option("--y-offset", type=int, default=None)
@click.option("--cell-width", type=int, default=None)
@click.option("--cell-height", type=int, default=None)
@click.option("--x-pitch", type=int, default=None)
@click.option("--y-pitch", type=int, default=None)
@click.option("--x-skew", type=int, default=0)
@click.option("--y-skew", type=int, default=0)
@click.option("--source", default=None, help="Crop name prefix; defaults to the image stem.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def crop(image, grid_rows, grid_cols, theta, x_offset, y_offset, cell_width,
         cell_height, x_pitch, y_pitch, x_skew, y_skew, source, out):
    """Cut a mosaic image into centered 54x54 crops plus an unlabeled manifest."""
    img = _load_image(image)
    grid = estimate_grid(img, grid_rows, grid_cols, theta=theta)
    overrides = {k: v for k, v in {
        "x_offset": x_offset, "y_offset": y_offset, "cell_width": cell_width,
        "cell_height": cell_height, "x_pitch": x_pitch, "y_pitch": y_pitch,
    }.items() if v is not None}
    overrides.update({"x_skew": x_skew, "y_skew": y_skew})
    grid = replace(grid, **overrides).validate_for(img)
    records = crop_mosaic(img, grid, theta=theta, source=source or image.stem)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(records, out / "manifest.jsonl")
    (out / "grid.json").write_text(json.dumps(asdict(grid), indent=2))
    click.echo(f"cropped {len(records)} cells; grid {json.dumps(asdict(grid))}")


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--type", "aug_type", type=click.IntRange(0, 5), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def augment(manifest_path, aug_type, out):
    """Materialize an augmentation regime over a labeled manifest."""
    records = load_manifest(manifest_path)
    augmented = augment_records(records, AUGMENTATION_TYPES[aug_type])
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(augmented, out / "manifest.jsonl")
    click.echo(f"{len(records)} records x type {aug_type} -> {len(augmented)}")


def _split_manifest(path: Path):
    records = load_manifest(path)
    return ([r for r in records if r.split == "train"],
            [r for r in records if r.split == "test"])


def _records(train_manifest, test_manifest):
    train_recs, extra_test = _split_manifest(train_manifest)
    if test_manifest is not None:
        test_recs = load_manifest(test_manifest)
        test_recs = [r for r in test_recs if r.split != "train"] or test_recs
    else:
        test_recs = extra_test
    if not train_recs or not test_recs:
        raise TsvMorphError("need non-empty train and test splits")
    return train_recs, test_recs


@cli.command()
@click.option("--train-manifest", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--test-manifest", type=click.Path(exists=True, path_type=Path), default=None,
              help="Defaults to the 'test' rows of --train-manifest.")
@click.option("--arch", type=click.Choice(ARCH_CHOICES),
              default=ArchitectureId.VGG_INSPIRED_ALEXNET.value, show_default=True)
@click.option("--aug-type", type=click.IntRange(0, 5), default=0, show_default=True)
@click.option("--dropout", type=float, default=0.0, show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--lr", type=float, default=None)
@click.option("--momentum", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--strict-determinism", is_flag=True)
@click.option("--early-stop", type=float, default=None,
              help="Stop once test accuracy reaches this value.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def train(train_manifest, test_manifest, arch, aug_type, dropout, epochs, lr,
          momentum, batch_size, seed, strict_determinism, early_stop, out):
    """Train one model; writes history.json, metrics.json, and checkpoint.tsvm."""
    train_recs, test_recs = _records(train_manifest, test_manifest)
    cfg = TrainConfig(arch=ArchitectureId(arch), epochs=epochs, aug_type=aug_type,
                      dropout=dropout, seed=_seed_option(seed),
                      strict_determinism=strict_determinism,
                      early_stop_accuracy=early_stop)
    overrides = {k: v for k, v in
                 {"lr": lr, "momentum": momentum, "batch_size": batch_size}.items()
                 if v is not None}
    cfg = replace(cfg, **overrides)
    out.mkdir(parents=True, exist_ok=True)
    model, history = run_train(cfg, train_recs, test_recs,
                               checkpoint_path=out / "checkpoint.tsvm")
    (out / "history.json").write_text(json.dumps(history.to_jsonable(), indent=2))
    summary = {"arch": arch, "max_total_accuracy": history.max_total_accuracy,
               "best_epoch": history.best_epoch, "epochs_run": len(history.epochs)}
    (out / "metrics.json").write_text(json.dumps(summary, indent=2))
    click.echo(json.dumps(summary))


@cli.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path),
              required=True)
def eval_cmd(checkpoint, manifest_path):
    """Evaluate a checkpoint on a labeled manifest; prints metrics JSON."""
    model, header = load_model(checkpoint)
    records = load_manifest(manifest_path)
    metrics = evaluate(model, records)
    click.echo(json.dumps({
        "arch": header["arch"],
        "total_accuracy": metrics.total_accuracy,
        "per_class_accuracy": list(metrics.per_class_accuracy),
        "confusion": metrics.confusion.tolist(),
    }, indent=2))


@cli.command()
@click.option("--archs", default="all", show_default=True,
              help="'all' or comma list of architecture names.")
@click.option("--aug", default="0-5", show_default=True)
@click.option("--dropout", default="0.0-0.5", show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--train-manifest", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--test-manifest", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--synthetic", is_flag=True, help="Sweep on a generated dataset instead.")
@click.option("--train-per-class", default=100, show_default=True)
@click.option("--test-per-class", default=30, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--early-stop", type=float, default=None)
@click.option("--workers", type=int, default=None,
              help="Parallel sweep cells; defaults to the logical core count.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def sweep(archs, aug, dropout, epochs, train_manifest, test_manifest, synthetic,
          train_per_class, test_per_class, seed, early_stop, workers, out):
    """Run the augmentation-type x dropout grid; writes report.json + report.csv."""
    seed = _seed_option(seed)
    if archs == "all":
        arch_list = list(ArchitectureId)
    else:
        arch_list = [ArchitectureId(a.strip()) for a in archs.split(",")]
    aug_types = _parse_range(aug, int)
    dropouts = _parse_range(dropout, float, step=0.1)
    if synthetic:
        train_recs, test_recs = synthetic_dataset(train_per_class, test_per_class,
                                                  seed=seed)
    elif train_manifest:
        train_recs, test_recs = _records(train_manifest, test_manifest)
    else:
        raise TsvMorphError("pass --synthetic or --train-manifest")
    base = TrainConfig(epochs=epochs, seed=seed, early_stop_accuracy=early_stop)
    if workers is None:
        workers = os.cpu_count() or 1
    report = run_sweep(arch_list, aug_types, dropouts, base, train_recs, test_recs,
                       workers=workers)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    best = {a.value: {"aug_type": c.aug_type, "dropout": c.dropout,
                      "max_accuracy": c.max_accuracy}
            for a, c in report.best_per_arch().items()}
    click.echo(json.dumps({"runs": len(report.cells), "best": best}, indent=2))


@cli.command()
@click.option("--arch", type=click.Choice(ARCH_CHOICES + ["all"]), default="all",
              show_default=True)
def describe(arch):
    """Print the layer table, shape trace, and parameter count."""
    ids = list(ArchitectureId) if arch == "all" else [ArchitectureId(arch)]
    for aid in ids:
        click.echo(architectures.describe(aid), nl=False)
        click.echo()


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--journal-dir", type=click.Path(path_type=Path), default=None,
              help="Session journal directory; defaults to TSVMORPH_JOURNAL_DIR.")
@click.option("--frontend-dir", type=click.Path(path_type=Path), default=None)
def serve(host, port, journal_dir, frontend_dir):
    """Start the labeling service (REST + browser UI when built)."""
    import uvicorn

    from .service import create_app
    app = create_app(journal_dir=str(journal_dir) if journal_dir else None,
                     frontend_dir=str(frontend_dir) if frontend_dir else None)
    uvicorn.run(app, host=host, port=port)


def run(argv=None) -> int:
    """Programmatic entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except TsvMorphError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
