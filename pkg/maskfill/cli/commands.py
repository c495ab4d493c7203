import logging
from contextlib import nullcontext
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np
import pandas as pd

from .. import setup_logging, create_app
from ..bus import create_bus, get_bus, SampleSkipped
from ..config import load_config
from ..datapipe import (
    FaceSample,
    FULL_RESOLUTION,
    build_pyramid,
    load_dataset,
    save_archive,
    load_archive,
    archive_digest,
    list_images,
    find_landmark_file,
    subject_of,
    read_image,
    write_image,
    read_landmarks,
    preprocess,
)
from ..evaluation import (
    FPR_TARGETS,
    EmbeddingCache,
    embed_directory,
    embed_templates,
    mean_correlation,
    verify,
)
from ..losses import default_extractors, load_extractor
from ..postproc import (
    read_mask,
    write_mask,
    foreground_mask,
    salient_contour_interior,
    replace_background,
)
from ..training import TrainConfig, RunDirectory, load_checkpoint, hallucinate, train
from ..errors import ConfigError, DataError, MaskfillError
from .plots import read_metrics, plot_losses, comparison_sheet, snapshot_grid

logger = logging.getLogger(__name__)


class MaskfillGroup(click.Group):
    """Usage and config problems exit with 2, every other failure with 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as e:
            raise click.UsageError(str(e), ctx) from e
        except MaskfillError as e:
            raise click.ClickException(str(e)) from e


@click.group(cls=MaskfillGroup)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    help="JSON config file.",
)
@click.option("-v", "--verbose", is_flag=True, help="Log DEBUG messages to the console.")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Hallucinate the context around masked faces."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["level"] = logging.DEBUG if verbose else logging.INFO


def _config(ctx, overrides=None):
    return load_config(ctx.obj["config_path"], overrides=overrides)


def _start_logging(ctx, log_dir: Optional[Path] = None):
    setup_logging(
        str(log_dir) if log_dir else None,
        console_level=ctx.obj["level"],
        name=f"maskfill-{ctx.info_name}",
    )


@cli.command("preprocess")
@click.argument("in_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option(
    "--landmarks",
    "landmarks_dir",
    required=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Landmark files mirroring the image tree.",
)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--mirror/--no-mirror", default=False, help="Add horizontally flipped copies.")
@click.pass_context
def cmd_preprocess(ctx, in_dir, landmarks_dir, out_path, mirror):
    """Align, mask and downsample a directory of face images into a sample archive."""
    _start_logging(ctx)
    skipped = []
    with get_bus().connected(SampleSkipped, lambda path: skipped.append(path)):
        pyramids = [build_pyramid(s) for s in load_dataset(in_dir, landmarks_dir, mirror)]
    save_archive(out_path, pyramids)
    click.echo(f"kept {len(pyramids)} skipped {len(skipped)}", err=True)
    click.echo(f"{out_path} sha256:{archive_digest(out_path)}")


@cli.command("train")
@click.option(
    "--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False)
)
@click.option("--run-dir", type=click.Path(path_type=Path), help="Defaults to RUN_DIR/<seed>.")
@click.option("--regime", type=click.Choice(["cascaded", "progressive"]))
@click.option("--seed", type=int)
@click.option("--epochs", type=int)
@click.option("--iterations", type=int)
@click.option("--batch-size", type=int)
@click.option("--snapshot-every", type=int)
@click.option("--channel-scale", type=float)
@click.option("--use-l2-pixel", is_flag=True)
@click.option("--disable-adv", is_flag=True)
@click.option("--disable-id", is_flag=True)
@click.option("--disable-pc", is_flag=True)
@click.option("--stop-gradient", is_flag=True)
@click.pass_context
def cmd_train(ctx, data_path, run_dir, **options):
    """Train a cascade on a sample archive."""
    overrides = {k: v for k, v in options.items() if v is not None and v is not False}
    config = _config(ctx, overrides)
    train_config = TrainConfig.from_dict(config.TRAIN)
    run_dir = run_dir or Path(config.RUN_DIR) / f"{train_config.regime}-{train_config.seed}"
    _start_logging(ctx, Path(run_dir) / "logs")

    weights = train_config.weights
    click.echo(
        f"λ1={weights.perceptual} λ2={weights.adversarial} "
        f"λ3={weights.identity} λ4={weights.total_variation}",
        err=True,
    )
    create_bus(config)
    use_db = config.SIGNALS.get("logging_backend") == "db"
    with create_app(config).app_context() if use_db else nullcontext():
        extractors = default_extractors(config.EXTRACTORS)
        checkpoint = train(load_archive(data_path), train_config, run_dir, extractors)
    click.echo(str(RunDirectory(run_dir).checkpoint_path))
    logger.info("Checkpoint %s after %d iterations", checkpoint.path, checkpoint.iteration)


def _collect_inputs(paths: Tuple[Path, ...]) -> List[Tuple[Path, Path, str]]:
    """(image path, input root, subject) for every file given or found under a directory."""
    found = []
    for path in paths:
        if path.is_dir():
            found.extend((p, path, subject_of(p, path)) for p in list_images(path))
        else:
            found.append((path, path.parent, path.parent.name))
    if not found:
        raise DataError("No input images.")
    return found


def _load_input(
    path: Path, root: Path, masks_dir: Optional[Path], landmarks_dir: Optional[Path]
):
    """A 128x128 masked face and its mask."""
    image = read_image(path)
    if landmarks_dir is not None:
        landmark_file = find_landmark_file(path, root, landmarks_dir)
        if landmark_file is None:
            raise DataError(f"No landmarks for {path} in {landmarks_dir}")
        sample = preprocess(image, read_landmarks(landmark_file))
        return sample.masked, sample.mask
    if masks_dir is not None:
        mask = read_mask(masks_dir / path.relative_to(root).with_suffix(".png"))
        mask = (mask >= 0.5).astype(np.float32)
    else:
        mask = (image.max(axis=-1) > 0).astype(np.float32)
    if image.shape[:2] != (FULL_RESOLUTION, FULL_RESOLUTION) or mask.shape != image.shape[:2]:
        raise DataError(f"{path} is not a {FULL_RESOLUTION}x{FULL_RESOLUTION} aligned face")
    return FaceSample.from_mask(image, mask).masked, mask


@cli.command("hallucinate")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument(
    "images", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path)
)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option(
    "--masks",
    "masks_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Mask PNGs mirroring the input tree; by default nonzero pixels are the face.",
)
@click.option(
    "--landmarks",
    "landmarks_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Landmark files of unaligned inputs, mirroring the input tree.",
)
@click.option("--grid", "grid_path", type=click.Path(path_type=Path))
@click.option(
    "--keep-labels", is_flag=True, help="Write outputs per subject plus labels.csv."
)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.pass_context
def cmd_hallucinate(
    ctx, checkpoint, images, out_dir, masks_dir, landmarks_dir, grid_path, keep_labels, batch_size
):
    """Fill in context and background around masked faces."""
    _start_logging(ctx)
    model = load_checkpoint(checkpoint).build_cascade()
    inputs = _collect_inputs(images)
    loaded = [_load_input(path, root, masks_dir, landmarks_dir) for path, root, _ in inputs]
    masked = np.stack([m for m, _ in loaded])
    masks = np.stack([m for _, m in loaded])
    outputs = np.concatenate(
        [
            hallucinate(model, masked[i : i + batch_size], masks[i : i + batch_size])
            for i in range(0, len(masked), batch_size)
        ]
    )

    labels = []
    for (path, _, subject), output in zip(inputs, outputs):
        target = (out_dir / subject if keep_labels else out_dir) / f"{path.stem}.png"
        write_image(target, output)
        labels.append((str(target), subject))
    if keep_labels:
        pd.DataFrame(labels, columns=["path", "subject"]).to_csv(out_dir / "labels.csv", index=False)
    if grid_path is not None:
        comparison_sheet(masked, outputs, grid_path)
    click.echo(f"wrote {len(outputs)} images to {out_dir}")


def _recognition(config, extractor_path):
    if extractor_path:
        return load_extractor(extractor_path)
    return default_extractors(config.EXTRACTORS)["recognition"]


@cli.command("evaluate")
@click.argument("real_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("synth_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--extractor", "extractor_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), help="Where CSVs go.")
@click.option("--templates", is_flag=True, help="Pool <subject>/<template>/<media>/ trees.")
@click.option("--cache", "cache_path", type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def cmd_evaluate(ctx, real_dir, synth_dir, extractor_path, out_dir, templates, cache_path):
    """Verification of original against hallucinated images."""
    _start_logging(ctx)
    extractor = _recognition(_config(ctx), extractor_path)
    cache = EmbeddingCache(cache_path)
    embed = embed_templates if templates else embed_directory
    real = embed(real_dir, extractor, cache)
    synth = embed(synth_dir, extractor, cache)

    results = {}
    for name, embeddings in (("Original", real), ("Ours", synth)):
        result = verify([e.vector for e in embeddings], [e.subject for e in embeddings])
        if result.degenerate:
            click.echo(
                f"warning: {name} has a single subject; TPR reported as 1.0", err=True
            )
        results[name] = result
    table = pd.DataFrame(
        {name: [r.tpr_at[f] for f in FPR_TARGETS] for name, r in results.items()},
        index=pd.Index([f"TPR@FPR={f:g}" for f in FPR_TARGETS], name="metric"),
    )
    real_vectors = [e.vector for e in real]
    correlations = pd.Series(
        {
            "real vs real": mean_correlation(real_vectors, real_vectors),
            "real vs synthetic": mean_correlation(real_vectors, [e.vector for e in synth]),
        },
        name="mean correlation",
    )
    click.echo(table.to_string(float_format=lambda v: f"{v:.3f}"))
    click.echo(correlations.to_string(float_format=lambda v: f"{v:.3f}"))

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_dir / "report.csv")
        correlations.to_csv(out_dir / "correlations.csv")
        for name, result in results.items():
            result.to_csv(out_dir / f"roc_{name.lower()}.csv")


@cli.command("replace-bg")
@click.argument("image_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("background_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--person", "person_path", required=True, type=click.Path(exists=True, dir_okay=False),
    help="Person segmentation, 8-bit grayscale PNG.",
)
@click.option(
    "--contour", "contour_path", type=click.Path(exists=True, dir_okay=False),
    help="Salient-contour interior, 8-bit grayscale PNG.",
)
@click.option("--saliency", is_flag=True, help="Estimate the contour interior from the image.")
@click.option("--levels", type=int, help="Pyramid depth (POSTPROC levels by default).")
@click.option("--feather", type=float, default=1.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--mask-out", type=click.Path(path_type=Path), help="Also write the mask.")
@click.pass_context
def cmd_replace_bg(
    ctx, image_path, background_path, person_path, contour_path, saliency, levels, feather,
    out_path, mask_out,
):
    """Blend a new background behind a person."""
    _start_logging(ctx)
    config = _config(ctx)
    levels = levels or config.POSTPROC["levels"]
    image = read_image(image_path)
    person = read_mask(person_path)
    contour = None
    if contour_path:
        contour = read_mask(contour_path)
    elif saliency:
        contour = salient_contour_interior(image)
    if person.shape != image.shape[:2]:
        raise DataError(f"Person mask {person.shape} does not match image {image.shape}")
    result = replace_background(
        image, read_image(background_path), person, contour, levels, feather
    )
    write_image(out_path, result)
    if mask_out is not None:
        if contour is None:
            contour = np.zeros_like(person)
        write_mask(mask_out, foreground_mask(person, contour, feather))
    click.echo(str(out_path))


@cli.command("plot")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), help="Defaults to RUN_DIR/plots.")
@click.option(
    "--data", "data_path", type=click.Path(exists=True, dir_okay=False),
    help="Sample archive for the snapshot grid instead of the run's own preview.",
)
@click.option("--rows", type=int, default=4, show_default=True)
@click.pass_context
def cmd_plot(ctx, run_dir, out_dir, data_path, rows):
    """Loss curves and the snapshot grid of a run."""
    _start_logging(ctx)
    run = RunDirectory(run_dir)
    out_dir = out_dir or run.path / "plots"
    written = [plot_losses(read_metrics(run.metrics_path), out_dir / "losses.png")]

    snapshot_paths = run.snapshots()
    if snapshot_paths and (data_path or run.preview_path.exists()):
        if data_path:
            top = [p[FULL_RESOLUTION] for p in load_archive(data_path)[:rows]]
            originals = np.stack([s.ground_truth for s in top])
            masked = np.stack([s.masked for s in top])
            masks = np.stack([s.mask for s in top])
        else:
            originals, masked, masks = (a[:rows] for a in run.read_preview())
        checkpoints = [load_checkpoint(p) for p in snapshot_paths]
        columns = [hallucinate(c, masked, masks) for c in checkpoints]
        written.append(
            snapshot_grid(
                originals, masked, columns, [c.epoch for c in checkpoints],
                out_dir / "snapshots.png",
            )
        )
    elif snapshot_paths:
        logger.info("No preview in %s and no --data given, skipping the snapshot grid", run.path)
    for path in written:
        click.echo(str(path))


def main():
    cli(prog_name="maskfill")
