import math
import time
import logging
from contextlib import contextmanager
from typing import Dict, Iterable, List, Optional

import torch
import torch.nn as nn

from .config import TrainConfig
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint
from .inference import cascade_forward
from .run import RunDirectory, SnapshotWriter
from ..bus import (
    get_bus,
    TrainingStarted,
    IterationCompleted,
    EpochCompleted,
    StageCompleted,
    TrainingDiverged,
    TrainingFinished,
)
from ..datapipe import ImagePyramid, PyramidBatch, iterate_batches, RESOLUTIONS
from ..losses import (
    LossTerms,
    default_extractors,
    pixel_loss,
    perceptual_loss,
    adversarial_loss_g,
    identity_loss,
    tv_loss,
    discriminator_real_loss,
    discriminator_fake_loss,
)
from ..netblocks import Cascade, transfer_weights
from ..errors import CheckpointError, EmptyDatasetError, TrainingDivergedError

logger = logging.getLogger(__name__)


@contextmanager
def frozen(module: nn.Module):
    """
    Hold `module` fixed for the duration of the block: no parameter
    gradients, and eval mode so batch-norm statistics are not updated.
    """
    params = list(module.parameters())
    flags = [p.requires_grad for p in params]
    training = module.training
    for p in params:
        p.requires_grad_(False)
    module.eval()
    try:
        yield module
    finally:
        module.train(training)
        for p, flag in zip(params, flags):
            p.requires_grad_(flag)


class Trainer:
    """
    Drives one run: builds the cascade, steps the optimizers, writes the
    run directory and reports progress on the bus.

    Per iteration every discriminator takes a step on the real and then on
    the generated batch, lowest resolution first; then one generator step
    minimizes the sum of the per-resolution losses over all generator and
    upscaler weights.
    """

    def __init__(
        self,
        config: TrainConfig,
        run_dir,
        extractors: Optional[Dict[str, nn.Module]] = None,
    ):
        self.config = config
        self.weights = config.weights
        self.run = RunDirectory(run_dir)
        self.extractors = extractors or default_extractors()
        self.iteration = 0

    def _adam(self, params: Iterable[nn.Parameter], lr: float) -> torch.optim.Adam:
        return torch.optim.Adam(
            params, lr=lr, betas=self.config.adam_betas, eps=self.config.adam_eps
        )

    def _optimizers(self, cascade: Cascade):
        g_opt = self._adam(cascade.generator_parameters(), self.config.generator_lr)
        d_opts = {
            r: self._adam(cascade.discriminator(r).parameters(), self.config.discriminator_lr)
            for r in cascade.resolutions
        }
        return g_opt, d_opts

    def _terms(
        self, cascade: Cascade, resolution: int, composed: torch.Tensor, gt: torch.Tensor
    ) -> LossTerms:
        weights = self.weights
        terms = LossTerms(pixel=pixel_loss(gt, composed, l2=self.config.use_l2_pixel))
        if weights.perceptual > 0:
            terms.perceptual = perceptual_loss(composed, gt, self.extractors["perceptual"])
        if weights.adversarial > 0:
            scores = cascade.discriminator(resolution)(composed)
            terms.adversarial = adversarial_loss_g(scores)
        if weights.identity > 0:
            terms.identity = identity_loss(composed, gt, self.extractors["identity"])
        if weights.total_variation > 0:
            terms.total_variation = tv_loss(composed)
        return terms

    def _discriminator_step(
        self,
        cascade: Cascade,
        resolution: int,
        optimizer: torch.optim.Optimizer,
        real: torch.Tensor,
        fake: torch.Tensor,
    ) -> float:
        discriminator = cascade.discriminator(resolution)
        total = 0.0
        for loss_fn, images in (
            (lambda s: discriminator_real_loss(s, self.config.real_label), real),
            (discriminator_fake_loss, fake),
        ):
            optimizer.zero_grad()
            loss = loss_fn(discriminator(images))
            value = float(loss.detach())
            if not math.isfinite(value):
                self._diverge(cascade, resolution, "d_loss")
            loss.backward()
            optimizer.step()
            total += value
        return total

    def _step(self, cascade: Cascade, batch: PyramidBatch, g_opt, d_opts) -> Dict[int, Dict]:
        outputs = cascade_forward(cascade, batch, self.config.stop_gradient)
        for r in cascade.resolutions:
            if not bool(torch.isfinite(outputs[r]).all()):
                self._diverge(cascade, r, "output")

        d_losses: Dict[int, float] = {}
        if self.weights.adversarial > 0:
            for r in cascade.resolutions:
                d_losses[r] = self._discriminator_step(
                    cascade, r, d_opts[r], batch[r][1], outputs[r].detach()
                )

        with frozen(cascade.discriminators):
            terms = {
                r: self._terms(cascade, r, outputs[r], batch[r][1])
                for r in cascade.resolutions
            }
            totals = {r: terms[r].total(self.weights) for r in cascade.resolutions}

            rows = {}
            for r in cascade.resolutions:
                row = terms[r].as_row()
                row["l_total"] = float(totals[r].detach())
                row["d_loss"] = d_losses.get(r)
                rows[r] = row
            self._check_finite(cascade, rows)

            g_opt.zero_grad()
            sum(totals.values()).backward()
        g_opt.step()
        return rows

    def _check_finite(self, cascade: Cascade, rows: Dict[int, Dict]):
        for resolution, row in rows.items():
            for term, value in row.items():
                if value is not None and not math.isfinite(value):
                    self._diverge(cascade, resolution, term)

    def _diverge(self, cascade: Cascade, resolution: int, term: str):
        checkpoint = Checkpoint.from_cascade(
            cascade,
            self.config.regime,
            iteration=self.iteration,
            config_hash=self.config.config_hash(),
        )
        path = save_checkpoint(self.run.checkpoint_path, checkpoint)
        if self.run.metrics is not None:
            self.run.metrics.flush()
        get_bus().emit(
            TrainingDiverged(
                iteration=self.iteration, resolution=resolution, term=term, path=str(path)
            )
        )
        raise TrainingDivergedError(
            f"{term} of block_{resolution} is not finite at iteration {self.iteration}; "
            f"last weights saved to {path}",
            checkpoint_path=path,
        )

    def _train_state(self, g_opt, d_opts, batch_generator: torch.Generator, epoch: int):
        return {
            "generator_optimizer": g_opt.state_dict(),
            "discriminator_optimizers": {str(r): o.state_dict() for r, o in d_opts.items()},
            "batch_generator": batch_generator.get_state(),
            "iteration": self.iteration,
            "epoch": epoch,
        }

    def _train_stage(
        self,
        cascade: Cascade,
        pyramids: List[ImagePyramid],
        stage: Optional[int],
        g_opt,
        d_opts,
        batch_generator: torch.Generator,
        snapshots: Optional[SnapshotWriter] = None,
        first_epoch: int = 1,
    ) -> int:
        """Train until the epoch or iteration budget runs out; returns the last epoch."""
        config = self.config
        bus = get_bus()
        stage_iterations = 0
        epoch = first_epoch - 1
        done = False
        while not done:
            epoch += 1
            if config.iterations is None and epoch > config.epochs:
                return epoch - 1
            for batch in iterate_batches(pyramids, config.batch_size, batch_generator):
                started = time.perf_counter()
                self.iteration += 1
                stage_iterations += 1
                rows = self._step(cascade, batch, g_opt, d_opts)
                for resolution, row in rows.items():
                    self.run.metrics.write(
                        {
                            "iteration": self.iteration,
                            "epoch": epoch,
                            "stage": stage,
                            "resolution": resolution,
                            **row,
                        }
                    )
                self.run.timings.write(
                    {"iteration": self.iteration, "seconds": time.perf_counter() - started}
                )
                top = cascade.top_resolution
                bus.emit(
                    IterationCompleted(
                        iteration=self.iteration,
                        epoch=epoch,
                        resolution=top,
                        l_total=rows[top]["l_total"],
                    )
                )
                if config.iterations is not None and stage_iterations >= config.iterations:
                    done = True
                    break
            self.run.metrics.flush()
            self.run.timings.flush()
            bus.emit(EpochCompleted(epoch=epoch, stage=stage, iterations=self.iteration))
            if snapshots is not None:
                if epoch % config.snapshot_every == 0:
                    checkpoint = Checkpoint.from_cascade(
                        cascade,
                        config.regime,
                        epoch=epoch,
                        iteration=self.iteration,
                        stage=stage,
                        config_hash=config.config_hash(),
                        train_state=self._train_state(g_opt, d_opts, batch_generator, epoch),
                    )
                    snapshots.submit(self.run.snapshot_path(epoch), checkpoint)
                snapshots.drain()
        return epoch

    def _start(self, regime: str, pyramids: List[ImagePyramid]):
        torch.manual_seed(self.config.seed)
        self.run.write_config(self.config.as_dict())
        self.run.write_preview(pyramids)
        get_bus().emit(
            TrainingStarted(run_dir=str(self.run.path), regime=regime, seed=self.config.seed)
        )
        logger.info(
            "Training %s run in %s (seed %d)", regime, self.run.path, self.config.seed
        )

    def _finish(self, checkpoint: Checkpoint, started: float) -> Checkpoint:
        path = save_checkpoint(self.run.checkpoint_path, checkpoint)
        seconds = time.perf_counter() - started
        get_bus().emit(
            TrainingFinished(path=str(path), iterations=self.iteration, seconds=seconds)
        )
        logger.info("Finished after %d iterations, %.1f s", self.iteration, seconds)
        return checkpoint

    def train_cascaded(
        self, pyramids: Iterable[ImagePyramid], resume: Optional[Checkpoint] = None
    ) -> Checkpoint:
        pyramids = list(pyramids)
        if not pyramids:
            raise EmptyDatasetError("Nothing to train on.")
        config = self.config
        cascade = Cascade(
            RESOLUTIONS, config.channel_scale, torch.Generator().manual_seed(config.seed)
        ).train()
        g_opt, d_opts = self._optimizers(cascade)
        batch_generator = torch.Generator().manual_seed(config.seed)
        first_epoch = 1
        if resume is not None:
            first_epoch = self._restore(resume, cascade, g_opt, d_opts, batch_generator)

        with self.run:
            started = time.perf_counter()
            self._start("cascaded", pyramids)
            snapshots = SnapshotWriter()
            try:
                epoch = self._train_stage(
                    cascade, pyramids, None, g_opt, d_opts, batch_generator,
                    snapshots=snapshots, first_epoch=first_epoch,
                )
            finally:
                snapshots.close()
            checkpoint = Checkpoint.from_cascade(
                cascade,
                "cascaded",
                epoch=epoch,
                iteration=self.iteration,
                config_hash=config.config_hash(),
                train_state=self._train_state(g_opt, d_opts, batch_generator, epoch),
            )
            return self._finish(checkpoint, started)

    def _restore(self, resume: Checkpoint, cascade, g_opt, d_opts, batch_generator) -> int:
        if resume.regime != "cascaded" or resume.train_state is None:
            raise CheckpointError("Only cascaded checkpoints with a train state can resume.")
        try:
            cascade.load_state_dict(resume.state)
            state = resume.train_state
            g_opt.load_state_dict(state["generator_optimizer"])
            for r, optimizer in d_opts.items():
                optimizer.load_state_dict(state["discriminator_optimizers"][str(r)])
            batch_generator.set_state(state["batch_generator"])
        except (KeyError, RuntimeError, ValueError) as e:
            raise CheckpointError(f"Cannot resume from {resume.path}: {e}") from e
        self.iteration = resume.iteration
        logger.info("Resuming after epoch %d, iteration %d", resume.epoch, resume.iteration)
        return resume.epoch + 1

    def train_progressive(self, pyramids: Iterable[ImagePyramid]) -> Checkpoint:
        """
        Grow from block_8 to block_128, one stage per resolution. Each stage
        starts from the previous stage's saved weights wherever layer names
        and shapes agree; the rest keeps its fresh He initialization.
        """
        pyramids = list(pyramids)
        if not pyramids:
            raise EmptyDatasetError("Nothing to train on.")
        config = self.config
        init_generator = torch.Generator().manual_seed(config.seed)
        batch_generator = torch.Generator().manual_seed(config.seed)

        with self.run:
            started = time.perf_counter()
            self._start("progressive", pyramids)
            previous: Optional[Checkpoint] = None
            for stage, resolution in enumerate(RESOLUTIONS):
                cascade = Cascade((resolution,), config.channel_scale, init_generator).train()
                if previous is not None:
                    self._grow(load_checkpoint(previous.path), cascade)
                g_opt, d_opts = self._optimizers(cascade)
                epoch = self._train_stage(
                    cascade, pyramids, stage, g_opt, d_opts, batch_generator
                )
                checkpoint = Checkpoint.from_cascade(
                    cascade,
                    "progressive",
                    epoch=epoch,
                    iteration=self.iteration,
                    stage=stage,
                    config_hash=config.config_hash(),
                )
                path = save_checkpoint(self.run.stage_path(stage, resolution), checkpoint)
                get_bus().emit(
                    StageCompleted(
                        stage=stage,
                        resolution=resolution,
                        parameter_count=cascade.generator(resolution).parameter_count,
                        path=str(path),
                    )
                )
                previous = checkpoint
            return self._finish(previous, started)

    @staticmethod
    def _grow(previous: Checkpoint, cascade: Cascade) -> List[str]:
        source = previous.build_cascade()
        low, high = previous.top_resolution, cascade.top_resolution
        copied = transfer_weights(source.generator(low), cascade.generator(high))
        copied_d = transfer_weights(source.discriminator(low), cascade.discriminator(high))
        logger.info(
            "block_%d starts from %d generator and %d discriminator tensors of block_%d",
            high, len(copied), len(copied_d), low,
        )
        return copied


def train_cascaded(
    pyramids: Iterable[ImagePyramid],
    config: TrainConfig,
    run_dir,
    extractors: Optional[Dict[str, nn.Module]] = None,
    resume: Optional[Checkpoint] = None,
) -> Checkpoint:
    return Trainer(config, run_dir, extractors).train_cascaded(pyramids, resume=resume)


def train_progressive(
    pyramids: Iterable[ImagePyramid],
    config: TrainConfig,
    run_dir,
    extractors: Optional[Dict[str, nn.Module]] = None,
) -> Checkpoint:
    return Trainer(config, run_dir, extractors).train_progressive(pyramids)


def train(pyramids, config: TrainConfig, run_dir, extractors=None) -> Checkpoint:
    """Dispatch on `config.regime`."""
    if config.regime == "progressive":
        return train_progressive(pyramids, config, run_dir, extractors)
    return train_cascaded(pyramids, config, run_dir, extractors)
