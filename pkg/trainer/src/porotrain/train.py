"""Adversarial training loop with portable checkpoint export.

The update schedule is fixed: each real batch drives one discriminator
step, and after every `disc_steps_per_gen` discriminator steps the
generator takes one step on fresh noise, so the update stream is
periodic (D D D G ...).  Every `label_switch_period`-th discriminator
step trains against swapped labels.  Gaussian noise of the current
epoch's sigma is added to every discriminator input, real or generated.

One epoch is a sequential randomized pass over the full training set;
the last batch of a pass may be short.  Every update appends one row to
the loss log, so the schedule can be audited from the CSV alone.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import torch

from .config import TrainConfig
from .data import unit_from_gray
from .errors import DivergenceError, ExportError, ShapeError, ValidationError
from .models import Discriminator, Generator, export_weights, init_weights, load_model

LOG_HEADER = "step,phase,loss,sigma,label_switched"
VOLUME_EDGE = 64
PARITY_LATENTS = 5
PARITY_TOL_GRAY = 1e-3


@dataclass(frozen=True)
class TrainOutputs:
    generator_path: str
    discriminator_path: str
    log_path: str


def _prepare_dataset(dataset) -> torch.Tensor:
    """Stack uint8 volumes into a (N, 1, 64, 64, 64) tensor in [-1, 1]."""
    if dataset is None or len(dataset) == 0:
        raise ValidationError("training dataset is empty")
    shape = (VOLUME_EDGE,) * 3
    scaled = []
    for i, vol in enumerate(dataset):
        arr = np.asarray(vol)
        if arr.dtype != np.uint8:
            raise ValidationError(
                f"volume {i} must be uint8 gray values, got {arr.dtype}"
            )
        if arr.shape != shape:
            raise ShapeError(f"volume {i} has shape {arr.shape}, expected {shape}")
        scaled.append(unit_from_gray(arr))
    return torch.from_numpy(np.stack(scaled)).unsqueeze(1)


def round_trip_parity(model: Generator, path, n_latents=PARITY_LATENTS,
                      seed=0, tol=PARITY_TOL_GRAY) -> float:
    """Worst per-voxel gray-level gap between a generator and its export.

    Reloads `path`, runs both models on fixed latents in eval mode, and
    returns the largest difference on the continuous 0..255 gray scale.
    Raises ExportError when it exceeds `tol`.
    """
    reloaded = load_model(path)
    if not isinstance(reloaded, Generator):
        raise ExportError(f"{path} does not hold generator weights")
    g = torch.Generator().manual_seed(int(seed))
    was_training = model.training
    model.eval()
    worst = 0.0
    try:
        with torch.no_grad():
            for _ in range(n_latents):
                z = torch.randn((1, model.d, 1, 1, 1), generator=g)
                gap = (model(z) - reloaded(z)).abs().max()
                worst = max(worst, float(gap) * 127.5)
    finally:
        model.train(was_training)
    if worst > tol:
        raise ExportError(
            f"round-trip parity failed: {worst} gray levels exceeds {tol}"
        )
    return worst


class _LossLog:
    def __init__(self, path):
        self.path = str(path)
        self._fh = open(self.path, "w")
        self._fh.write(LOG_HEADER + "\n")
        self.step = 0

    def row(self, phase, loss, sigma, switched) -> int:
        self.step += 1
        self._fh.write(
            f"{self.step},{phase},{float(loss)!r},{float(sigma)!r},{int(switched)}\n"
        )
        return self.step

    def close(self):
        self._fh.close()


def train(dataset, cfg: TrainConfig, out_dir) -> TrainOutputs:
    """Run adversarial training and export portable weights.

    `dataset` is a list of 64-cube uint8 volumes.  Returns the final
    generator and discriminator file paths plus the loss log; periodic
    checkpoints land in `out_dir` as `*_epoch%05d.g3dw`.  A non-finite
    loss aborts with DivergenceError after writing `diverged_*.g3dw`
    diagnostic checkpoints.  The generator export is verified by a
    round-trip parity check before the result is returned.
    """
    data = _prepare_dataset(dataset)
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)

    gen = Generator(cfg.d, cfg.ngf)
    disc = Discriminator(cfg.ndf)
    init_weights(gen, seed=cfg.seed)
    init_weights(disc, seed=cfg.seed + 1)
    opt_g = torch.optim.Adam(
        gen.parameters(), lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2)
    )
    opt_d = torch.optim.Adam(
        disc.parameters(), lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2)
    )
    bce = torch.nn.BCEWithLogitsLoss()
    rng = torch.Generator().manual_seed(cfg.seed)

    def noisy(x, sigma):
        if sigma == 0.0:
            return x
        return x + sigma * torch.randn(x.shape, generator=rng, dtype=x.dtype)

    def latents(count):
        return torch.randn((count, cfg.d, 1, 1, 1), generator=rng)

    def checkpoint(prefix, suffix=""):
        gen_path = os.path.join(out_dir, f"{prefix}generator{suffix}.g3dw")
        disc_path = os.path.join(out_dir, f"{prefix}discriminator{suffix}.g3dw")
        export_weights(gen, gen_path, latent_channels=cfg.d)
        export_weights(disc, disc_path, latent_channels=cfg.d)
        return gen_path, disc_path

    log = _LossLog(os.path.join(out_dir, "loss_log.csv"))
    d_steps = 0
    try:
        for epoch in range(cfg.epochs):
            sigma = cfg.noise_sigma(epoch)
            order = torch.randperm(data.shape[0], generator=rng)
            for start in range(0, data.shape[0], cfg.batch_size):
                real = data[order[start : start + cfg.batch_size]]

                d_steps += 1
                switched = d_steps % cfg.label_switch_period == 0
                real_label, fake_label = (0.0, 1.0) if switched else (1.0, 0.0)
                with torch.no_grad():
                    fake = gen(latents(real.shape[0]))
                logits_real = disc.forward_logits(noisy(real, sigma))
                logits_fake = disc.forward_logits(noisy(fake, sigma))
                loss_d = bce(logits_real, torch.full_like(logits_real, real_label)) \
                    + bce(logits_fake, torch.full_like(logits_fake, fake_label))
                value_d = float(loss_d.detach())
                step = log.row("disc", value_d, sigma, switched)
                if not math.isfinite(value_d):
                    _abort(checkpoint, "disc", value_d, step, epoch)
                opt_d.zero_grad(set_to_none=True)
                loss_d.backward()
                opt_d.step()

                if d_steps % cfg.disc_steps_per_gen == 0:
                    fake = gen(latents(cfg.batch_size))
                    logits = disc.forward_logits(noisy(fake, sigma))
                    loss_g = bce(logits, torch.ones_like(logits))
                    value_g = float(loss_g.detach())
                    step = log.row("gen", value_g, sigma, False)
                    if not math.isfinite(value_g):
                        _abort(checkpoint, "gen", value_g, step, epoch)
                    opt_g.zero_grad(set_to_none=True)
                    loss_g.backward()
                    opt_g.step()

            if (epoch + 1) % cfg.export_every == 0:
                checkpoint("", f"_epoch{epoch + 1:05d}")
        gen_path, disc_path = checkpoint("")
    finally:
        log.close()
    round_trip_parity(gen, gen_path)
    return TrainOutputs(gen_path, disc_path, log.path)


def _abort(checkpoint, phase, value, step, epoch):
    gen_path, disc_path = checkpoint("diverged_")
    raise DivergenceError(
        f"non-finite {phase} loss {value} at step {step} (epoch {epoch + 1}); "
        f"diagnostic checkpoints: {gen_path}, {disc_path}"
    )
