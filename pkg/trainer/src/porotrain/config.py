"""Training hyper-parameters."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError

DEFAULT_LATENT_CHANNELS = 512
DEFAULT_BASE_FILTERS = 64


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of one adversarial training run.

    The defaults reproduce the reference setup: Adam at a constant
    2e-4 with betas (0.5, 0.999), three discriminator updates per
    generator update, labels swapped on every third discriminator step,
    and Gaussian input noise annealed linearly from ``sigma0`` to zero
    over the first ``anneal_epochs`` epochs.
    """

    epochs: int
    ngf: int = DEFAULT_BASE_FILTERS
    ndf: int = DEFAULT_BASE_FILTERS
    d: int = DEFAULT_LATENT_CHANNELS
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 32
    disc_steps_per_gen: int = 3
    sigma0: float = 0.1
    anneal_epochs: int = 300
    label_switch_period: int = 3
    export_every: int = 10
    seed: int = 0

    def __post_init__(self):
        counts = {
            "epochs": self.epochs,
            "ngf": self.ngf,
            "ndf": self.ndf,
            "d": self.d,
            "batch_size": self.batch_size,
            "export_every": self.export_every,
        }
        for name, value in counts.items():
            if not isinstance(value, int) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        periods = {
            "disc_steps_per_gen": self.disc_steps_per_gen,
            "anneal_epochs": self.anneal_epochs,
            "label_switch_period": self.label_switch_period,
        }
        for name, value in periods.items():
            if not isinstance(value, int) or value < 1:
                raise ValidationError(f"{name} must be an integer >= 1, got {value!r}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate!r}")
        for name, value in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0 < value < 1:
                raise ValidationError(f"{name} must lie in (0, 1), got {value!r}")
        if not self.sigma0 > 0:
            raise ValidationError(f"sigma0 must be positive, got {self.sigma0!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")

    def noise_sigma(self, epoch: int) -> float:
        """Input-noise level during a 0-based epoch.

        Shrinks linearly from sigma0 at epoch 0 and stays at zero once
        `anneal_epochs` is reached.
        """
        if epoch < 0:
            raise ValidationError(f"epoch cannot be negative, got {epoch}")
        frac = min(epoch, self.anneal_epochs) / self.anneal_epochs
        return self.sigma0 * (1.0 - frac)
