"""
Discriminator guidance.

A discriminator learns to tell real points from generated ones after both
are noised to a level sigma. At sampling time its log-odds gradient is added
to the denoiser:

    D'(x; sigma) = D(x; sigma) + w sigma^2 grad_x log(d / (1 - d))

where d = sigmoid(logit). Through s = (D - x) / sigma^2 this adds
w grad_x log(density ratio) to the score.
"""

import math
import threading
from typing import Any, List, Optional

import numpy as np
import structlog
import torch
from torch import nn

from aot.errors import GuidanceError, InvalidInputError
from aot.models.dataset import Dataset
from aot.models.guidance import DiscriminatorSpec, DiscriminatorTrainConfig
from aot.models.schedule import NoiseSchedule, SigmaSampler
from aot.models.trajectory import Trajectory
from aot.services.denoiser import (
    DTYPE,
    MLP,
    SigmaEmbedding,
    as_batch,
    as_labels,
    one_hot,
)
from aot.services.sampler import DenoiserFn, SamplerService
from aot.services.schedule import ScheduleService
from aot.services.transport import TransportService
from aot.utils.rng import RngStreams

log = structlog.get_logger()


class Discriminator(nn.Module):
    """MLP mapping (x, sigma embedding, optional one-hot label) to a logit."""

    def __init__(self, spec: DiscriminatorSpec, generator: torch.Generator):
        super().__init__()
        self.spec = spec
        self.embedding = SigmaEmbedding(
            spec.embedding_frequencies, spec.embedding_max_frequency
        )
        in_dim = spec.input_dim + self.embedding.out_dim + spec.class_count
        self.net = MLP(in_dim, spec.hidden_dims, 1, generator, zero_output=False)

    def forward(
        self,
        x: torch.Tensor,
        sigma: torch.Tensor,
        labels: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        scale = 1.0 / torch.sqrt(sigma**2 + self.spec.sigma_data**2)
        features = [scale[:, None] * x, self.embedding(torch.log(sigma) / 4.0)]
        if self.spec.class_count:
            features.append(one_hot(labels, self.spec.class_count))
        return self.net(torch.cat(features, dim=1))[:, 0]


def _class_count(disc: nn.Module) -> int:
    spec = getattr(disc, "spec", None)
    return int(getattr(spec, "class_count", 0))


class GuidedDenoiser:
    """A denoiser with discriminator guidance; counts discriminator calls."""

    def __init__(self, denoiser: DenoiserFn, disc: nn.Module, weight: float):
        if not (math.isfinite(weight) and weight >= 0):
            raise InvalidInputError("guidance weight must be >= 0", field="weight")
        self.denoiser = denoiser
        self.disc = disc
        self.weight = weight
        self.discriminator_calls = 0
        self._calls_lock = threading.Lock()

    def __call__(
        self, x: np.ndarray, sigma: Any, labels: Optional[np.ndarray] = None
    ) -> np.ndarray:
        denoised = self.denoiser(x, sigma, labels)
        if self.weight == 0:
            return denoised
        with self._calls_lock:
            self.discriminator_calls += 1
        grad = GuidanceService.logit_gradient(self.disc, x, sigma, labels)
        sigma_sq = np.square(np.asarray(sigma, dtype=np.float64))
        if np.ndim(sigma_sq) == 1 and np.ndim(x) == 2:
            sigma_sq = sigma_sq[:, None]
        return denoised + self.weight * sigma_sq * grad


class GuidanceService:
    """Training and applying real-vs-generated discriminators."""

    @staticmethod
    def create(
        spec: DiscriminatorSpec, rngs: Optional[RngStreams] = None
    ) -> Discriminator:
        rngs = rngs if rngs is not None else RngStreams(0)
        return Discriminator(spec, rngs.torch_generator())

    @staticmethod
    def logits(
        disc: nn.Module,
        x: np.ndarray,
        sigma: Any,
        labels: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        xt, st, single = as_batch(x, sigma, np.shape(x)[-1])
        lt = as_labels(labels, _class_count(disc), xt.shape[0])
        with torch.no_grad():
            out = disc(xt, st, lt).numpy()
        return out[0] if single else out

    @staticmethod
    def logit_gradient(
        disc: nn.Module,
        x: np.ndarray,
        sigma: Any,
        labels: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """grad_x of the logit, i.e. of log(d / (1 - d)), by reverse mode."""
        xt, st, single = as_batch(x, sigma, np.shape(x)[-1])
        lt = as_labels(labels, _class_count(disc), xt.shape[0])
        xt.requires_grad_(True)
        logits = disc(xt, st, lt)
        (grad,) = torch.autograd.grad(logits.sum(), xt, allow_unused=True)
        if grad is None:
            grad = torch.zeros_like(xt)
        grad = grad.detach().numpy()
        if not np.all(np.isfinite(grad)):
            raise GuidanceError("discriminator gradient is not finite")
        return grad[0] if single else grad

    @staticmethod
    def guided_denoise(
        denoiser: DenoiserFn,
        disc: nn.Module,
        x: np.ndarray,
        sigma: Any,
        weight: float,
        labels: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """D(x; sigma) + w sigma^2 grad_x logit(x, sigma)."""
        if not np.all(np.asarray(sigma) > 0):
            raise InvalidInputError("sigma must be positive", field="sigma")
        return GuidedDenoiser(denoiser, disc, weight)(x, sigma, labels)

    @staticmethod
    def guided_sample(
        denoiser: DenoiserFn,
        disc: nn.Module,
        schedule: NoiseSchedule,
        x_init: np.ndarray,
        weight: float,
        labels: Optional[np.ndarray] = None,
    ) -> Trajectory:
        """
        Heun sampling with the guided denoiser. `nfe` counts base-model calls;
        discriminator calls are reported separately.
        """
        guided = GuidedDenoiser(denoiser, disc, weight)
        traj = SamplerService.heun_sample(guided, schedule, x_init, labels)
        return traj.model_copy(
            update={"discriminator_evaluations": guided.discriminator_calls}
        )

    @staticmethod
    def train_discriminator(
        real: Dataset,
        generated: Dataset,
        use_aot: bool,
        config: DiscriminatorTrainConfig,
        rngs: Optional[RngStreams] = None,
    ) -> Discriminator:
        """
        Binary cross-entropy on noised points, real labeled 1.

        Real and generated points are each drawn into their own pair pool,
        AOT-paired (class-wise when conditional) when `use_aot` is set, and
        noised with separate sigma draws.
        """
        if real.dim != generated.dim:
            raise InvalidInputError(
                f"real dimension {real.dim} does not match generated "
                f"dimension {generated.dim}",
                field="generated",
            )
        conditional = config.conditional
        if conditional and not (real.is_labeled and generated.is_labeled):
            raise InvalidInputError(
                "conditional discriminator needs labeled datasets", field="conditional"
            )

        rngs = rngs if rngs is not None else RngStreams(config.seed)
        real_rngs, generated_rngs = rngs.derive(0), rngs.derive(1)
        class_count = (
            max(real.class_count, generated.class_count) if conditional else 0
        )
        spec = DiscriminatorSpec(
            input_dim=real.dim,
            hidden_dims=list(config.hidden_dims),
            embedding_frequencies=config.embedding_frequencies,
            class_count=class_count,
        )
        disc = GuidanceService.create(spec, rngs)
        optimizer = torch.optim.Adam(disc.parameters(), lr=config.learning_rate)
        sampler = SigmaSampler(p_mean=config.p_mean, p_std=config.p_std)
        mode = "aot" if use_aot else "independent"
        squared = config.pairing_cost == "sqeuclidean"

        def pool(dataset: Dataset, streams: RngStreams):
            return TransportService.make_pair_pool(
                dataset,
                streams,
                pairs=config.pairs,
                minibatch_size=config.minibatch_size,
                mode=mode,
                conditional=conditional,
                augmentation=config.augmentation,
                squared=squared,
            )

        def noised(minibatch, streams: RngStreams):
            sigmas = ScheduleService.sample_sigmas(
                sampler, streams.sigma, minibatch.size
            )
            x = minibatch.points + sigmas[:, None] * minibatch.noises
            labels = as_labels(minibatch.labels, class_count, minibatch.size)
            return (
                torch.tensor(x, dtype=DTYPE),
                torch.tensor(sigmas, dtype=DTYPE),
                labels,
            )

        report_every = max(1, config.refreshes // 10)
        for refresh in range(config.refreshes):
            real_pool = pool(real, real_rngs)
            generated_pool = pool(generated, generated_rngs)
            losses: List[float] = []
            for real_mb, generated_mb in zip(
                real_pool.minibatches(), generated_pool.minibatches()
            ):
                xr, sr, lr = noised(real_mb, real_rngs)
                xg, sg, lg = noised(generated_mb, generated_rngs)
                logits = torch.cat([disc(xr, sr, lr), disc(xg, sg, lg)])
                targets = torch.cat(
                    [
                        torch.ones(xr.shape[0], dtype=DTYPE),
                        torch.zeros(xg.shape[0], dtype=DTYPE),
                    ]
                )
                loss = nn.functional.binary_cross_entropy_with_logits(logits, targets)
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))

            if refresh % report_every == 0 or refresh == config.refreshes - 1:
                log.info(
                    "discriminator pool refreshed",
                    refresh=refresh,
                    mean_loss=math.fsum(losses) / len(losses),
                    use_aot=use_aot,
                )
        disc.eval()
        return disc

    @staticmethod
    def discriminator_accuracy(
        disc: nn.Module,
        real: np.ndarray,
        generated: np.ndarray,
        sigma: float,
        rng: np.random.Generator,
        real_labels: Optional[np.ndarray] = None,
        generated_labels: Optional[np.ndarray] = None,
    ) -> float:
        """Fraction of noised real and generated points classified correctly."""
        real = np.asarray(real, dtype=np.float64)
        generated = np.asarray(generated, dtype=np.float64)
        noisy_real = real + sigma * rng.standard_normal(real.shape)
        noisy_generated = generated + sigma * rng.standard_normal(generated.shape)
        real_logits = GuidanceService.logits(disc, noisy_real, sigma, real_labels)
        generated_logits = GuidanceService.logits(
            disc, noisy_generated, sigma, generated_labels
        )
        correct = int(np.sum(real_logits > 0)) + int(np.sum(generated_logits <= 0))
        return correct / (real.shape[0] + generated.shape[0])
