"""
Training service.

One refresh draws a pair pool of N (point, noise) pairs, pairs them (AOT or
identity), then consumes every pair exactly once in minibatches of B. Each
minibatch draws one sigma per element, takes an Adam step on the weighted
denoising loss and updates the EMA copy of the parameters.
"""

import copy
import math
import time
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np
import structlog
import torch
from pydantic import BaseModel, ConfigDict

from aot.errors import InvalidInputError
from aot.models.dataset import Dataset
from aot.models.schedule import SigmaSampler
from aot.models.training import (
    RefreshRecord,
    TrainConfig,
    TrainLog,
)
from aot.services.checkpoint import CheckpointService
from aot.services.denoiser import DTYPE, DenoiserModel, DenoiserService
from aot.services.schedule import ScheduleService
from aot.services.transport import TransportService
from aot.utils.rng import RngStreams

log = structlog.get_logger()

RefreshCallback = Callable[[int, DenoiserModel, RefreshRecord], None]


class TrainRun(BaseModel):
    """Online and EMA models of a finished run, with its log."""

    model: DenoiserModel
    ema: DenoiserModel
    log: TrainLog

    model_config = ConfigDict(arbitrary_types_allowed=True)


def _assign_grads(model: torch.nn.Module, flat: np.ndarray) -> None:
    offset = 0
    for param in model.parameters():
        count = param.numel()
        chunk = torch.tensor(flat[offset : offset + count], dtype=DTYPE)
        param.grad = chunk.view_as(param)
        offset += count


def _update_ema(ema: torch.nn.Module, model: torch.nn.Module, decay: float) -> None:
    with torch.no_grad():
        for target, source in zip(ema.parameters(), model.parameters()):
            target.mul_(decay).add_(source, alpha=1.0 - decay)


class TrainingService:
    """The pair-pool training loop."""

    @staticmethod
    def validate(config: TrainConfig, dataset: Dataset) -> None:
        if config.conditional and not dataset.is_labeled:
            raise InvalidInputError(
                "conditional training requires a labeled dataset", field="conditional"
            )
        if config.minibatch_size > config.pairs:
            raise InvalidInputError(
                "minibatch_size exceeds pairs", field="minibatch_size"
            )
        if config.pairs % config.minibatch_size:
            raise InvalidInputError(
                "pairs must be divisible by minibatch_size", field="pairs"
            )

    @staticmethod
    def run(
        config: TrainConfig,
        dataset: Dataset,
        rngs: Optional[RngStreams] = None,
        on_refresh: Optional[RefreshCallback] = None,
        checkpoint_dir: Optional[Path] = None,
    ) -> TrainRun:
        TrainingService.validate(config, dataset)
        rngs = rngs if rngs is not None else RngStreams(config.seed)

        spec = config.denoiser_spec(dataset.dim, dataset.class_count)
        model = DenoiserService.create(spec, rngs)
        ema = copy.deepcopy(model)
        optimizer = torch.optim.Adam(
            model.parameters(),
            lr=config.learning_rate,
            betas=tuple(config.adam_betas),
            eps=config.adam_eps,
        )
        sampler = SigmaSampler(p_mean=config.p_mean, p_std=config.p_std)
        squared = config.pairing_cost == "sqeuclidean"

        log.info(
            "training started",
            pairs=config.pairs,
            minibatch_size=config.minibatch_size,
            pairing=config.pairing,
            conditional=config.conditional,
            refreshes=config.refreshes,
            parameters=DenoiserService.parameter_count(model),
        )

        records: List[RefreshRecord] = []
        checkpoints: List[str] = []
        report_every = max(1, config.refreshes // 10)
        for refresh in range(config.refreshes):
            started = time.perf_counter()
            pool = TransportService.make_pair_pool(
                dataset,
                rngs,
                pairs=config.pairs,
                minibatch_size=config.minibatch_size,
                mode=config.pairing,
                conditional=config.conditional,
                augmentation=config.augmentation,
                squared=squared,
            )

            losses = []
            for minibatch in pool.minibatches():
                sigmas = ScheduleService.sample_sigmas(
                    sampler, rngs.sigma, minibatch.size
                )
                bundle = DenoiserService.loss_and_grad(
                    model, minibatch, sigmas, config.loss_weighting
                )
                optimizer.zero_grad(set_to_none=True)
                _assign_grads(model, bundle.grads)
                optimizer.step()
                _update_ema(ema, model, config.ema_decay)
                losses.append(bundle.loss)
                log.debug("minibatch", refresh=refresh, loss=bundle.loss)

            record = RefreshRecord(
                refresh=refresh,
                mean_loss=math.fsum(losses) / len(losses),
                mean_pairing_cost=pool.mean_paired_cost,
                mean_independent_cost=pool.mean_independent_cost,
                wall_time=time.perf_counter() - started,
            )
            if not math.isfinite(record.mean_loss):
                raise InvalidInputError(
                    f"training diverged at refresh {refresh}", field="learning_rate"
                )
            records.append(record)

            last = refresh == config.refreshes - 1
            if refresh % report_every == 0 or last:
                log.info(
                    "pool refreshed",
                    refresh=refresh,
                    mean_loss=record.mean_loss,
                    mean_pairing_cost=record.mean_pairing_cost,
                    mean_independent_cost=record.mean_independent_cost,
                )
            if on_refresh is not None:
                on_refresh(refresh, ema, record)
            if (
                checkpoint_dir is not None
                and config.checkpoint_every
                and ((refresh + 1) % config.checkpoint_every == 0 or last)
            ):
                path = Path(checkpoint_dir) / f"checkpoint-{refresh + 1:06d}.json"
                CheckpointService.save_checkpoint(
                    model,
                    path,
                    ema=ema,
                    config=config.model_dump(mode="json"),
                    normalization=dataset.normalization,
                    rng=rngs.describe(),
                )
                checkpoints.append(str(path))

        return TrainRun(
            model=model,
            ema=ema,
            log=TrainLog(records=records, checkpoints=checkpoints),
        )

    @staticmethod
    def train(
        config: TrainConfig,
        dataset: Dataset,
        rngs: Optional[RngStreams] = None,
        on_refresh: Optional[RefreshCallback] = None,
    ) -> Tuple[DenoiserModel, TrainLog]:
        """Train and return the EMA model with the per-refresh log."""
        result = TrainingService.run(config, dataset, rngs, on_refresh)
        return result.ema, result.log
