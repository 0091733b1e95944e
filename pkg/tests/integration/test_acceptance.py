"""
Desk-scale checks of the pairing effect. Twin models share every random
substream and differ only in how noise is paired with data.

Run with `pytest --run-slow`.
"""

from typing import Dict, List

import numpy as np
import pytest
from scipy.stats import binomtest

from aot.models.dataset import DatasetConfig
from aot.models.training import TrainConfig
from aot.services.datasets import build_dataset
from aot.services.denoiser import DenoiserService
from aot.services.diagnostics import DiagnosticsService
from aot.services.sampler import SamplerService
from aot.services.schedule import ScheduleService
from aot.services.training import TrainingService
from aot.services.transport import TransportService
from aot.utils.rng import RngStreams

pytestmark = [pytest.mark.integration, pytest.mark.slow]

SEED_PAIRS = 20
TRAJECTORIES = 200
MODES = [[2.0, 0.0], [-2.0, 0.0]]


def _sign_test(wins: int, trials: int) -> float:
    return binomtest(wins, trials, 0.5, alternative="greater").pvalue


def _twin_metrics(seed: int, pairing: str) -> Dict[str, float]:
    rngs = RngStreams(seed)
    dataset = build_dataset(
        DatasetConfig(
            generator="mixture", params={"means": MODES, "std": 0.25}, count=4096
        ),
        rngs.derive(0).data,
    )
    config = TrainConfig(
        pairs=256,
        minibatch_size=32,
        refreshes=2000,
        pairing=pairing,
        hidden_dims=[64, 64],
        embedding_frequencies=8,
        seed=seed,
    )
    model, _ = TrainingService.train(config, dataset, RngStreams(seed))
    denoise = DenoiserService.denoiser(model)

    evaluation = rngs.derive(1)
    schedule = ScheduleService.timesteps(18)
    x_init = SamplerService.draw_initial(schedule, TRAJECTORIES, 2, evaluation.noise)
    traj = SamplerService.heun_sample(denoise, schedule, x_init)
    curvature = np.mean(
        [r.tangent_curvature for r in DiagnosticsService.curvature_batch(traj)]
    )
    estimates = SamplerService.one_step_estimate(denoise, x_init, schedule.sigma_max)
    spread = float(np.sum(np.var(estimates, axis=0)))

    picked = evaluation.data.choice(dataset.size, TRAJECTORIES, replace=False)
    reference = dataset.points[picked]
    w2 = {}
    for steps, rho in ((18, 7.0), (8, 81.0)):
        few = ScheduleService.timesteps(steps, rho=rho)
        samples = SamplerService.heun_sample(denoise, few, x_init).final
        w2[steps] = DiagnosticsService.eval_generation(samples, reference).w2
    return {
        "curvature": float(curvature),
        "spread": spread,
        "degradation": w2[8] / w2[18],
    }


@pytest.fixture(scope="module")
def twins() -> List[Dict[str, Dict[str, float]]]:
    return [
        {mode: _twin_metrics(seed, mode) for mode in ("aot", "independent")}
        for seed in range(SEED_PAIRS)
    ]


def test_aot_trajectories_are_straighter(twins):
    wins = sum(t["aot"]["curvature"] < t["independent"]["curvature"] for t in twins)
    assert _sign_test(wins, len(twins)) < 0.05


def test_aot_one_step_estimates_are_more_diverse(twins):
    wins = sum(t["aot"]["spread"] > t["independent"]["spread"] for t in twins)
    assert _sign_test(wins, len(twins)) < 0.05


def test_aot_degrades_less_with_few_steps(twins):
    wins = sum(
        t["aot"]["degradation"] < t["independent"]["degradation"] for t in twins
    )
    assert _sign_test(wins, len(twins)) < 0.05


def test_aot_pairing_gap():
    """256 standard-normal points against 256 noises, 100 pool draws."""
    dataset = build_dataset(
        DatasetConfig(generator="gaussian", count=10000, normalize=False),
        np.random.default_rng(0),
    )
    stats = TransportService.pairing_cost_stats(dataset, pairs=256, trials=100, seed=0)
    assert stats.aot_wins >= 99
    assert 0.0 < stats.mean_relative_reduction < 1.0
