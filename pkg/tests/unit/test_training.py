import numpy as np
import pytest

from aot.errors import InvalidInputError
from aot.models.dataset import Dataset
from aot.models.training import AugmentationConfig, TrainConfig
from aot.services.augmentation import augment
from aot.services.checkpoint import CheckpointService
from aot.services.denoiser import DenoiserService
from aot.services.training import TrainingService
from aot.utils.rng import RngStreams

pytestmark = pytest.mark.unit


def _config(**overrides):
    base = dict(
        pairs=32,
        minibatch_size=8,
        refreshes=3,
        hidden_dims=[8, 8],
        embedding_frequencies=2,
        ema_decay=0.9,
        seed=7,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture
def blobs(rng):
    labels = rng.integers(0, 2, size=200)
    centres = np.array([[1.0, 0.0], [-1.0, 0.0]])
    points = centres[labels] + 0.1 * rng.standard_normal((200, 2))
    return Dataset(points=points, labels=labels, class_count=2)


def test_run_records_every_refresh(blobs):
    result = TrainingService.run(_config(), blobs)
    assert [r.refresh for r in result.log.records] == [0, 1, 2]
    for record in result.log.records:
        assert np.isfinite(record.mean_loss)
        assert record.mean_pairing_cost <= record.mean_independent_cost + 1e-12
        assert record.wall_time >= 0


def test_same_seed_same_parameters(blobs):
    first = TrainingService.run(_config(), blobs)
    second = TrainingService.run(_config(), blobs)
    np.testing.assert_array_equal(
        DenoiserService.get_parameters(first.ema),
        DenoiserService.get_parameters(second.ema),
    )
    assert first.log.losses == second.log.losses


def test_pairing_mode_leaves_the_pools_unchanged(blobs):
    """Both modes see the same draws; only the permutation differs."""
    aot = TrainingService.run(_config(pairing="aot"), blobs)
    independent = TrainingService.run(_config(pairing="independent"), blobs)
    for a, b in zip(aot.log.records, independent.log.records):
        assert a.mean_independent_cost == b.mean_independent_cost
        assert b.mean_pairing_cost == b.mean_independent_cost
        assert a.mean_pairing_cost < a.mean_independent_cost


def test_ema_tracks_the_online_model(blobs):
    copied = TrainingService.run(_config(ema_decay=0.0), blobs)
    np.testing.assert_array_equal(
        DenoiserService.get_parameters(copied.ema),
        DenoiserService.get_parameters(copied.model),
    )
    smoothed = TrainingService.run(_config(ema_decay=0.9), blobs)
    assert not np.array_equal(
        DenoiserService.get_parameters(smoothed.ema),
        DenoiserService.get_parameters(smoothed.model),
    )


def test_train_returns_the_ema_model(blobs):
    model, log = TrainingService.train(_config(), blobs, RngStreams(7))
    reference = TrainingService.run(_config(), blobs)
    np.testing.assert_array_equal(
        DenoiserService.get_parameters(model),
        DenoiserService.get_parameters(reference.ema),
    )
    assert len(log.records) == 3


def test_conditional_training_uses_labels(blobs):
    model, _ = TrainingService.train(_config(conditional=True), blobs)
    assert model.spec.class_count == 2
    with pytest.raises(InvalidInputError):
        DenoiserService.denoise(model, np.zeros(2), 1.0)


def test_conditional_training_needs_labels(rng):
    dataset = Dataset(points=rng.standard_normal((50, 2)))
    with pytest.raises(InvalidInputError) as info:
        TrainingService.run(_config(conditional=True), dataset)
    assert info.value.field == "conditional"


def test_on_refresh_callback(blobs, mocker):
    callback = mocker.Mock()
    TrainingService.run(_config(), blobs, on_refresh=callback)
    assert callback.call_count == 3
    assert [c.args[0] for c in callback.call_args_list] == [0, 1, 2]


def test_periodic_checkpoints(blobs, tmp_path):
    result = TrainingService.run(
        _config(checkpoint_every=2), blobs, checkpoint_dir=tmp_path
    )
    names = sorted(p.name for p in tmp_path.glob("checkpoint-*.json"))
    assert names == ["checkpoint-000002.json", "checkpoint-000003.json"]
    assert len(result.log.checkpoints) == 2
    restored = CheckpointService.load_checkpoint(tmp_path / names[-1])
    np.testing.assert_array_equal(
        DenoiserService.get_parameters(restored),
        DenoiserService.get_parameters(result.ema),
    )


@pytest.mark.parametrize(
    "overrides",
    [
        {"minibatch_size": 64},
        {"pairs": 30},
        {"ema_decay": 1.0},
        {"adam_betas": (0.9, 1.0)},
        {"learning_rate": 0.0},
        {"pairing": "random"},
    ],
)
def test_train_config_validation(overrides):
    with pytest.raises(ValueError):
        _config(**overrides)


def test_augmentation_modes(rng):
    points = rng.standard_normal((10, 2))
    assert augment(points, None, rng) is points
    assert augment(points, AugmentationConfig(), rng) is points
    still = AugmentationConfig(mode="jitter", jitter_std=0.0)
    assert augment(points, still, rng) is points
    jitter = AugmentationConfig(mode="jitter", jitter_std=0.1)
    moved = augment(points, jitter, np.random.default_rng(0))
    expected = points + np.random.default_rng(0).normal(0.0, 0.1, size=(10, 2))
    np.testing.assert_array_equal(moved, expected)


def test_augmentation_draws_from_its_own_stream(blobs):
    """Jitter changes the points but not which points or noises are drawn."""
    jitter = AugmentationConfig(mode="jitter", jitter_std=0.05)
    plain = TrainingService.run(_config(pairing="independent"), blobs)
    jittered = TrainingService.run(
        _config(pairing="independent", augmentation=jitter), blobs
    )
    for a, b in zip(plain.log.records, jittered.log.records):
        assert a.mean_independent_cost != b.mean_independent_cost
        assert a.mean_independent_cost == pytest.approx(
            b.mean_independent_cost, rel=0.1
        )


@pytest.mark.slow
def test_point_mass_training_learns_the_constant():
    """All data at (2, 1): the loss vanishes and D(x; sigma) = (2, 1) everywhere."""
    mu = np.array([2.0, 1.0])
    dataset = Dataset(points=np.tile(mu, (256, 1)))
    config = _config(
        pairs=64,
        minibatch_size=32,
        refreshes=200,
        hidden_dims=[64, 64],
        embedding_frequencies=8,
        learning_rate=1e-2,
        ema_decay=0.95,
    )
    result = TrainingService.run(config, dataset)
    assert result.log.losses[-1] < 1e-3

    rng = np.random.default_rng(0)
    sigmas = np.geomspace(0.01, 80.0, 40)
    x = mu + sigmas[:, None] * rng.standard_normal((40, 2))
    denoised = DenoiserService.denoise(result.ema, x, sigmas)
    assert np.max(np.linalg.norm(denoised - mu, axis=1)) < 0.05
