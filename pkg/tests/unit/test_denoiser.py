import numpy as np
import pytest

from aot.errors import InvalidInputError
from aot.models.training import DenoiserSpec
from aot.models.transport import Minibatch
from aot.services.denoiser import DenoiserService
from aot.utils.rng import RngStreams

pytestmark = pytest.mark.unit

SPEC = DenoiserSpec(input_dim=2, hidden_dims=[16, 16], embedding_frequencies=4)


def _randomised(spec=SPEC, seed=0):
    """A model whose parameters are all non-zero, so every gradient is live."""
    model = DenoiserService.create(spec, RngStreams(seed))
    count = DenoiserService.parameter_count(model)
    vector = np.random.default_rng(seed).normal(0.0, 0.3, size=count)
    DenoiserService.set_parameters(model, vector)
    return model


def _minibatch(rng, size=8, dim=2, labels=None):
    return Minibatch(
        points=rng.standard_normal((size, dim)),
        noises=rng.standard_normal((size, dim)),
        labels=labels,
        indices=np.arange(size),
    )


def test_fresh_model_is_the_skip_connection(rng):
    """A zero output layer makes D(x; sigma) = c_skip(sigma) x."""
    model = DenoiserService.create(SPEC, RngStreams(0))
    x = rng.standard_normal((4, 2))
    sigma = np.array([0.1, 0.5, 2.0, 80.0])
    out = DenoiserService.denoise(model, x, sigma)
    c_skip = 0.25 / (sigma**2 + 0.25)
    np.testing.assert_allclose(out, c_skip[:, None] * x, rtol=1e-12)


def test_denoise_accepts_single_points_and_batches(rng):
    model = _randomised()
    batch = rng.standard_normal((3, 2))
    out = DenoiserService.denoise(model, batch, 1.0)
    assert out.shape == (3, 2)
    single = DenoiserService.denoise(model, batch[1], 1.0)
    np.testing.assert_allclose(single, out[1], rtol=1e-12)


def test_denoise_rejects_bad_input():
    model = _randomised()
    with pytest.raises(InvalidInputError):
        DenoiserService.denoise(model, np.zeros(3), 1.0)
    with pytest.raises(InvalidInputError):
        DenoiserService.denoise(model, np.zeros(2), 0.0)
    with pytest.raises(InvalidInputError):
        DenoiserService.denoise(model, np.array([np.nan, 0.0]), 1.0)


def test_conditional_model_needs_labels(rng):
    spec = SPEC.model_copy(update={"class_count": 3})
    model = _randomised(spec)
    x = rng.standard_normal((2, 2))
    with pytest.raises(InvalidInputError):
        DenoiserService.denoise(model, x, 1.0)
    with pytest.raises(InvalidInputError):
        DenoiserService.denoise(model, x, 1.0, labels=np.array([0, 3]))
    a = DenoiserService.denoise(model, x, 1.0, labels=np.array([0, 0]))
    b = DenoiserService.denoise(model, x, 1.0, labels=np.array([1, 2]))
    assert not np.allclose(a, b)


def test_same_seed_same_initialisation():
    a = DenoiserService.create(SPEC, RngStreams(5))
    b = DenoiserService.create(SPEC, RngStreams(5))
    c = DenoiserService.create(SPEC, RngStreams(6))
    np.testing.assert_array_equal(
        DenoiserService.get_parameters(a), DenoiserService.get_parameters(b)
    )
    assert not np.array_equal(
        DenoiserService.get_parameters(a), DenoiserService.get_parameters(c)
    )


def test_loss_matches_its_definition(rng):
    model = _randomised()
    batch = _minibatch(rng)
    sigmas = np.exp(rng.normal(-1.2, 1.2, size=8))
    bundle = DenoiserService.loss_and_grad(model, batch, sigmas)

    noisy = batch.points + sigmas[:, None] * batch.noises
    denoised = DenoiserService.denoise(model, noisy, sigmas)
    weights = (sigmas**2 + 0.25) / (sigmas * 0.5) ** 2
    expected = np.mean(weights * np.sum((denoised - batch.points) ** 2, axis=1))
    assert bundle.loss == pytest.approx(expected, rel=1e-12)
    assert bundle.grads.shape == (DenoiserService.parameter_count(model),)


def test_loss_and_grad_leaves_parameters_untouched(rng):
    model = _randomised()
    before = DenoiserService.get_parameters(model)
    DenoiserService.loss_and_grad(model, _minibatch(rng), np.ones(8))
    np.testing.assert_array_equal(before, DenoiserService.get_parameters(model))


@pytest.mark.parametrize("conditional", [False, True])
def test_gradient_matches_central_differences(conditional):
    """Directional derivatives along 20 seeded directions, relative error < 1e-4."""
    rng = np.random.default_rng(17)
    spec = SPEC.model_copy(update={"class_count": 3 if conditional else 0})
    model = _randomised(spec, seed=2)
    labels = rng.integers(0, 3, size=8) if conditional else None
    batch = _minibatch(rng, labels=labels)
    sigmas = np.exp(rng.normal(-1.2, 1.2, size=8))

    theta = DenoiserService.get_parameters(model)
    grads = DenoiserService.loss_and_grad(model, batch, sigmas).grads

    def loss_at(vector):
        DenoiserService.set_parameters(model, vector)
        return DenoiserService.loss_and_grad(model, batch, sigmas).loss

    h = 1e-6
    for _ in range(20):
        direction = rng.standard_normal(theta.shape)
        direction /= np.linalg.norm(direction)
        numeric = (loss_at(theta + h * direction) - loss_at(theta - h * direction)) / (
            2 * h
        )
        analytic = float(grads @ direction)
        scale = max(abs(numeric), abs(analytic), 1e-8)
        assert abs(numeric - analytic) / scale < 1e-4
    DenoiserService.set_parameters(model, theta)


def test_loss_and_grad_validates_shapes(rng):
    model = _randomised()
    with pytest.raises(InvalidInputError):
        DenoiserService.loss_and_grad(model, _minibatch(rng, dim=3), np.ones(8))
    with pytest.raises(InvalidInputError):
        DenoiserService.loss_and_grad(model, _minibatch(rng), np.ones(7))


def test_set_parameters_rejects_wrong_length():
    model = _randomised()
    with pytest.raises(InvalidInputError):
        DenoiserService.set_parameters(model, np.zeros(3))


def test_single_linear_unit_gradient_by_hand():
    """B = 1, d = 1, F(u) = w u + b: the chain rule written out."""
    spec = DenoiserSpec(input_dim=1, hidden_dims=[], embedding_frequencies=0)
    model = DenoiserService.create(spec, RngStreams(0))
    w, b = 0.7, -0.3
    DenoiserService.set_parameters(model, [w, b])

    y, eps, sigma, sd = 0.4, -1.1, 0.8, 0.5
    batch = Minibatch(
        points=np.array([[y]]), noises=np.array([[eps]]), indices=np.arange(1)
    )
    bundle = DenoiserService.loss_and_grad(model, batch, np.array([sigma]))

    total = sigma**2 + sd**2
    c_skip = sd**2 / total
    c_out = sigma * sd / np.sqrt(total)
    c_in = 1.0 / np.sqrt(total)
    x = y + sigma * eps
    residual = c_skip * x + c_out * (w * c_in * x + b) - y
    weight = total / (sigma * sd) ** 2

    assert bundle.loss == pytest.approx(weight * residual**2, rel=1e-12)
    np.testing.assert_allclose(
        bundle.grads,
        [2 * weight * residual * c_out * c_in * x, 2 * weight * residual * c_out],
        rtol=1e-12,
    )
