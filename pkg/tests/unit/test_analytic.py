import numpy as np
import pytest

from aot.errors import InvalidInputError
from aot.services.analytic import AnalyticService

pytestmark = pytest.mark.unit


def test_point_mass_returns_the_mean(point_mass_oracle, rng):
    x = rng.standard_normal((5, 2)) * 10
    out = AnalyticService.analytic_denoise(point_mass_oracle, x, 3.0)
    np.testing.assert_array_equal(out, np.tile([2.0, 1.0], (5, 1)))
    single = AnalyticService.analytic_denoise(point_mass_oracle, x[0], 0.01)
    np.testing.assert_array_equal(single, [2.0, 1.0])


def test_gaussian_shrinks_towards_the_mean():
    oracle = AnalyticService.isotropic_gaussian([1.0, -1.0], 0.5)
    x = np.array([3.0, 1.0])
    out = AnalyticService.analytic_denoise(oracle, x, 0.5)
    np.testing.assert_allclose(out, [2.0, 0.0])


def test_gaussian_accepts_one_sigma_per_row(gaussian_oracle):
    x = np.array([[2.0, 2.0], [2.0, 2.0]])
    out = AnalyticService.analytic_denoise(gaussian_oracle, x, np.array([1.0, 3.0]))
    np.testing.assert_allclose(out, [[1.0, 1.0], [0.2, 0.2]])


def test_empirical_single_point_is_a_point_mass():
    oracle = AnalyticService.empirical([[1.0, 2.0]])
    out = AnalyticService.analytic_denoise(oracle, np.array([50.0, -7.0]), 0.3)
    np.testing.assert_allclose(out, [1.0, 2.0])


def test_empirical_posterior_weights():
    points = np.array([[-1.0, 0.0], [1.0, 0.0]])
    oracle = AnalyticService.empirical(points)
    x = np.array([0.5, 0.0])
    sigma = 1.0
    logits = -np.sum((x - points) ** 2, axis=1) / (2 * sigma**2)
    weights = np.exp(logits) / np.exp(logits).sum()
    expected = weights @ points
    np.testing.assert_allclose(
        AnalyticService.analytic_denoise(oracle, x, sigma), expected, rtol=1e-12
    )


def test_empirical_is_stable_at_tiny_sigma():
    points = np.array([[-1.0, 0.0], [1.0, 0.0]])
    oracle = AnalyticService.empirical(points)
    out = AnalyticService.analytic_denoise(oracle, np.array([0.9, 0.1]), 1e-4)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [1.0, 0.0])


def test_empirical_tends_to_the_data_mean_at_large_sigma(rng):
    points = rng.standard_normal((30, 2))
    oracle = AnalyticService.empirical(points)
    out = AnalyticService.analytic_denoise(oracle, np.zeros(2), 1e6)
    np.testing.assert_allclose(out, points.mean(axis=0), atol=1e-8)


@pytest.mark.parametrize("sigma", [0.0, -1.0, np.inf, np.nan])
def test_rejects_bad_sigma(gaussian_oracle, sigma):
    with pytest.raises(InvalidInputError):
        AnalyticService.analytic_denoise(gaussian_oracle, np.zeros(2), sigma)


def test_rejects_empty_empirical_set():
    with pytest.raises(InvalidInputError):
        AnalyticService.empirical(np.empty((0, 2)))


def test_denoiser_wrapper_ignores_labels(gaussian_oracle):
    denoise = AnalyticService.denoiser(gaussian_oracle)
    np.testing.assert_allclose(denoise(np.ones(2), 1.0, np.array([3])), [0.5, 0.5])


def test_parse_oracle_specs(tmp_path):
    point_mass = AnalyticService.parse_oracle_spec("point_mass:2,1")
    assert point_mass.variant == "point_mass"
    np.testing.assert_array_equal(point_mass.mean, [2.0, 1.0])

    gaussian = AnalyticService.parse_oracle_spec("gaussian:0,0:1.5")
    assert gaussian.variant == "isotropic_gaussian"
    assert gaussian.std == 1.5

    path = tmp_path / "points.csv"
    path.write_text("x0,x1\n1,2\n3,4\n")
    empirical = AnalyticService.parse_oracle_spec(f"empirical:{path}")
    assert empirical.points.shape == (2, 2)


@pytest.mark.parametrize("spec", ["banana:1", "gaussian:0,0", "point_mass:a,b"])
def test_parse_oracle_spec_errors(spec):
    with pytest.raises(InvalidInputError) as info:
        AnalyticService.parse_oracle_spec(spec)
    assert info.value.field == "oracle"
