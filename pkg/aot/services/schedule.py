"""
Schedule service.

Timestep sequences for sampling, training noise-level draws, and the loss
weight lambda(sigma).
"""

from typing import Callable, Dict, Union

import numpy as np
import structlog

from aot.errors import InvalidInputError
from aot.models.schedule import (
    RHO,
    SIGMA_DATA,
    SIGMA_MAX,
    SIGMA_MIN,
    NoiseSchedule,
    SigmaSampler,
)

log = structlog.get_logger()

ArrayLike = Union[float, np.ndarray]


def _positive(value: ArrayLike, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(array)) or np.any(array <= 0):
        raise InvalidInputError(f"{name} must be finite and positive", field=name)
    return array


def edm_weight(sigma: ArrayLike, sigma_data: float = SIGMA_DATA) -> ArrayLike:
    """(sigma^2 + sigma_data^2) / (sigma * sigma_data)^2"""
    s = _positive(sigma, "sigma")
    sd = _positive(sigma_data, "sigma_data")
    weight = (s**2 + sd**2) / (s * sd) ** 2
    return float(weight) if weight.ndim == 0 else weight


def unit_weight(sigma: ArrayLike, sigma_data: float = SIGMA_DATA) -> ArrayLike:
    s = _positive(sigma, "sigma")
    _positive(sigma_data, "sigma_data")
    return 1.0 if s.ndim == 0 else np.ones_like(s)


WEIGHT_FUNCTIONS: Dict[str, Callable[[ArrayLike, float], ArrayLike]] = {
    "edm": edm_weight,
    "unit": unit_weight,
}


class ScheduleService:
    """Noise-level machinery shared by training and sampling."""

    @staticmethod
    def timesteps(
        n: int,
        sigma_min: float = SIGMA_MIN,
        sigma_max: float = SIGMA_MAX,
        rho: float = RHO,
    ) -> NoiseSchedule:
        """
        t_i = (sigma_max^(1/rho) + i/(n-1) (sigma_min^(1/rho) - sigma_max^(1/rho)))^rho

        for i in 0..n-1, followed by t_n = 0. The endpoints are set exactly.
        """
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
            raise InvalidInputError(f"n must be an integer >= 2, got {n}", field="n")
        if not (np.isfinite(sigma_min) and sigma_min > 0):
            raise InvalidInputError("sigma_min must be positive", field="sigma_min")
        if not (np.isfinite(sigma_max) and sigma_max > sigma_min):
            raise InvalidInputError(
                "sigma_max must exceed sigma_min", field="sigma_max"
            )
        if not (np.isfinite(rho) and rho >= 1):
            raise InvalidInputError("rho must be >= 1", field="rho")

        ramp = np.arange(n, dtype=np.float64) / (n - 1)
        max_inv = sigma_max ** (1.0 / rho)
        min_inv = sigma_min ** (1.0 / rho)
        levels = (max_inv + ramp * (min_inv - max_inv)) ** rho
        levels[0] = sigma_max
        levels[-1] = sigma_min
        return NoiseSchedule(sigmas=np.append(levels, 0.0), rho=float(rho))

    @staticmethod
    def sample_sigmas(
        sampler: SigmaSampler, rng: np.random.Generator, size: int
    ) -> np.ndarray:
        """`size` independent draws of exp(Normal(p_mean, p_std^2))."""
        return np.exp(rng.normal(sampler.p_mean, sampler.p_std, size=size))

    @staticmethod
    def sample_sigma(sampler: SigmaSampler, rng: np.random.Generator) -> float:
        return float(np.exp(rng.normal(sampler.p_mean, sampler.p_std)))

    @staticmethod
    def loss_weight(
        sigma: ArrayLike, sigma_data: float = SIGMA_DATA, kind: str = "edm"
    ) -> ArrayLike:
        weight_fn = WEIGHT_FUNCTIONS.get(kind)
        if weight_fn is None:
            raise InvalidInputError(
                f"unknown loss weighting '{kind}', expected one of "
                f"{sorted(WEIGHT_FUNCTIONS)}",
                field="loss_weighting",
            )
        return weight_fn(sigma, sigma_data)
