"""
Pydantic models for noise levels: the sampling schedule and the training
sigma distribution.
"""

from typing import Any, Iterator, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

SIGMA_MIN = 0.002
SIGMA_MAX = 80.0
SIGMA_DATA = 0.5
RHO = 7.0
P_MEAN = -1.2
P_STD = 1.2


class NoiseSchedule(BaseModel):
    """Strictly decreasing noise levels t_0 > ... > t_{n-1} > 0 plus t_n = 0."""

    sigmas: np.ndarray
    rho: Optional[float] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("sigmas", mode="before")
    @classmethod
    def _check_sigmas(cls, value: Any) -> np.ndarray:
        sigmas = np.array(value, dtype=np.float64)
        if sigmas.ndim != 1 or sigmas.shape[0] < 2:
            raise ValueError("schedule needs at least one level and a terminal 0")
        if not np.all(np.isfinite(sigmas)):
            raise ValueError("schedule levels must be finite")
        if sigmas[-1] != 0.0:
            raise ValueError("schedule must end with a terminal 0")
        if sigmas[-2] <= 0:
            raise ValueError("non-terminal levels must be positive")
        if np.any(np.diff(sigmas) >= 0):
            raise ValueError("schedule must be strictly decreasing")
        sigmas.setflags(write=False)
        return sigmas

    @classmethod
    def from_sigmas(
        cls, sigmas: Sequence[float], rho: Optional[float] = None
    ) -> "NoiseSchedule":
        """A custom schedule; the last entry must be the terminal 0."""
        return cls(sigmas=sigmas, rho=rho)

    @property
    def n(self) -> int:
        """Number of positive levels (the formula's step count)."""
        return int(self.sigmas.shape[0] - 1)

    @property
    def sigma_max(self) -> float:
        return float(self.sigmas[0])

    @property
    def sigma_min(self) -> float:
        return float(self.sigmas[-2])

    @property
    def timesteps(self) -> np.ndarray:
        return self.sigmas

    def intervals(self) -> Iterator[Tuple[float, float]]:
        for t_cur, t_next in zip(self.sigmas[:-1], self.sigmas[1:]):
            yield float(t_cur), float(t_next)


class SigmaSampler(BaseModel):
    """Training noise levels: sigma = exp(g), g ~ Normal(p_mean, p_std^2)."""

    p_mean: float = P_MEAN
    p_std: float = Field(default=P_STD, ge=0)

    model_config = ConfigDict(frozen=True)
