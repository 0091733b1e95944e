"""
Pydantic models for denoisers: gradient bundles and analytic oracles.
"""

from typing import Any, Literal, Optional, Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Denoiser(Protocol):
    """Anything mapping (x, sigma, labels) to a denoised estimate of x."""

    def __call__(
        self, x: np.ndarray, sigma: Any, labels: Optional[np.ndarray] = None
    ) -> np.ndarray: ...


class GradientBundle(BaseModel):
    """Minibatch loss and its gradient, flattened in parameter order."""

    loss: float
    grads: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("grads", mode="before")
    @classmethod
    def _finite(cls, value: Any) -> np.ndarray:
        grads = np.array(value, dtype=np.float64)
        if grads.ndim != 1:
            raise ValueError("grads must be a flat vector")
        if not np.all(np.isfinite(grads)):
            raise ValueError("grads must be finite")
        grads.setflags(write=False)
        return grads


class AnalyticDenoiser(BaseModel):
    """Closed-form posterior mean for a known data distribution.

    * `point_mass`: all data at `mean`.
    * `isotropic_gaussian`: data ~ Normal(`mean`, `std`^2 I).
    * `empirical`: uniform over `points`.
    """

    variant: Literal["point_mass", "isotropic_gaussian", "empirical"]
    mean: Optional[np.ndarray] = None
    std: Optional[float] = Field(default=None, ge=0)
    points: Optional[np.ndarray] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("mean", mode="before")
    @classmethod
    def _vector(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        mean = np.array(value, dtype=np.float64)
        if mean.ndim != 1 or not np.all(np.isfinite(mean)):
            raise ValueError("mean must be a finite vector")
        mean.setflags(write=False)
        return mean

    @field_validator("points", mode="before")
    @classmethod
    def _points(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        points = np.array(value, dtype=np.float64)
        if points.ndim != 2 or not np.all(np.isfinite(points)):
            raise ValueError("points must be a finite (K, d) array")
        points.setflags(write=False)
        return points

    @model_validator(mode="after")
    def _fields_for_variant(self) -> "AnalyticDenoiser":
        if self.variant in ("point_mass", "isotropic_gaussian") and self.mean is None:
            raise ValueError(f"{self.variant} oracle needs a mean")
        if self.variant == "isotropic_gaussian" and self.std is None:
            raise ValueError("isotropic_gaussian oracle needs std")
        if self.variant == "empirical":
            if self.points is None or self.points.shape[0] == 0:
                raise ValueError("empirical oracle needs a non-empty point set")
        return self

    @property
    def dim(self) -> int:
        if self.variant == "empirical":
            return int(self.points.shape[1])
        return int(self.mean.shape[0])
