"""
Pydantic models for the linear assignment problem.
"""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class CostMatrix(BaseModel):
    """Square matrix of finite, non-negative pairing costs.

    `costs[i, j]` is the cost of pairing row item i (an image) with column
    item j (a noise).
    """

    costs: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("costs", mode="before")
    @classmethod
    def _as_square_array(cls, value: Any) -> np.ndarray:
        costs = np.array(value, dtype=np.float64)
        if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {costs.shape}")
        if costs.shape[0] < 1:
            raise ValueError("cost matrix must have at least one row")
        if not np.all(np.isfinite(costs)):
            raise ValueError("cost matrix entries must be finite")
        if np.any(costs < 0):
            raise ValueError("cost matrix entries must be non-negative")
        costs.setflags(write=False)
        return costs

    @property
    def n(self) -> int:
        return int(self.costs.shape[0])


class Assignment(BaseModel):
    """A bijection row -> column together with its total cost."""

    permutation: np.ndarray
    total_cost: float

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("permutation", mode="before")
    @classmethod
    def _as_index_array(cls, value: Any) -> np.ndarray:
        perm = np.array(value, dtype=np.intp)
        if perm.ndim != 1:
            raise ValueError("permutation must be one-dimensional")
        perm.setflags(write=False)
        return perm

    @model_validator(mode="after")
    def _check_bijection(self) -> "Assignment":
        n = self.permutation.shape[0]
        if not np.array_equal(np.sort(self.permutation), np.arange(n)):
            raise ValueError("permutation is not a bijection on 0..n-1")
        return self

    @property
    def n(self) -> int:
        return int(self.permutation.shape[0])
