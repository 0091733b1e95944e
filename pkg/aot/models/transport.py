"""
Pydantic models for noise/data pairing.
"""

from typing import Any, Iterator, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _as_matrix(value: Any, name: str) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if array.ndim != 2:
        raise ValueError(f"{name} must have shape (N, d), got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} must be finite")
    array.setflags(write=False)
    return array


def _as_labels(value: Any) -> Optional[np.ndarray]:
    if value is None:
        return None
    labels = np.array(value, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    labels.setflags(write=False)
    return labels


class SampleBatch(BaseModel):
    """N data points and N standard-normal noises, optionally labeled."""

    points: np.ndarray
    noises: np.ndarray
    labels: Optional[np.ndarray] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("points", "noises", mode="before")
    @classmethod
    def _matrix(cls, value: Any, info) -> np.ndarray:
        return _as_matrix(value, info.field_name)

    @field_validator("labels", mode="before")
    @classmethod
    def _labels(cls, value: Any) -> Optional[np.ndarray]:
        return _as_labels(value)

    @model_validator(mode="after")
    def _aligned(self) -> "SampleBatch":
        if self.points.shape != self.noises.shape:
            raise ValueError(
                f"points {self.points.shape} and noises {self.noises.shape} "
                "must have equal count and dimension"
            )
        if self.labels is not None and self.labels.shape[0] != self.points.shape[0]:
            raise ValueError("labels must have one entry per point")
        return self

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


class PairedBatch(BaseModel):
    """Points with their selected noises, selected_noises[i] = noises[perm[i]]."""

    points: np.ndarray
    selected_noises: np.ndarray
    labels: Optional[np.ndarray] = None
    permutation: np.ndarray
    paired_cost: float = Field(description="Total cost of the selected pairing")
    independent_cost: float = Field(description="Total cost of the identity pairing")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("points", "selected_noises", mode="before")
    @classmethod
    def _matrix(cls, value: Any, info) -> np.ndarray:
        return _as_matrix(value, info.field_name)

    @field_validator("labels", mode="before")
    @classmethod
    def _labels(cls, value: Any) -> Optional[np.ndarray]:
        return _as_labels(value)

    @field_validator("permutation", mode="before")
    @classmethod
    def _perm(cls, value: Any) -> np.ndarray:
        perm = np.array(value, dtype=np.intp)
        perm.setflags(write=False)
        return perm

    @model_validator(mode="after")
    def _aligned(self) -> "PairedBatch":
        n = self.points.shape[0]
        if self.selected_noises.shape != self.points.shape:
            raise ValueError("selected_noises must match points in shape")
        if not np.array_equal(np.sort(self.permutation), np.arange(n)):
            raise ValueError("permutation is not a bijection")
        if self.labels is not None and self.labels.shape[0] != n:
            raise ValueError("labels must have one entry per point")
        return self

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def slice(self, start: int, stop: int) -> "Minibatch":
        return Minibatch(
            points=self.points[start:stop],
            noises=self.selected_noises[start:stop],
            labels=None if self.labels is None else self.labels[start:stop],
            indices=np.arange(start, stop),
        )


class Minibatch(BaseModel):
    """B consecutive pairs taken from a pair pool."""

    points: np.ndarray
    noises: np.ndarray
    labels: Optional[np.ndarray] = None
    indices: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


class PairPool(BaseModel):
    """N paired samples consumed once, in order, as minibatches of B."""

    batch: PairedBatch
    minibatch_size: int = Field(ge=1)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_size(self) -> "PairPool":
        if self.minibatch_size > self.batch.size:
            raise ValueError(
                f"minibatch size {self.minibatch_size} exceeds pool size "
                f"{self.batch.size}"
            )
        return self

    @property
    def size(self) -> int:
        return self.batch.size

    @property
    def minibatch_count(self) -> int:
        return -(-self.batch.size // self.minibatch_size)

    def minibatches(self) -> Iterator[Minibatch]:
        """Sequential minibatches covering every pair exactly once."""
        for start in range(0, self.batch.size, self.minibatch_size):
            yield self.batch.slice(start, min(start + self.minibatch_size, self.size))

    @property
    def mean_paired_cost(self) -> float:
        return self.batch.paired_cost / self.size

    @property
    def mean_independent_cost(self) -> float:
        return self.batch.independent_cost / self.size


class PairingTrial(BaseModel):
    """One pool draw compared under AOT and independent pairing."""

    trial: int
    aot_cost: float
    independent_cost: float

    @property
    def relative_reduction(self) -> float:
        if self.independent_cost == 0:
            return 0.0
        return 1.0 - self.aot_cost / self.independent_cost


class PairingStats(BaseModel):
    trials: List[PairingTrial]

    @property
    def mean_aot_cost(self) -> float:
        return float(np.mean([t.aot_cost for t in self.trials]))

    @property
    def mean_independent_cost(self) -> float:
        return float(np.mean([t.independent_cost for t in self.trials]))

    @property
    def mean_relative_reduction(self) -> float:
        return float(np.mean([t.relative_reduction for t in self.trials]))

    @property
    def aot_wins(self) -> int:
        return sum(1 for t in self.trials if t.aot_cost < t.independent_cost)
