"""
Pydantic models for point datasets and their sources.
"""

from typing import Any, Dict, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class NormalizationRecord(BaseModel):
    """Per-dimension affine map: normalized = (raw - shift) / scale."""

    shift: np.ndarray
    scale: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("shift", "scale", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        vector = np.array(value, dtype=np.float64)
        if vector.ndim != 1:
            raise ValueError("normalization vectors must be one-dimensional")
        return _readonly(vector)

    @model_validator(mode="after")
    def _check(self) -> "NormalizationRecord":
        if self.shift.shape != self.scale.shape:
            raise ValueError("shift and scale must have the same length")
        if np.any(self.scale <= 0) or not np.all(np.isfinite(self.scale)):
            raise ValueError("scale entries must be finite and positive")
        return self

    @classmethod
    def identity(cls, dim: int) -> "NormalizationRecord":
        return cls(shift=np.zeros(dim), scale=np.ones(dim))

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=np.float64) - self.shift) / self.scale

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        return np.asarray(normalized, dtype=np.float64) * self.scale + self.shift

    def to_json(self) -> Dict[str, list]:
        return {"shift": self.shift.tolist(), "scale": self.scale.tolist()}


class Dataset(BaseModel):
    """K points in d dimensions with optional integer class labels."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    class_count: int = Field(default=1, ge=1)
    normalization: Optional[NormalizationRecord] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("points", mode="before")
    @classmethod
    def _as_points(cls, value: Any) -> np.ndarray:
        points = np.array(value, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise ValueError(f"points must have shape (K, d), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        return _readonly(points)

    @field_validator("labels", mode="before")
    @classmethod
    def _as_labels(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        labels = np.array(value)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and not np.all(labels == np.round(labels)):
            raise ValueError("labels must be integers")
        return _readonly(labels.astype(np.int64))

    @model_validator(mode="after")
    def _check(self) -> "Dataset":
        if self.labels is not None:
            if self.labels.shape[0] != self.points.shape[0]:
                raise ValueError("labels and points must have the same length")
            if self.labels.min() < 0 or self.labels.max() >= self.class_count:
                raise ValueError(f"labels must lie in 0..{self.class_count - 1}")
        if self.normalization is not None and (
            self.normalization.shift.shape[0] != self.dim
        ):
            raise ValueError("normalization record does not match dimension")
        return self

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def denormalize(self, points: np.ndarray) -> np.ndarray:
        """Map points from this dataset's normalized space back to raw space."""
        if self.normalization is None:
            return np.asarray(points, dtype=np.float64)
        return self.normalization.invert(points)

    def subset(self, index: np.ndarray) -> "Dataset":
        return Dataset(
            points=self.points[index],
            labels=None if self.labels is None else self.labels[index],
            class_count=self.class_count,
            normalization=self.normalization,
        )


class DatasetConfig(BaseModel):
    """Where a run gets its data: a registered generator or a CSV file."""

    generator: Optional[str] = "mixture"
    params: Dict[str, Any] = Field(default_factory=dict)
    count: int = Field(default=10000, ge=1)
    csv: Optional[str] = None
    normalize: bool = True
    target_std: float = Field(default=0.5, gt=0)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _one_source(self) -> "DatasetConfig":
        if self.csv is None and self.generator is None:
            raise ValueError("either generator or csv must be set")
        return self

    @property
    def source(self) -> Literal["csv", "generator"]:
        return "csv" if self.csv is not None else "generator"
