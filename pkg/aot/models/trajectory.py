"""
Pydantic models for sampling trajectories and the diagnostics computed on them.
"""

from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _frozen(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    array.setflags(write=False)
    return array


class Trajectory(BaseModel):
    """Committed nodes of one sampling run, or of a batch run in lockstep.

    `xs`, `x0_hats` and `tangents` have shape (nodes, d) for a single
    trajectory and (nodes, M, d) for M trajectories sharing a schedule. The
    terminal node (sigma = 0) has x0_hat = x and a zero tangent.
    """

    sigmas: np.ndarray
    xs: np.ndarray
    x0_hats: np.ndarray
    tangents: np.ndarray
    nfe: int = Field(ge=0)
    discriminator_evaluations: int = Field(default=0, ge=0)
    labels: Optional[np.ndarray] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("sigmas", "xs", "x0_hats", "tangents", mode="before")
    @classmethod
    def _arrays(cls, value: Any) -> np.ndarray:
        return _frozen(value)

    @model_validator(mode="after")
    def _check(self) -> "Trajectory":
        nodes = self.sigmas.shape[0]
        if self.sigmas.ndim != 1 or nodes < 1:
            raise ValueError("trajectory needs at least one record")
        if self.sigmas[-1] != 0.0:
            raise ValueError("final sigma must be 0")
        if np.any(np.diff(self.sigmas) >= 0):
            raise ValueError("sigmas must be strictly decreasing")
        for name in ("xs", "x0_hats", "tangents"):
            array = getattr(self, name)
            if array.ndim not in (2, 3) or array.shape[0] != nodes:
                raise ValueError(f"{name} must have one entry per sigma")
        if not (self.xs.shape == self.x0_hats.shape == self.tangents.shape):
            raise ValueError("xs, x0_hats and tangents must have equal shapes")
        return self

    @property
    def size(self) -> int:
        """Number of committed nodes."""
        return int(self.sigmas.shape[0])

    @property
    def is_batch(self) -> bool:
        return self.xs.ndim == 3

    @property
    def batch_size(self) -> int:
        return int(self.xs.shape[1]) if self.is_batch else 1

    @property
    def final(self) -> np.ndarray:
        return self.xs[-1]

    def row(self, index: int) -> "Trajectory":
        """The single trajectory at position `index` of a batch run."""
        if not self.is_batch:
            if index != 0:
                raise IndexError(index)
            return self
        return Trajectory(
            sigmas=self.sigmas,
            xs=self.xs[:, index],
            x0_hats=self.x0_hats[:, index],
            tangents=self.tangents[:, index],
            nfe=self.nfe,
            labels=None if self.labels is None else self.labels[index : index + 1],
        )


class CurvatureStep(BaseModel):
    """Per-node curvature breakdown; node i compares tangents i-1 and i."""

    node: int
    sigma: float
    cosine: Optional[float] = None
    bend: Optional[float] = None
    x0_step: float


class CurvatureReport(BaseModel):
    tangent_curvature: float = Field(ge=0, le=2)
    x0_drift: float = Field(ge=0)
    degenerate: int = Field(default=0, ge=0, description="Zero-norm tangents skipped")
    per_step: List[CurvatureStep] = Field(default_factory=list)


class GenerationMetrics(BaseModel):
    """Sample quality against a reference set."""

    w2: float
    count: int
    subsampled: bool = False
    mode_counts: Optional[Dict[str, int]] = None
    reference_mode_counts: Optional[Dict[str, int]] = None


class SweepPoint(BaseModel):
    rho: float
    steps: int
    nfe: int
    w2: float


class SweepResult(BaseModel):
    points: List[SweepPoint]

    def best_rho(self) -> Dict[int, float]:
        """Lowest-W2 rho for every step count."""
        best: Dict[int, SweepPoint] = {}
        for point in self.points:
            current = best.get(point.steps)
            if current is None or point.w2 < current.w2:
                best[point.steps] = point
        return {steps: point.rho for steps, point in sorted(best.items())}
