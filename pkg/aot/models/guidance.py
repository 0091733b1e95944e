"""
Pydantic models for discriminator guidance.
"""

import math
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from aot.models.dataset import DatasetConfig
from aot.models.training import AugmentationConfig, PairingCost


class DiscriminatorSpec(BaseModel):
    """Hyperparameters that fix the shape of a discriminator network."""

    input_dim: int = Field(default=2, ge=1)
    hidden_dims: List[int] = Field(default_factory=lambda: [64, 64])
    embedding_frequencies: int = Field(default=16, ge=0)
    embedding_max_frequency: float = Field(default=64.0, gt=0)
    sigma_data: float = Field(default=0.5, gt=0)
    class_count: int = Field(default=0, ge=0)

    model_config = ConfigDict(extra="forbid", frozen=True)


class DiscriminatorTrainConfig(BaseModel):
    """Settings for training a real-vs-generated discriminator."""

    pairs: int = Field(default=256, ge=1)
    minibatch_size: int = Field(default=32, ge=1)
    use_aot: bool = True
    pairing_cost: PairingCost = "euclidean"
    conditional: bool = False
    p_mean: float = -1.2
    p_std: float = Field(default=1.2, ge=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    refreshes: int = Field(default=200, ge=1)
    seed: int = 0
    hidden_dims: List[int] = Field(default_factory=lambda: [64, 64])
    embedding_frequencies: int = Field(default=16, ge=0)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    generated_count: int = Field(
        default=10000, ge=1, description="Samples drawn from the base model"
    )
    steps: int = Field(default=18, ge=2, description="Heun steps for generation")
    rho: float = Field(default=7.0, ge=1)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _pool_divisible(self) -> "DiscriminatorTrainConfig":
        if self.minibatch_size > self.pairs:
            raise ValueError("minibatch_size exceeds pairs")
        if self.pairs % self.minibatch_size:
            raise ValueError("pairs must be divisible by minibatch_size")
        return self


class GuidanceRunConfig(BaseModel):
    """A discriminator config file: real data source plus training settings."""

    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    discriminator: DiscriminatorTrainConfig = Field(
        default_factory=DiscriminatorTrainConfig
    )

    model_config = ConfigDict(extra="forbid")


class GuidanceConfig(BaseModel):
    """Guidance strength and the discriminator it uses."""

    weight: float = Field(default=0.0, ge=0)
    discriminator: Optional[str] = Field(
        default=None, description="Discriminator checkpoint path"
    )

    @field_validator("weight")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("weight must be finite")
        return value
