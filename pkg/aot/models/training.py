"""
Pydantic models for training runs, their logs and checkpoints.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from aot.models.dataset import DatasetConfig

PairingMode = Literal["aot", "independent"]
PairingCost = Literal["euclidean", "sqeuclidean"]
LossWeighting = Literal["edm", "unit"]


class AugmentationConfig(BaseModel):
    """Point augmentation applied to each pool draw before pairing."""

    mode: Literal["none", "jitter"] = "none"
    jitter_std: float = Field(default=0.0, ge=0)

    model_config = ConfigDict(extra="forbid", frozen=True)


class DenoiserSpec(BaseModel):
    """Hyperparameters that fix the shape of a denoiser network."""

    input_dim: int = Field(default=2, ge=1)
    hidden_dims: List[int] = Field(default_factory=lambda: [128, 128, 128])
    embedding_frequencies: int = Field(default=16, ge=0)
    embedding_max_frequency: float = Field(default=64.0, gt=0)
    sigma_data: float = Field(default=0.5, gt=0)
    class_count: int = Field(
        default=0, ge=0, description="0 for unconditional models"
    )

    model_config = ConfigDict(extra="forbid", frozen=True)

    @property
    def conditional(self) -> bool:
        return self.class_count > 0


class TrainConfig(BaseModel):
    """Settings of one training run."""

    pairs: int = Field(default=512, ge=1, description="Pool size N")
    minibatch_size: int = Field(default=32, ge=1, description="Minibatch size B")
    pairing: PairingMode = "aot"
    pairing_cost: PairingCost = "euclidean"
    conditional: bool = False

    p_mean: float = -1.2
    p_std: float = Field(default=1.2, ge=0)
    sigma_data: float = Field(default=0.5, gt=0)
    loss_weighting: LossWeighting = "edm"

    learning_rate: float = Field(default=1e-3, gt=0)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(default=1e-8, gt=0)
    ema_decay: float = Field(default=0.999, ge=0, lt=1)

    refreshes: int = Field(default=2000, ge=1, description="Pool refreshes")
    seed: int = 0
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)

    hidden_dims: List[int] = Field(default_factory=lambda: [128, 128, 128])
    embedding_frequencies: int = Field(default=16, ge=0)
    embedding_max_frequency: float = Field(default=64.0, gt=0)

    checkpoint_every: int = Field(default=0, ge=0, description="0 disables")

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _pool_divisible(self) -> "TrainConfig":
        if self.minibatch_size > self.pairs:
            raise ValueError(
                f"minibatch_size {self.minibatch_size} exceeds pairs {self.pairs}"
            )
        if self.pairs % self.minibatch_size != 0:
            raise ValueError(
                f"pairs {self.pairs} must be divisible by minibatch_size "
                f"{self.minibatch_size}"
            )
        beta1, beta2 = self.adam_betas
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("adam_betas must lie in [0, 1)")
        return self

    def denoiser_spec(self, input_dim: int, class_count: int) -> DenoiserSpec:
        return DenoiserSpec(
            input_dim=input_dim,
            hidden_dims=list(self.hidden_dims),
            embedding_frequencies=self.embedding_frequencies,
            embedding_max_frequency=self.embedding_max_frequency,
            sigma_data=self.sigma_data,
            class_count=class_count if self.conditional else 0,
        )


class RunConfig(BaseModel):
    """A training config file: dataset source plus training settings."""

    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)

    model_config = ConfigDict(extra="forbid")


class RefreshRecord(BaseModel):
    """Statistics of one pool refresh."""

    refresh: int
    mean_loss: float
    mean_pairing_cost: float
    mean_independent_cost: float
    wall_time: float


class TrainLog(BaseModel):
    records: List[RefreshRecord] = Field(default_factory=list)
    checkpoints: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _monotone(self) -> "TrainLog":
        indices = [r.refresh for r in self.records]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("refresh indices must be strictly increasing")
        return self

    @property
    def losses(self) -> List[float]:
        return [r.mean_loss for r in self.records]


class Checkpoint(BaseModel):
    """Versioned, self-describing model checkpoint."""

    version: int
    kind: Literal["denoiser", "discriminator"] = "denoiser"
    model: Dict[str, Any]
    params: List[float]
    ema_params: Optional[List[float]] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    normalization: Optional[Dict[str, List[float]]] = None
    rng: Dict[str, Any] = Field(default_factory=dict)
