"""
Checkpoint service.

Checkpoints are versioned, self-describing JSON documents:
{"version": 1, "kind": "denoiser", "model": {...}, "params": [...],
 "ema_params": [...], "config": {...}, "normalization": {...}, "rng": {...}}
Floats are written with their shortest round-trip representation, so a
save/load cycle restores parameters bit for bit.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import structlog
from pydantic import ValidationError
from torch import nn

from aot.config import settings
from aot.errors import CheckpointError, CheckpointVersionError, CorruptCheckpointError
from aot.models.dataset import NormalizationRecord
from aot.models.guidance import DiscriminatorSpec
from aot.models.training import Checkpoint, DenoiserSpec
from aot.services.denoiser import DenoiserModel, DenoiserService
from aot.services.guidance import Discriminator
from aot.utils.rng import RngStreams

log = structlog.get_logger()

PathLike = Union[str, Path]


def _build(kind: str, spec: Dict[str, Any]) -> nn.Module:
    # Parameters are overwritten right after construction
    generator = RngStreams(0).torch_generator()
    if kind == "discriminator":
        return Discriminator(DiscriminatorSpec(**spec), generator)
    return DenoiserModel(DenoiserSpec(**spec), generator)


class CheckpointService:
    """Save and restore denoisers and discriminators."""

    @staticmethod
    def save_checkpoint(
        model: nn.Module,
        path: PathLike,
        ema: Optional[nn.Module] = None,
        config: Optional[Dict[str, Any]] = None,
        normalization: Optional[NormalizationRecord] = None,
        rng: Optional[Dict[str, Any]] = None,
    ) -> Checkpoint:
        kind = "denoiser"
        if isinstance(model.spec, DiscriminatorSpec):
            kind = "discriminator"
        checkpoint = Checkpoint(
            version=settings.CHECKPOINT_VERSION,
            kind=kind,
            model=model.spec.model_dump(mode="json"),
            params=DenoiserService.get_parameters(model).tolist(),
            ema_params=(
                None if ema is None else DenoiserService.get_parameters(ema).tolist()
            ),
            config=config or {},
            normalization=None if normalization is None else normalization.to_json(),
            rng=rng or {},
        )

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        try:
            with open(tmp, "w") as stream:
                json.dump(checkpoint.model_dump(mode="json"), stream, sort_keys=True)
            os.replace(tmp, path)
        except OSError as e:
            raise CheckpointError(f"cannot write checkpoint {path}: {e}") from e
        log.info("checkpoint saved", path=str(path), kind=kind)
        return checkpoint

    @staticmethod
    def read_checkpoint(path: PathLike) -> Checkpoint:
        """Parse and validate a checkpoint file without building a model."""
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise CorruptCheckpointError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict) or "version" not in data:
            raise CorruptCheckpointError(f"{path} has no version field")

        version = data["version"]
        if version != settings.CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"{path} has format version {version}, "
                f"supported version is {settings.CHECKPOINT_VERSION}"
            )
        try:
            return Checkpoint.model_validate(data)
        except ValidationError as e:
            raise CorruptCheckpointError(f"{path} is malformed: {e}") from e

    @staticmethod
    def model_from_checkpoint(
        checkpoint: Checkpoint, use_ema: bool = True
    ) -> nn.Module:
        try:
            model = _build(checkpoint.kind, checkpoint.model)
        except (ValidationError, TypeError) as e:
            raise CorruptCheckpointError(f"invalid model description: {e}") from e
        params = checkpoint.params
        if use_ema and checkpoint.ema_params is not None:
            params = checkpoint.ema_params
        try:
            DenoiserService.set_parameters(model, params)
        except ValueError as e:
            raise CorruptCheckpointError(str(e)) from e
        model.eval()
        return model

    @staticmethod
    def load_checkpoint(path: PathLike, use_ema: bool = True) -> nn.Module:
        """Rebuild the model; EMA parameters are used when present and asked for."""
        checkpoint = CheckpointService.read_checkpoint(path)
        model = CheckpointService.model_from_checkpoint(checkpoint, use_ema)
        log.debug("checkpoint loaded", path=str(path), kind=checkpoint.kind)
        return model

    @staticmethod
    def normalization(checkpoint: Checkpoint) -> Optional[NormalizationRecord]:
        if checkpoint.normalization is None:
            return None
        return NormalizationRecord(**checkpoint.normalization)
