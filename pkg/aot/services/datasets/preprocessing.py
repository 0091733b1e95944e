from typing import Tuple

import numpy as np
import structlog

from aot.errors import InvalidInputError
from aot.models.dataset import Dataset, NormalizationRecord

log = structlog.get_logger()


def normalize(dataset: Dataset, target_std: float = 0.5) -> Dataset:
    """
    Shift to zero mean and scale every dimension to standard deviation
    `target_std`.

    The stored record maps back to the raw coordinates of the input, composing
    with any normalisation the input already carried. Dimensions with zero
    variance are only shifted.
    """
    if not (np.isfinite(target_std) and target_std > 0):
        raise InvalidInputError("target_std must be positive", field="target_std")

    shift = dataset.points.mean(axis=0)
    std = dataset.points.std(axis=0)
    flat = std == 0
    if np.any(flat):
        log.warning(
            "zero-variance dimensions left unscaled",
            dims=np.flatnonzero(flat).tolist(),
        )
    scale = np.where(flat, 1.0, std / target_std)
    step = NormalizationRecord(shift=shift, scale=scale)

    previous = dataset.normalization
    if previous is None:
        record = step
    else:
        # raw = (normalized * scale + shift) * prev.scale + prev.shift
        record = NormalizationRecord(
            shift=previous.shift + previous.scale * shift,
            scale=previous.scale * scale,
        )
    return Dataset(
        points=step.apply(dataset.points),
        labels=dataset.labels,
        class_count=dataset.class_count,
        normalization=record,
    )


def denormalize(dataset: Dataset, points: np.ndarray) -> np.ndarray:
    """Map points from `dataset`'s normalised space to its raw coordinates."""
    return dataset.denormalize(points)


def split(
    dataset: Dataset, held_out: float, rng: np.random.Generator
) -> Tuple[Dataset, Dataset]:
    """Seeded (train, held-out) split; labels and normalisation are kept."""
    if not 0 < held_out < 1:
        raise InvalidInputError("held_out must lie in (0, 1)", field="held_out")
    count = int(round(dataset.size * held_out))
    if count < 1 or count >= dataset.size:
        raise InvalidInputError(
            f"held_out={held_out} leaves an empty part of {dataset.size} points",
            field="held_out",
        )
    order = rng.permutation(dataset.size)
    train = dataset.subset(np.sort(order[count:]))
    held = dataset.subset(np.sort(order[:count]))
    return train, held
