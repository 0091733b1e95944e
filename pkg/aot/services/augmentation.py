from typing import Optional

import numpy as np

from aot.models.training import AugmentationConfig


def augment(
    points: np.ndarray,
    config: Optional[AugmentationConfig],
    rng: np.random.Generator,
) -> np.ndarray:
    """Apply point augmentation; `none` returns the input untouched."""
    if config is None or config.mode == "none":
        return points
    if config.jitter_std == 0:
        return points
    return points + rng.normal(0.0, config.jitter_std, size=points.shape)
