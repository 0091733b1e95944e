"""
Dataset generators, CSV ingestion and preprocessing.
"""

import numpy as np
import structlog

from aot.models.dataset import Dataset, DatasetConfig
from aot.services.datasets import generators  # noqa: F401  registers generators
from aot.services.datasets.csv_io import load_csv, write_csv
from aot.services.datasets.preprocessing import denormalize, normalize, split
from aot.services.datasets.registry import (
    get_all_generator_definitions,
    get_generator,
    run_generator,
)

log = structlog.get_logger()


def build_dataset(config: DatasetConfig, rng: np.random.Generator) -> Dataset:
    """Load or generate the dataset a run config names, normalised if asked."""
    if config.source == "csv":
        dataset = load_csv(config.csv)
    else:
        dataset = run_generator(config.generator, config.count, rng, config.params)
    if config.normalize:
        dataset = normalize(dataset, config.target_std)
    log.info(
        "dataset ready",
        source=config.source,
        count=dataset.size,
        dim=dataset.dim,
        classes=dataset.class_count if dataset.is_labeled else 0,
    )
    return dataset


__all__ = [
    "build_dataset",
    "denormalize",
    "get_all_generator_definitions",
    "get_generator",
    "load_csv",
    "normalize",
    "run_generator",
    "split",
    "write_csv",
]
