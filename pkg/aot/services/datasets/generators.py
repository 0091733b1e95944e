"""
Toy 2-D distributions.

Every generator takes `count` and a seeded `numpy.random.Generator` and is
deterministic given both.
"""

import math
from typing import Optional, Sequence

import numpy as np

from aot.errors import InvalidInputError
from aot.models.dataset import Dataset
from aot.services.datasets.registry import register_generator


def _check_count(count: int) -> None:
    if count < 1:
        raise InvalidInputError(f"count must be positive, got {count}", field="count")


def _check_std(std: float) -> None:
    if not (math.isfinite(std) and std > 0):
        raise InvalidInputError("std must be finite and positive", field="std")


def circle_means(k_modes: int, radius: float = 2.0) -> np.ndarray:
    """k points evenly spaced on a circle, the first at (radius, 0)."""
    angles = 2.0 * np.pi * np.arange(k_modes) / k_modes
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


@register_generator(
    name="mixture",
    description="Gaussian mixture with equal weights; labels are mode indices",
    parameters={"k_modes": None, "means": None, "std": 0.25},
    labeled=True,
)
def make_mixture(
    count: int,
    rng: np.random.Generator,
    k_modes: Optional[int] = None,
    means: Optional[Sequence[Sequence[float]]] = None,
    std: float = 0.25,
) -> Dataset:
    """Isotropic Gaussian modes chosen uniformly at random."""
    _check_count(count)
    _check_std(std)
    if means is None:
        k = 2 if k_modes is None else k_modes
        if k < 1:
            raise InvalidInputError("k_modes must be at least 1", field="k_modes")
        centres = circle_means(k)
    else:
        centres = np.asarray(means, dtype=np.float64)
        if centres.ndim != 2 or centres.shape[0] < 1:
            raise InvalidInputError("means must have shape (k, d)", field="means")
        if k_modes is not None and k_modes != centres.shape[0]:
            raise InvalidInputError(
                f"k_modes={k_modes} but {centres.shape[0]} means given",
                field="k_modes",
            )
    k = centres.shape[0]
    modes = rng.integers(0, k, size=count)
    points = centres[modes] + std * rng.standard_normal((count, centres.shape[1]))
    return Dataset(points=points, labels=modes, class_count=k)


@register_generator(
    name="ring",
    description="Points on a circle with radial Gaussian jitter",
    parameters={"radius": 2.0, "std": 0.05},
)
def make_ring(
    count: int,
    rng: np.random.Generator,
    radius: float = 2.0,
    std: float = 0.05,
) -> Dataset:
    _check_count(count)
    _check_std(std)
    if not (math.isfinite(radius) and radius > 0):
        raise InvalidInputError("radius must be positive", field="radius")
    angles = rng.uniform(0.0, 2.0 * np.pi, size=count)
    radii = radius + std * rng.standard_normal(count)
    points = radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return Dataset(points=points)


def checkerboard_cells(cells: int) -> np.ndarray:
    """(row, col) of permitted cells: those with an even row + col."""
    grid = np.array([(i, j) for i in range(cells) for j in range(cells)])
    return grid[(grid.sum(axis=1) % 2) == 0]


@register_generator(
    name="checkerboard",
    description="Uniform over the dark squares of a board centred at the origin",
    parameters={"cells": 4, "cell_size": 1.0},
    labeled=True,
)
def make_checkerboard(
    count: int,
    rng: np.random.Generator,
    cells: int = 4,
    cell_size: float = 1.0,
) -> Dataset:
    """Labels index the permitted cell each point was drawn from."""
    _check_count(count)
    if cells < 2:
        raise InvalidInputError("cells must be at least 2", field="cells")
    if not (math.isfinite(cell_size) and cell_size > 0):
        raise InvalidInputError("cell_size must be positive", field="cell_size")

    permitted = checkerboard_cells(cells)
    chosen = rng.integers(0, permitted.shape[0], size=count)
    offset = rng.uniform(0.0, 1.0, size=(count, 2))
    corner = -0.5 * cells * cell_size
    points = corner + (permitted[chosen] + offset) * cell_size
    return Dataset(points=points, labels=chosen, class_count=permitted.shape[0])


@register_generator(
    name="gaussian",
    description="Single isotropic Gaussian",
    parameters={"dim": 2, "std": 1.0, "mean": None},
)
def make_gaussian(
    count: int,
    rng: np.random.Generator,
    dim: int = 2,
    std: float = 1.0,
    mean: Optional[Sequence[float]] = None,
) -> Dataset:
    _check_count(count)
    _check_std(std)
    centre = np.zeros(dim) if mean is None else np.asarray(mean, dtype=np.float64)
    if centre.shape != (dim,):
        raise InvalidInputError(f"mean must have length {dim}", field="mean")
    return Dataset(points=centre + std * rng.standard_normal((count, dim)))


@register_generator(
    name="point_mass",
    description="Every point at the same location",
    parameters={"mean": [2.0, 1.0]},
)
def make_point_mass(
    count: int,
    rng: np.random.Generator,
    mean: Sequence[float] = (2.0, 1.0),
) -> Dataset:
    _check_count(count)
    centre = np.asarray(mean, dtype=np.float64)
    if centre.ndim != 1 or centre.size < 1:
        raise InvalidInputError("mean must be a vector", field="mean")
    return Dataset(points=np.tile(centre, (count, 1)))
