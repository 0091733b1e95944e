from typing import Any, Callable, Dict, List, Optional

import numpy as np
import structlog

from aot.errors import InvalidInputError
from aot.models.dataset import Dataset
from aot.models.registry import GeneratorDefinition, GeneratorRegistry, RegistryItem

# Get a logger for this module
log = structlog.get_logger()

# Create the registry using the Pydantic model
registry = GeneratorRegistry()

generator_registry = registry.registry

GeneratorFn = Callable[..., Dataset]


def register_generator(
    name: str,
    description: Optional[str] = None,
    parameters: Optional[Dict[str, Any]] = None,
    labeled: bool = False,
):
    """
    Decorator to register a dataset generator and its definition.

    Args:
        name: The name the generator is selected by
        description: A description of the distribution it samples
        parameters: Parameter names with their default values
        labeled: Whether the generator returns class labels
    Returns:
        Decorator function that registers the decorated function
    """

    def decorator(func: GeneratorFn) -> GeneratorFn:
        if name not in generator_registry:
            generator_registry[name] = RegistryItem()

        generator_registry[name].implementation = func
        generator_registry[name].definition = GeneratorDefinition(
            name=name,
            description=description or (func.__doc__ or "").strip(),
            parameters=dict(parameters or {}),
            labeled=labeled,
        )
        log.debug("Registered dataset generator", name=name)
        return func

    return decorator


# Helper functions to access the registry


def get_generator(name: str) -> Optional[GeneratorFn]:
    """Get the implementation function for a generator."""
    return registry.get_implementation(name)


def get_all_generator_definitions() -> List[Dict[str, Any]]:
    """Get all generator definitions."""
    return [item.model_dump() for item in registry.get_all_definitions()]


def run_generator(
    name: str, count: int, rng: np.random.Generator, params: Dict[str, Any]
) -> Dataset:
    """Run a generator by name with the given parameters."""
    implementation = get_generator(name)
    if implementation is None:
        log.warning("Dataset generator not found", name=name)
        raise InvalidInputError(
            f"unknown generator '{name}', available: "
            f"{sorted(generator_registry)}",
            field="generator",
        )
    definition = registry.get_definition(name)
    unknown = set(params) - set(definition.parameters if definition else {})
    if unknown:
        raise InvalidInputError(
            f"unknown parameters for generator '{name}': {sorted(unknown)}",
            field="params",
        )
    log.debug("Running dataset generator", name=name, count=count)
    return implementation(count=count, rng=rng, **params)
