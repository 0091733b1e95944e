"""
Utility for validating run configuration documents.
"""

import copy
import json
from typing import Any, Dict, Sequence, Tuple, Type, TypeVar, Union

from pydantic import BaseModel

ConfigModel = TypeVar("ConfigModel", bound=BaseModel)


def validate_config(
    config_json: str, model: Type[ConfigModel]
) -> Tuple[bool, Union[ConfigModel, str]]:
    """
    Validate that a JSON string can be parsed into the given config model.

    Args:
        config_json: JSON string containing a run configuration
        model: The pydantic model to validate against

    Returns:
        A tuple containing:
        - bool: True if validation was successful, False otherwise
        - Union[ConfigModel, str]: Either the parsed model or an error message
    """
    try:
        # Parse JSON string to dictionary
        config_data = json.loads(config_json)

        return validate_config_dict(config_data, model)
    except json.JSONDecodeError as e:
        return False, f"Invalid JSON format: {str(e)}"


def validate_config_dict(
    config_data: Dict[str, Any], model: Type[ConfigModel]
) -> Tuple[bool, Union[ConfigModel, str]]:
    """
    Validate that a dictionary can be parsed into the given config model.

    Returns:
        (True, model instance) or (False, error message)
    """
    if not isinstance(config_data, dict):
        return False, "Validation error: configuration must be a JSON object"
    try:
        return True, model(**config_data)
    except Exception as e:
        return False, f"Validation error: {str(e)}"


def parse_override_value(text: str) -> Any:
    """JSON literals (numbers, booleans, lists, objects) or a bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(
    config_data: Dict[str, Any], overrides: Sequence[str]
) -> Dict[str, Any]:
    """
    Apply `key=value` overrides; dotted keys address nested sections, e.g.
    `train.pairs=256`.

    Raises:
        ValueError: an override is not of the form key=value
    """
    result = copy.deepcopy(config_data)
    for override in overrides:
        key, sep, value = override.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"override '{override}' is not of the form key=value")
        parts = key.strip().split(".")
        target = result
        for part in parts[:-1]:
            node = target.get(part)
            if not isinstance(node, dict):
                node = {}
                target[part] = node
            target = node
        target[parts[-1]] = parse_override_value(value)
    return result
