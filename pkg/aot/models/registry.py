"""
Pydantic models for dataset generator definitions and the generator registry.
"""

from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel, Field


class GeneratorDefinition(BaseModel):
    """Public description of a registered dataset generator."""

    name: str
    description: str = ""
    parameters: Dict[str, Any] = Field(
        default_factory=dict, description="Parameter names and their defaults"
    )
    labeled: bool = False


class RegistryItem(BaseModel):
    """Registry item."""

    implementation: Optional[Callable[..., Any]] = None
    definition: Optional[GeneratorDefinition] = None


class GeneratorRegistry(BaseModel):
    """
    Registry for dataset generators and their definitions.

    Each generator has both an implementation and a definition, so the CLI
    can list what is available and run configs can select by name.
    """

    registry: Dict[str, RegistryItem] = Field(default_factory=dict)

    def get_implementation(self, name: str) -> Optional[Callable[..., Any]]:
        """Get a generator implementation by name."""
        registry_item = self.registry.get(name)
        return registry_item.implementation if registry_item else None

    def get_definition(self, name: str) -> Optional[GeneratorDefinition]:
        """Get a generator definition by name."""
        registry_item = self.registry.get(name)
        return registry_item.definition if registry_item else None

    def get_all_definitions(self) -> List[GeneratorDefinition]:
        """Get all generator definitions."""
        return [
            item.definition
            for item in self.registry.values()
            if item.definition is not None
        ]
