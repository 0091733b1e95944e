"""
Pydantic model for the manifest every CLI command writes before it starts work.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class RunManifest(BaseModel):
    """Everything needed to replay a command: its options, config and seed."""

    command: str
    options: Dict[str, Any] = Field(default_factory=dict)
    config: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None
    threads: int = 1
    artifacts: Dict[str, str] = Field(default_factory=dict)
    version: str

    model_config = ConfigDict(extra="forbid")

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
        )
        return path

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunManifest":
        return cls.model_validate_json(Path(path).read_text())
