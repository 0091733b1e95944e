from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables before everything else
load_dotenv()


class Settings(BaseSettings):
    """Toolkit settings, read from AOT_* environment variables or `.env`."""

    # Logging
    LOG_LEVEL: str = Field(default="INFO")
    LOG_FORMAT: str = Field(default="console", description="console or json")

    # Reproducibility
    SEED: Optional[int] = Field(default=None, description="Seed fallback (AOT_SEED)")
    THREADS: int = Field(default=1, ge=1)

    # Solvers
    ASSIGNMENT_SOLVER: Literal["scipy", "hungarian"] = Field(
        default="scipy", description="Solver used for pairing and W2"
    )
    W2_SOLVER_CAP: int = Field(default=2048, ge=1)
    BRUTE_FORCE_MAX_N: int = Field(default=10, ge=1)

    # Checkpoints
    CHECKPOINT_VERSION: int = Field(default=1)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="AOT_",
        case_sensitive=True,
        extra="ignore",
    )


# Initialize settings
settings = Settings()
