"""
Process settings loaded from the environment (.env supported)
Only diagnostics and parallelism are configurable here; numeric results never depend on them
"""

import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from .exceptions import ConfigInvalid

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class Settings(BaseModel):
    log_level: str = Field(default="INFO", description="Root logging level")
    jobs: int = Field(default=1, ge=1, description="Default worker processes for simulations")
    progress: bool = Field(default=True, description="Show progress bars on stderr")

    @field_validator("log_level")
    @classmethod
    def check_level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {v}")
        return level


def load_settings(env_file: Optional[str] = None) -> Settings:
    """Read RDBW_* variables after loading an optional .env file"""
    load_dotenv(env_file)
    try:
        return Settings(
            log_level=os.getenv("RDBW_LOG_LEVEL", "INFO"),
            jobs=int(os.getenv("RDBW_JOBS", "1")),
            progress=os.getenv("RDBW_PROGRESS", "1").lower() not in ("0", "false", "no"),
        )
    except (ValidationError, ValueError) as e:
        raise ConfigInvalid(f"invalid environment settings: {e}", stage="settings")


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)
