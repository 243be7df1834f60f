"""Process-level settings read from the environment."""

from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class GazeKitSettings(BaseSettings):
    """Environment settings (prefix ``GAZEKIT_``)."""

    cache: Optional[Path] = Field(None, description="Feature cache directory")
    config_path: Optional[Path] = Field(None, description="Pipeline YAML configuration")
    log_level: str = Field("INFO", description="Default log level")
    log_format: str = Field("console", description="Default log format (console/json)")
    rice_root: Optional[Path] = Field(
        None, description="Root of a local export of the public tablet gaze dataset"
    )

    model_config = SettingsConfigDict(env_prefix="GAZEKIT_", extra="ignore")


def get_settings() -> GazeKitSettings:
    """Read settings fresh from the current environment."""
    return GazeKitSettings()
