"""Environment configuration for the lab entry points"""
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from shared.errors import ConfigurationError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Settings(BaseModel):
    """Values read from the environment (and .env, when present)"""
    log_level: str = Field(default="INFO", description="Root logging level")
    output_dir: Path = Field(default=Path("results"), description="Default results directory")
    cache_dir: Path = Field(default=Path(".cache"), description="Reference-solution cache directory")
    workers: int = Field(default=1, ge=1, description="Worker processes for sweeps")
    mcp_port: int = Field(default=4010, ge=1, le=65535, description="Port of the MCP tool server")


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Lazy initialization of the environment settings"""
    global _settings
    if _settings is not None:
        return _settings

    load_dotenv()
    try:
        _settings = Settings(
            log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
            output_dir=Path(os.getenv("PINNLAB_OUTPUT_DIR", "results")),
            cache_dir=Path(os.getenv("PINNLAB_CACHE_DIR", ".cache")),
            workers=int(os.getenv("PINNLAB_WORKERS", "1")),
            mcp_port=int(os.getenv("PINNLAB_MCP_PORT", "4010")),
        )
    except ValueError as e:
        raise ConfigurationError(f"Invalid environment configuration: {e}") from e
    return _settings


def reset_settings() -> None:
    """Forget cached settings so the next call re-reads the environment"""
    global _settings
    _settings = None


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging the same way for every entry point"""
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT)
