import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv, dotenv_values

from app.core.exceptions import ConfigError

# Load biến môi trường từ file .env
load_dotenv()


class Settings:
    PROJECT_NAME: str = "JM-RMT Joint Modeling Engine"
    PROJECT_VERSION: str = "1.0.0"

    # Seed fallback when neither the run config nor the CLI gives one
    SEED: Optional[int] = int(os.getenv("JMRMT_SEED")) if os.getenv("JMRMT_SEED") else None

    # Where simulate/fit/compare write by default
    OUTPUT_DIR: Path = Path(os.getenv("JMRMT_OUTPUT_DIR", "runs"))

    LOG_LEVEL: str = os.getenv("JMRMT_LOG_LEVEL", "INFO")

    # Model age enters as (age - AGE_CENTER) in every submodel
    AGE_CENTER: float = float(os.getenv("JMRMT_AGE_CENTER", "65"))

    # Worker processes for parallel chains
    JOBS: int = int(os.getenv("JMRMT_JOBS", "1"))


settings = Settings()


def read_run_config(path: Path) -> Dict[str, str]:
    """Read a key=value run-config file (dotenv syntax, '#' comments)"""
    if not Path(path).exists():
        raise ConfigError(f"Config file not found: {path}", fields=[])
    values = dotenv_values(path)
    # Empty values are treated as "not given" so defaults apply
    return {key: value for key, value in values.items() if value not in (None, "")}
