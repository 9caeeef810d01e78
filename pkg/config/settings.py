import os
import json
import logging
from typing import Any, Dict, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

load_dotenv()

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
DEFAULT_BUDGET = 2 ** 25

_ENV_KEYS = {
    "budget": ("ACAUSAL_BUDGET", int),
    "seed": ("ACAUSAL_SEED", int),
    "tolerance": ("ACAUSAL_TOLERANCE", float),
    "samples": ("ACAUSAL_SAMPLES", int),
    "workers": ("ACAUSAL_WORKERS", int),
    "log_level": ("ACAUSAL_LOG_LEVEL", str),
    "data_dir": ("ACAUSAL_DATA_DIR", str),
}


class SimulatorSettings:
    """Simulator settings: defaults, overridden by a JSON file, overridden by the environment"""

    def __init__(self):
        self.config_file = os.getenv('ACAUSAL_CONFIG', 'acausal.json')
        values = self._get_defaults()

        # Priority 2: JSON settings file
        if os.path.exists(self.config_file):
            values.update(self._load_from_json_file(self.config_file))

        # Priority 1: individual environment variables
        values.update(self._load_from_environment())

        self.budget: int = values["budget"]
        self.seed: int = values["seed"]
        self.tolerance: float = values["tolerance"]
        self.samples: int = values["samples"]
        self.workers: int = values["workers"]
        self.log_level: str = str(values["log_level"]).upper()
        self.data_dir: str = values["data_dir"]
        self._validate_settings()

    @staticmethod
    def _get_defaults() -> Dict[str, Any]:
        return {
            "budget": DEFAULT_BUDGET,
            "seed": 0,
            "tolerance": 1e-9,
            "samples": 200,
            "workers": 1,
            "log_level": "INFO",
            "data_dir": os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data"),
        }

    def _load_from_json_file(self, file_path: str) -> Dict[str, Any]:
        """Load settings from a JSON file; unknown keys are ignored"""
        try:
            with open(file_path, 'r') as f:
                data = json.load(f)
            if not isinstance(data, dict):
                raise ValueError("Settings file must hold a JSON object")
        except Exception as e:
            logger.error(f"Error loading settings from file {file_path}: {str(e)}")
            return {}

        loaded = {}
        for key, (_, cast) in _ENV_KEYS.items():
            if key in data:
                try:
                    loaded[key] = cast(data[key])
                except (TypeError, ValueError) as e:
                    logger.error(f"Ignoring invalid {key} in {file_path}: {str(e)}")
        return loaded

    @staticmethod
    def _load_from_environment() -> Dict[str, Any]:
        loaded = {}
        for key, (env_name, cast) in _ENV_KEYS.items():
            raw = os.getenv(env_name, '')
            if not raw:
                continue
            try:
                loaded[key] = cast(raw)
            except ValueError:
                logger.error(f"Ignoring {env_name}={raw!r}: expected {cast.__name__}")
        return loaded

    def _validate_settings(self):
        if self.budget < 1:
            raise ValueError(f"Budget must be positive, got {self.budget}")
        if self.tolerance <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tolerance}")
        if self.samples < 1:
            raise ValueError(f"Sample count must be positive, got {self.samples}")
        if self.workers < 1:
            raise ValueError(f"Worker count must be positive, got {self.workers}")
        if self.seed < 0:
            raise ValueError(f"Seed must be unsigned, got {self.seed}")

    def data_path(self, path: str) -> str:
        """Existing paths are used as given; other names are looked up in the data directory"""
        if os.path.exists(path):
            return path
        candidate = os.path.join(self.data_dir, path)
        return candidate if os.path.exists(candidate) else path

    def get_settings_summary(self) -> Dict[str, Any]:
        """Get a summary of the active settings"""
        return {
            "config_file": self.config_file,
            "budget": self.budget,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "workers": self.workers,
            "log_level": self.log_level,
            "data_dir": self.data_dir,
        }


class RunConfig(BaseModel):
    """Validated configuration of one CLI run; embedded in every report"""

    model_config = ConfigDict(extra="forbid")

    subcommand: str
    seed: int = Field(ge=0)
    tolerance: float = Field(gt=0)
    samples: int = Field(ge=1)
    budget: int = Field(ge=1)
    workers: int = Field(default=1, ge=1)
    input_paths: list[str] = Field(default_factory=list)
    output_path: Optional[str] = None
    output_format: Literal["json", "csv"] = "json"
    timing: bool = False
    options: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_settings(cls, subcommand: str, base: Optional[SimulatorSettings] = None, **overrides) -> "RunConfig":
        base = base or settings
        values = {
            "subcommand": subcommand,
            "seed": base.seed,
            "tolerance": base.tolerance,
            "samples": base.samples,
            "budget": base.budget,
            "workers": base.workers,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def report_dict(self) -> Dict[str, Any]:
        """Fields that determine results; parallelism and output location are left out"""
        return self.model_dump(exclude={"workers", "output_path"})


# Global settings instance
settings = SimulatorSettings()
