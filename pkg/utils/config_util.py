"""Experiment configuration: built-in defaults < environment (.env) < JSON file < CLI flags."""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional
import json
import logging
import os

from dotenv import load_dotenv

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

ENV_VARS = {
    "workdir": "DEREV_WORKDIR",
    "clean_dir": "DEREV_CLEAN_DIR",
    "jobs": "DEREV_JOBS",
    "seed": "DEREV_SEED",
    "log_level": "DEREV_LOG_LEVEL",
}

DEFAULT_CONTEXT_GRID = [
    [0, 0], [1, 0], [0, 1], [1, 1], [2, 2], [5, 5],
    [20, 0], [15, 5], [10, 10], [5, 15], [0, 20],
]


@dataclass
class ExperimentConfig:
    clean_dir: str = "clean"
    workdir: str = "work"
    seed: int = 0
    jobs: int = 1
    log_level: str = "INFO"

    # corpus
    rir_count: Optional[int] = None
    nominal_dims: List[float] = field(default_factory=lambda: [7.95, 5.68, 4.5])
    unique_rirs: bool = True
    fractional_delay: bool = False
    absorption_model: str = "sabine"
    high_pass: bool = True

    # non-causal FIR
    fir_p: int = 10
    fir_q: int = 10
    ridge: Any = "auto"
    context_grid: List[List[int]] = field(default_factory=lambda: [list(pq) for pq in DEFAULT_CONTEXT_GRID])

    # reference enhancer
    enhancer: str = "causal-fir"
    enhancer_p: int = 10

    # MLP
    mlp_p: int = 10
    mlp_q: int = 10
    hidden: int = 128
    n_hidden: int = 3
    learning_rate: float = 0.1
    batch_size: int = 200
    epochs: int = 50
    newbob_threshold: float = 0.001
    max_halvings: int = 5
    mlp_context_grid: List[List[int]] = field(default_factory=list)

    # mixing
    mix_configs: List[int] = field(default_factory=lambda: [1, 2, 3, 4])
    lambda_grid: Optional[List[float]] = None

    # diagnostics
    max_lag: int = 100
    autocorr_magnitude: bool = True
    export_format: str = "pgm"
    export_utterance: Optional[str] = None

    def __post_init__(self):
        if self.seed is None:
            raise ConfigError("a seed is required")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if len(self.nominal_dims) != 3:
            raise ConfigError(f"nominal_dims needs 3 values, got {self.nominal_dims}")
        if self.ridge != "auto" and (not isinstance(self.ridge, (int, float)) or self.ridge < 0):
            raise ConfigError(f"ridge must be 'auto' or a non-negative number, got {self.ridge!r}")
        for name in ("context_grid", "mlp_context_grid"):
            for entry in getattr(self, name):
                if len(entry) != 2 or min(entry) < 0:
                    raise ConfigError(f"{name} entry {entry} is not a non-negative (p, q) pair")
        for value in ("fir_p", "fir_q", "enhancer_p", "mlp_p", "mlp_q"):
            if getattr(self, value) < 0:
                raise ConfigError(f"{value} must be >= 0")
        if self.max_lag < 1:
            raise ConfigError(f"max_lag must be >= 1, got {self.max_lag}")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"unknown log level {self.log_level}")
        if self.export_format not in ("csv", "pgm"):
            raise ConfigError(f"export_format must be csv or pgm, got {self.export_format}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _coerce(name: str, value: str):
    if name in ("jobs", "seed"):
        try:
            return int(value)
        except ValueError as e:
            raise ConfigError(f"{ENV_VARS[name]} must be an integer, got {value!r}") from e
    return value


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        document = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"Couldn't read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e

    if not isinstance(document, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return document


def load_config(config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Resolve the experiment configuration
    :param config_path: optional JSON file
    :param overrides: values given on the command line, None entries are ignored
    :return: ExperimentConfig
    """
    load_dotenv()
    known = {f.name for f in fields(ExperimentConfig)}

    values: Dict[str, Any] = {}
    for name, var in ENV_VARS.items():
        if os.getenv(var):
            values[name] = _coerce(name, os.getenv(var))
            logger.debug(f"{var} sets {name}")

    if config_path is not None:
        logger.debug(f"Reading config {config_path}")
        document = _read_json(config_path)
        unknown = sorted(set(document) - known)
        if unknown:
            raise ConfigError(f"unknown config keys in {config_path}: {unknown}")
        values.update(document)

    for name, value in (overrides or {}).items():
        if name not in known:
            raise ConfigError(f"unknown option {name}")
        if value is not None:
            values[name] = value

    try:
        return ExperimentConfig(**values)
    except TypeError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
