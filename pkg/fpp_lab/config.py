"""
Experiment configuration.

A config is one TOML file:

    experiment = "mu"
    dimension = 2
    master_seed = 7
    replicas = 200
    window_radius = 20

    [distribution]
    kind = "exponential"
    rate = 1.0

    [params]
    z = [1, 0]

    [thresholds]
    confidence = { level = 0.95 }

Statistical thresholds default to config/default_thresholds.json; the
[thresholds] table overrides single keys.
"""

import copy
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]

from fpp_lab.catalog import get_experiment, resolve_params
from fpp_lab.errors import ConfigError
from fpp_lab.lattice import SUPPORTED_DIMENSIONS
from fpp_lab.weights import DistributionSpec

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS_PATH = Path(__file__).resolve().parent.parent / 'config' / 'default_thresholds.json'
THREADS_ENV = 'FPP_LAB_THREADS'
DEFAULT_WINDOW_RADIUS = 20
SEED_LIMIT = 2 ** 64

TOP_LEVEL_KEYS = (
    'experiment', 'dimension', 'master_seed', 'replicas', 'window_radius',
    'distribution', 'params', 'thresholds',
)

# Params holding a single point of Z^d or R^d
POINT_PARAMS = ('z', 'x', 'pair_offset')


def default_thresholds() -> Dict[str, Any]:
    """Built-in thresholds, mirrored by config/default_thresholds.json."""
    return {
        "confidence": {"level": 0.95},
        "trend": {"increment_ratio": 0.9},
        "tails": {"slope_tolerance": 0.5},
        "censoring": {"max_censored_fraction": 0.05},
        "regen": {"ci_widths": 2.0, "min_traces": 30},
    }


def _overlay(base: Dict[str, Any], overrides: Mapping[str, Any], prefix: str = '') -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        name = f"{prefix}{key}"
        if key not in merged:
            raise ConfigError(f"Unknown threshold '{name}'")
        if isinstance(merged[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"Threshold '{name}' must be a table")
            merged[key] = _overlay(merged[key], value, f"{name}.")
        else:
            if isinstance(value, Mapping) or isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"Threshold '{name}' must be a number, got {value!r}")
            merged[key] = value
    return merged


class Thresholds:
    """Statistical acceptance thresholds with dotted-key access."""

    def __init__(self, overrides: Optional[Mapping[str, Any]] = None, defaults_path: Optional[Path] = None):
        """
        Load defaults and apply overrides.

        Args:
            overrides: Nested table from the config's [thresholds]
            defaults_path: JSON defaults (config/default_thresholds.json when omitted)
        """
        path = defaults_path or DEFAULT_THRESHOLDS_PATH
        try:
            with open(path, 'r', encoding='utf-8') as f:
                base = json.load(f)
                logger.debug(f"Loaded default thresholds from {path}")
        except FileNotFoundError:
            logger.warning(f"Default thresholds not found at {path}, using built-in defaults")
            base = default_thresholds()
        self.config = _overlay(base, overrides or {})

    def get(self, key: str, default: Any = None) -> Any:
        """Get a threshold by dotted key, e.g. 'trend.increment_ratio'."""
        value: Any = self.config
        for k in key.split('.'):
            if isinstance(value, dict):
                value = value.get(k, default)
            else:
                return default
        return value if value is not None else default

    @property
    def confidence(self) -> float:
        return float(self.get('confidence.level', 0.95))

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Thresholds) and self.config == other.config

    def __repr__(self) -> str:
        return f"Thresholds({self.config!r})"


def _require_int(data: Mapping[str, Any], key: str, minimum: int, default: Optional[int] = None) -> int:
    value = data.get(key, default)
    if value is None:
        raise ConfigError(f"Missing required key '{key}'")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"'{key}' must be at least {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: what to run, on which law, with how many replicas."""
    experiment: str
    dimension: int
    distribution: DistributionSpec
    master_seed: int
    replicas: int
    window_radius: int
    params: Dict[str, Any] = field(default_factory=dict)
    thresholds: Thresholds = field(default_factory=Thresholds)

    def param(self, key: str) -> Any:
        return self.params.get(key)

    @property
    def confidence(self) -> float:
        return self.thresholds.confidence

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'ExperimentConfig':
        """
        Validate and build a config.

        Raises:
            ConfigError: On unknown keys, missing keys or invalid values
        """
        unknown = sorted(set(data) - set(TOP_LEVEL_KEYS))
        if unknown:
            raise ConfigError(f"Unknown config keys: {unknown}")
        name = data.get('experiment')
        if not isinstance(name, str):
            raise ConfigError("Missing required key 'experiment'")
        get_experiment(name)

        dimension = _require_int(data, 'dimension', 1)
        if dimension not in SUPPORTED_DIMENSIONS:
            raise ConfigError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {dimension}")
        master_seed = _require_int(data, 'master_seed', 0, default=0)
        if master_seed >= SEED_LIMIT:
            raise ConfigError(f"master_seed must fit in 64 bits, got {master_seed}")
        replicas = _require_int(data, 'replicas', 1)
        window_radius = _require_int(data, 'window_radius', 1, default=DEFAULT_WINDOW_RADIUS)

        dist = data.get('distribution')
        if not isinstance(dist, Mapping):
            raise ConfigError("Missing [distribution] table")
        try:
            distribution = DistributionSpec.from_dict(dist)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid distribution: {e}") from e

        raw_params = data.get('params', {})
        if not isinstance(raw_params, Mapping):
            raise ConfigError("[params] must be a table")
        params = resolve_params(name, dict(raw_params))
        for key in POINT_PARAMS:
            value = params.get(key)
            if value is not None and (not isinstance(value, list) or len(value) != dimension):
                raise ConfigError(f"param '{key}' must list {dimension} coordinates, got {value!r}")
        for value in params.get('z_grid') or []:
            if not isinstance(value, list) or len(value) != dimension:
                raise ConfigError(f"z_grid entries must list {dimension} coordinates, got {value!r}")

        raw_thresholds = data.get('thresholds', {})
        if not isinstance(raw_thresholds, Mapping):
            raise ConfigError("[thresholds] must be a table")

        return cls(
            experiment=name,
            dimension=dimension,
            distribution=distribution,
            master_seed=master_seed,
            replicas=replicas,
            window_radius=window_radius,
            params=params,
            thresholds=Thresholds(raw_thresholds),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'experiment': self.experiment,
            'dimension': self.dimension,
            'master_seed': self.master_seed,
            'replicas': self.replicas,
            'window_radius': self.window_radius,
            'distribution': self.distribution.to_dict(),
            'params': copy.deepcopy(self.params),
            'thresholds': self.thresholds.to_dict(),
        }

    def poolable_dict(self) -> Dict[str, Any]:
        """Everything that must agree for two reports to be merged."""
        data = self.to_dict()
        del data['master_seed']
        del data['replicas']
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read a TOML (or JSON config echo) file.

    Raises:
        ConfigError: If the file cannot be read or is invalid
    """
    path = Path(path)
    try:
        if path.suffix == '.json':
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        else:
            with open(path, 'rb') as f:
                data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config not found: {path}") from e
    except (OSError, tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot parse config {path}: {e}") from e

    config = ExperimentConfig.from_dict(data)
    logger.info(f"Loaded {config.experiment} config from {path}")
    return config


def threads_from_env(default: int = 1) -> int:
    """
    Worker count from FPP_LAB_THREADS.

    Raises:
        ConfigError: If the variable is set but not a positive integer
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == '':
        return default
    try:
        threads = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive, got {threads}")
    return threads
