"""
Run configuration: settings defaults, an optional JSON file and command-line overrides.

Precedence is flags > JSON file (``--config`` or ``NVKIN_CONFIG``) > settings defaults.
"""
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from nvkinetics.config import settings
from nvkinetics.exceptions import ConfigError
from nvkinetics.physics.kinetics import ZeroFieldRates
from nvkinetics.physics.spin_model import SpinSystemParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    spin: SpinSystemParams = field(default_factory=SpinSystemParams)
    rates: ZeroFieldRates = field(default_factory=ZeroFieldRates)
    mw_frequency: float = settings.MW_FREQUENCY
    field_window: Tuple[float, float] = settings.FIELD_WINDOW
    theta_grid_deg: List[float] = field(default_factory=lambda: list(settings.THETA_GRID_DEG))
    intensity_grid: List[float] = field(default_factory=lambda: list(settings.INTENSITY_GRID))
    sweep_theta_deg: float = 0.0
    sweep_intensity: float = settings.MAX_INTENSITY
    t1_grid: List[float] = field(default_factory=lambda: list(settings.T1_GRID))
    linewidth: float = settings.LINEWIDTH
    n_hyperfine: int = settings.N_HYPERFINE
    spectrum_step: float = settings.SPECTRUM_STEP
    rotation_grid_deg: List[float] = field(default_factory=lambda: list(settings.ROTATION_GRID_DEG))
    mixing_fields: List[float] = field(default_factory=lambda: list(settings.MIXING_FIELDS))
    drive_axis: Optional[Tuple[float, float, float]] = None
    output_path: Optional[str] = None
    jobs: Optional[int] = settings.JOBS

    def validate(self) -> 'RunConfig':
        """Check grids and bounds; raise ConfigError on the first violation."""
        for name in ('theta_grid_deg', 'intensity_grid', 't1_grid', 'rotation_grid_deg',
                     'mixing_fields'):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")
        lo, hi = self.field_window
        if not 0.0 <= lo < hi <= 1.0:
            raise ConfigError(f"field_window must be ordered within [0, 1] T, got {self.field_window}")
        if not self.mw_frequency > 0:
            raise ConfigError(f"mw_frequency must be positive, got {self.mw_frequency}")
        if any(not 0.0 <= t <= 90.0 for t in self.theta_grid_deg + [self.sweep_theta_deg]):
            raise ConfigError("Polar angles must lie in [0, 90] degrees")
        if any(i < 0 for i in self.intensity_grid + [self.sweep_intensity]):
            raise ConfigError("Laser intensities must be non-negative")
        if any(t <= 0 for t in self.t1_grid):
            raise ConfigError("T1 values must be positive")
        if any(b < 0 or b > 1.0 for b in self.mixing_fields):
            raise ConfigError("Mixing fields must lie within [0, 1] T")
        if not self.linewidth > 0:
            raise ConfigError(f"linewidth must be positive, got {self.linewidth}")
        if self.n_hyperfine < 1:
            raise ConfigError(f"n_hyperfine must be at least 1, got {self.n_hyperfine}")
        if not self.spectrum_step > 0:
            raise ConfigError(f"spectrum_step must be positive, got {self.spectrum_step}")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if self.drive_axis is not None:
            if len(self.drive_axis) != 3 or not any(self.drive_axis):
                raise ConfigError(f"drive_axis must be a non-zero 3-vector, got {self.drive_axis}")
        return self


_NESTED = {'spin': SpinSystemParams, 'rates': ZeroFieldRates}
_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if value is None:
            continue
        if key in _NESTED and isinstance(value, dict):
            merged[key] = {**merged.get(key, {}), **{k: v for k, v in value.items() if v is not None}}
        else:
            merged[key] = value
    return merged


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Parse a JSON config file into a dict; an empty dict when no path is given."""
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {config_path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {config_path} must hold a JSON object")
    logger.info(f"Loaded config file {config_path}")
    return data


def build_run_config(values: Dict[str, Any]) -> RunConfig:
    """Turn a flat dict (nested dicts for ``spin`` and ``rates``) into a validated RunConfig."""
    unknown = set(values) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")

    kwargs = dict(values)
    try:
        for key, cls in _NESTED.items():
            if key in kwargs:
                section = kwargs[key]
                if not isinstance(section, dict):
                    raise ConfigError(f"'{key}' must be a JSON object")
                kwargs[key] = cls(**section)
        if 'field_window' in kwargs:
            kwargs['field_window'] = tuple(float(v) for v in kwargs['field_window'])
        if 'drive_axis' in kwargs and kwargs['drive_axis'] is not None:
            kwargs['drive_axis'] = tuple(float(v) for v in kwargs['drive_axis'])
        for key in ('theta_grid_deg', 'intensity_grid', 't1_grid', 'rotation_grid_deg',
                    'mixing_fields'):
            if key in kwargs:
                kwargs[key] = [float(v) for v in kwargs[key]]
        for key in ('mw_frequency', 'sweep_theta_deg', 'sweep_intensity', 'linewidth',
                    'spectrum_step'):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        for key in ('n_hyperfine', 'jobs'):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = int(kwargs[key])
        config = RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
    return config.validate()


def load_run_config(path: Optional[str] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load the run configuration.

    Args:
        path: JSON config path; falls back to NVKIN_CONFIG
        overrides: Values from command-line flags; None entries are ignored

    Returns:
        Validated RunConfig
    """
    values = read_config_file(path or settings.CONFIG_PATH)
    values = _merge(values, overrides or {})
    return build_run_config(values)


def with_rates(config: RunConfig, **changes) -> RunConfig:
    """Copy of ``config`` with some zero-field rates replaced."""
    return replace(config, rates=replace(config.rates, **changes))
