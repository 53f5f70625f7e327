"""
Configuration - config.yaml loading, defaults and typed settings
"""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from core.errors import ConfigError
from core.human_model import NoiseConfig
from core.planner import PlannerConfig
from core.suite import DEFAULT_TASKS, SuiteConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: Dict[str, Any] = {
    'planner': {
        'horizon': 60,
        'trials': 2000,
        'exploration': 1.4142135623730951,
        'init_depth': 3,
        'profile': 'mixed',
        'discount': 1.0,
        'include_noop': True,
        'ids_budget': 5000,
    },
    'noise': {
        'enabled': True,
        'mean': 0.0,
        'stddev': 0.1,
        'threshold_ratio': 0.5,
        'fragile_scale': 1.5,
        'verb_scale': {},
    },
    'rollout': {
        'max_steps': 60,
        'multiplier': 1.0,
        'bootstrap_trials': 10,
        'model_cache': None,
    },
    'suite': {
        'rollouts': 30,
        'seed': 0,
        'modes': ['ours', 'rddl_baseline', 'llm_baseline'],
        'multipliers': [0.0, 0.5, 1.0, 2.0, 4.0],
        'workers': 1,
        'out_dir': 'results',
        'save_traces': False,
        'tasks': {name: list(seq) for name, seq in DEFAULT_TASKS.items()},
    },
    'anticipation': {
        'strategy': 'few-shot',
        'remote': False,
        'endpoint': None,
    },
    'assets': {},
}


def _merge(base: Dict[str, Any], override: Mapping[str, Any], where: str = "") -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key '{where}{key}'")
        if isinstance(base[key], dict) and base[key] and not isinstance(value, Mapping):
            raise ConfigError(f"config key '{where}{key}' must be a mapping")
        if isinstance(base[key], dict) and base[key] and key != 'tasks':
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load ``path`` (YAML) over the built-in defaults.

    A missing default ``config.yaml`` is not an error; an explicit path that
    does not exist is.
    """
    if path is None:
        path = Path('config.yaml')
        if not path.exists():
            return copy.deepcopy(DEFAULT_CONFIG)
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, Mapping):
        raise ConfigError(f"config file {path} must hold a mapping")
    logger.debug("loaded config from %s", path)
    return _merge(DEFAULT_CONFIG, data)


def planner_config(config: Mapping[str, Any], seed: int = 0) -> PlannerConfig:
    try:
        return PlannerConfig(seed=seed, **config['planner'])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid planner settings: {exc}") from exc


def noise_config(config: Mapping[str, Any]) -> NoiseConfig:
    try:
        return NoiseConfig(**config['noise'])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid noise settings: {exc}") from exc


def suite_config(config: Mapping[str, Any], **overrides) -> SuiteConfig:
    """
    Build a SuiteConfig from a loaded config; non-None ``overrides`` win.

    Raises:
        ConfigError: on invalid values (for example a rollout count below 1)
    """
    suite, rollout = config['suite'], config['rollout']
    values = {
        'rollouts': suite['rollouts'],
        'tasks': {name: tuple(seq) for name, seq in suite['tasks'].items()},
        'modes': tuple(suite['modes']),
        'multipliers': tuple(float(v) for v in suite['multipliers']),
        'multiplier': float(rollout['multiplier']),
        'seed': suite['seed'],
        'out_dir': suite['out_dir'],
        'workers': suite['workers'],
        'save_traces': bool(suite['save_traces']),
        'max_steps': rollout['max_steps'],
        'bootstrap_trials': rollout['bootstrap_trials'],
        'strategy': config['anticipation']['strategy'],
        'remote_predictor': bool(config['anticipation']['remote']),
        'remote_endpoint': config['anticipation']['endpoint'],
        'model_cache': rollout['model_cache'],
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SuiteConfig(planner=planner_config(config), noise=noise_config(config), **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid suite settings: {exc}") from exc
