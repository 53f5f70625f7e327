"""Anticipatory collaboration planner core modules"""

from .errors import CollabError
from .reporter import Reporter
from .simulator import Assets, RolloutConfig, run_rollout
from .suite import SuiteConfig, multiplier_sweep, run_suite

__all__ = ['CollabError', 'Reporter', 'Assets', 'RolloutConfig', 'run_rollout',
           'SuiteConfig', 'multiplier_sweep', 'run_suite']
