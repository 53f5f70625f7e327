"""
Collaboration planner utilities package
"""

from .config import load_config, suite_config
from .io_handler import IOHandler

__all__ = ['IOHandler', 'load_config', 'suite_config']
