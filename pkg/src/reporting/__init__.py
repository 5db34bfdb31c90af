"""
Run configuration, artifacts, figures and the CLI orchestration
"""

from .run_config import ConfigError, RunConfig, load_run_config
from .runner import compare, evaluate, run

__all__ = ["ConfigError", "RunConfig", "compare", "evaluate", "load_run_config", "run"]
