"""Resilient AI-driven network control on a simulated 5G/6G edge deployment.

The package bundles the reliability math, a tick-based network simulator with
attack injection, the perception/decision/actuation control loop and the
two reference baselines, plus KPI reporting and a CLI.
"""

from .errors import (
    ConfigError, DomainError, EnactmentError, ResilnetError, RouteError, StateError, StreamError,
    TraceRangeError, WarmupError,
)
from .scenario import Scenario, builtin_names, load_scenario, scenario_from_dict
from .sim import STRATEGIES, RunConfig, RunResult, run, run_batch

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "EnactmentError", "ResilnetError", "RouteError", "StateError",
    "StreamError", "TraceRangeError", "WarmupError", "Scenario", "builtin_names", "load_scenario",
    "scenario_from_dict", "STRATEGIES", "RunConfig", "RunResult", "run", "run_batch",
]
