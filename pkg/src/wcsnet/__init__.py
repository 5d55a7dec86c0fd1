"""Throughput of mobile networks powered by wireless charging stations.

The analytic side is an energy x distance Markov chain (``kernel``, ``chain``),
its inter-meeting spectrum (``intermeeting``) and closed-form limits
(``asymptotics``); ``montecarlo`` simulates the same network slot by slot.
"""
from .asymptotics import infinite_battery_throughput, scaling_bounds
from .chain import SteadyState, analyze, build_chain, solve_steady_state, throughput_from_pon
from .config import ConfigError, NetworkConfig, default_config, load_config
from .kernel import TransitionKernel, build_kernel
from .montecarlo import SimStats, run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NetworkConfig",
    "SimStats",
    "SteadyState",
    "TransitionKernel",
    "analyze",
    "build_chain",
    "build_kernel",
    "default_config",
    "infinite_battery_throughput",
    "load_config",
    "run",
    "scaling_bounds",
    "solve_steady_state",
    "throughput_from_pon",
]
