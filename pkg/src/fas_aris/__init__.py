"""Joint beamforming, fluid-antenna positioning and active-RIS reflection design."""

from .ao import AOOptions, AOState, initialize, optimize, run_ao
from .baselines import passive_element_count, run_baseline
from .channel import AntennaLayout, Channels, assemble_channels
from .errors import (ArisBudgetExhausted, ConfigError, DimensionError, FasArisError, InfeasibleError,
                     PackingError, SolverError)
from .metrics import Solution, achievable_rate, aris_power, check_feasibility
from .scenario import ScenarioConfig, load_config, sample_scenario

__version__ = "0.1.0"

__all__ = [
    "AOOptions", "AOState", "AntennaLayout", "ArisBudgetExhausted", "Channels", "ConfigError",
    "DimensionError", "FasArisError", "InfeasibleError", "PackingError", "ScenarioConfig", "Solution",
    "SolverError", "achievable_rate", "aris_power", "assemble_channels", "check_feasibility",
    "initialize", "load_config", "optimize", "passive_element_count", "run_ao", "run_baseline",
    "sample_scenario", "__version__",
]
