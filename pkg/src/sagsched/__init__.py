"""Space-air-ground scheduling simulator with delayed-interference tracking,
a multi-agent PPO scheduler, and classical baselines."""

__version__ = "0.1.0"

from .env import NetworkEnv, RewardWeights, mdp_objective
from .errors import ConfigurationError, SchedulingError, TrainingDiverged
from .presets import preset_library
from .radio import LinkParams, build_energy_table
from .ripple import PropagationLedger, check_ripple_constraint, validate_assignment
from .scenario import ScenarioConfig, build_scenario, load_scenario, make_env
from .schedulers import aoi_lower_bound, make_baseline
from .topology import AccessPoint, ApKind, Topology, UserNode, build_topology

__all__ = [
    "AccessPoint", "ApKind", "ConfigurationError", "LinkParams", "NetworkEnv",
    "PropagationLedger", "RewardWeights", "ScenarioConfig", "SchedulingError",
    "Topology", "TrainingDiverged", "UserNode", "aoi_lower_bound",
    "build_energy_table", "build_scenario", "build_topology",
    "check_ripple_constraint", "load_scenario", "make_baseline", "make_env",
    "mdp_objective", "preset_library", "validate_assignment",
]
