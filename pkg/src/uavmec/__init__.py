"""Seedable simulator of a UAV-served wireless-powered edge-compute network
with a from-scratch soft actor-critic controller and a benchmark harness."""

from .config import (AgentConfig, ChannelParams, ConfigError, ExperimentConfig,
                     MobilityParams, RewardParams, RunConfig, WorldConfig,
                     config_from_dict, load_config)
from .env import Action, EnvState, StepOutcome
from .sac import ReplayMemory, SacAgent, Transition
from .trainer import Trainer, evaluate_policy, load_checkpoint

__version__ = "0.1.0"

__all__ = [
    "Action", "AgentConfig", "ChannelParams", "ConfigError", "EnvState",
    "ExperimentConfig", "MobilityParams", "ReplayMemory", "RewardParams",
    "RunConfig", "SacAgent", "StepOutcome", "Trainer", "Transition",
    "WorldConfig", "config_from_dict", "evaluate_policy", "load_checkpoint",
    "load_config",
]
