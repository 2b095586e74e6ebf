"""Configuration, training, evaluation, scripted simulation and plotting."""
from .config import RunConfig, build_wind, config_from_dict, load_config
from .evaluate import CycleReport, evaluate, load_agents
from .simulate import SimulationResult, simulate
from .train import read_metrics, train, train_phase

__all__ = [
    "CycleReport", "RunConfig", "SimulationResult", "build_wind", "config_from_dict",
    "evaluate", "load_agents", "load_config", "read_metrics", "simulate", "train", "train_phase",
]
