"""Numpy TD3: MLPs with manual backprop, Adam, CER replay and the agent."""
from .agent import DEFAULT_TD3, Losses, Td3Agent, Td3Config, act, soft_update, update
from .mlp import Adam, Mlp, adam_step, grad_check
from .replay import Batch, ReplayBuffer, Transition, sample_batch, store

__all__ = [
    "Adam", "Batch", "DEFAULT_TD3", "Losses", "Mlp", "ReplayBuffer", "Td3Agent", "Td3Config",
    "Transition", "act", "adam_step", "grad_check", "sample_batch", "soft_update", "store",
    "update",
]
