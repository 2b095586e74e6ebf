"""Ring-buffer replay memory with combined experience replay sampling."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Transition(NamedTuple):
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class Batch(NamedTuple):
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    index: np.ndarray


class ReplayBuffer:
    """Fixed-capacity storage; the oldest transition is overwritten first."""

    def __init__(self, capacity, obs_dim, act_dim):
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.obs = np.zeros((self.capacity, obs_dim), dtype=np.float32)
        self.action = np.zeros((self.capacity, act_dim), dtype=np.float32)
        self.reward = np.zeros(self.capacity, dtype=np.float32)
        self.next_obs = np.zeros((self.capacity, obs_dim), dtype=np.float32)
        self.done = np.zeros(self.capacity, dtype=np.float32)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    @property
    def newest(self):
        if self.size == 0:
            raise IndexError("empty buffer")
        return (self.cursor - 1) % self.capacity

    def store(self, tr):
        i = self.cursor
        self.obs[i] = tr.obs
        self.action[i] = tr.action
        self.reward[i] = tr.reward
        self.next_obs[i] = tr.next_obs
        self.done[i] = float(tr.done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def get(self, i):
        return Transition(self.obs[i], self.action[i], float(self.reward[i]),
                          self.next_obs[i], bool(self.done[i]))

    def sample_batch(self, batch_size, rng):
        """``batch_size - 1`` uniform draws plus the most recent transition."""
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} < batch_size={batch_size}")
        idx = np.empty(batch_size, dtype=np.int64)
        idx[:-1] = rng.integers(0, self.size, size=batch_size - 1)
        idx[-1] = self.newest
        return Batch(self.obs[idx], self.action[idx], self.reward[idx],
                     self.next_obs[idx], self.done[idx], idx)


def store(buffer, transition):
    buffer.store(transition)


def sample_batch(buffer, batch_size, rng):
    return buffer.sample_batch(batch_size, rng)
