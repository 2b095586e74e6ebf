"""Twin delayed deep deterministic policy gradient agent."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import FormatError, NumericalDivergence
from .mlp import Adam, Mlp
from .replay import ReplayBuffer, Transition

CKPT_MAGIC = b"TD3C"
CKPT_VERSION = 1
_PREFIX = struct.Struct("<4sII")
NETS = ("actor", "actor_target", "critic1", "critic2", "critic1_target", "critic2_target")


@dataclass(frozen=True)
class Td3Config:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    gamma: float = 1.0
    tau: float = 0.005
    policy_delay: int = 2
    action_noise_sigma: float = 0.225
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5
    batch_size: int = 100
    warmup_steps: int = 5000
    episodes: int = 1600
    buffer_size: int = 100_000
    hidden: tuple = (400, 300)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        for name in ("actor_lr", "critic_lr", "tau"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        for name in ("policy_delay", "batch_size", "buffer_size", "episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.buffer_size < self.batch_size:
            raise ValueError("buffer_size must be >= batch_size")

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def with_(self, **kw):
        return replace(self, **kw)


def _phase_config(lr, noise, warmup, gamma, episodes):
    return Td3Config(actor_lr=lr, critic_lr=lr, gamma=gamma, action_noise_sigma=noise,
                     warmup_steps=warmup, episodes=episodes)


DEFAULT_TD3 = {
    "traction": _phase_config(1e-4, 0.225, 5000, 1.0, 1600),
    "t2r": _phase_config(5e-4, 0.25, 25000, 1.0, 3000),
    "retraction": _phase_config(8e-5, 0.25, 25000, 0.99, 90000),
    "r2t": _phase_config(9e-5, 0.25, 25000, 0.99, 20000),
}


@dataclass
class Losses:
    critic1: float
    critic2: float
    actor: float | None = None
    target_min: np.ndarray | None = field(default=None, repr=False)


class Td3Agent:
    """Actor, twin critics, their targets, optimizers and replay memory."""

    def __init__(self, obs_dim, act_dim=2, config=None, seed=0, phase=""):
        self.config = config or Td3Config()
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.phase = str(phase)
        self.rng = np.random.default_rng(seed)
        c = self.config
        self.actor = Mlp((obs_dim, *c.hidden, act_dim), "tanh", self.rng, final_scale=0.01)
        self.critic1 = Mlp((obs_dim + act_dim, *c.hidden, 1), "identity", self.rng)
        self.critic2 = Mlp((obs_dim + act_dim, *c.hidden, 1), "identity", self.rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = Adam(self.actor.params, c.actor_lr)
        self.critic_opt = Adam(self.critic1.params + self.critic2.params, c.critic_lr)
        self.buffer = ReplayBuffer(c.buffer_size, obs_dim, act_dim)
        self.total_steps = 0
        self.n_updates = 0
        self.saved_buffer = None

    def buffer_meta(self):
        b = self.buffer
        return {"capacity": b.capacity, "size": b.size, "cursor": b.cursor}

    # acting

    def act(self, obs, explore=False, rng=None):
        """Actor output, optionally with Gaussian exploration noise, in [-1, 1]."""
        a = self.actor(np.asarray(obs, dtype=np.float32)[None, :])[0].astype(np.float64)
        if explore:
            rng = rng if rng is not None else self.rng
            a = a + rng.normal(0.0, self.config.action_noise_sigma, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def random_action(self, rng=None):
        rng = rng if rng is not None else self.rng
        return rng.uniform(-1.0, 1.0, size=self.act_dim)

    @property
    def warming_up(self):
        return self.total_steps < self.config.warmup_steps

    def explore_action(self, obs):
        """Training-time action: uniform during warmup, noisy actor afterwards."""
        if self.warming_up:
            return self.random_action()
        return self.act(obs, explore=True)

    def observe(self, transition):
        """Store a transition; run one update once warmup is over."""
        self.buffer.store(transition)
        self.total_steps += 1
        if self.warming_up or len(self.buffer) < self.config.batch_size:
            return None
        batch = self.buffer.sample_batch(self.config.batch_size, self.rng)
        return self.update(batch)

    def policy(self):
        """Deterministic policy callable for the environment."""
        return lambda obs: self.act(obs, explore=False)

    # learning

    def update(self, batch, step_index=None):
        c = self.config
        step_index = self.n_updates if step_index is None else step_index
        obs = np.asarray(batch.obs, dtype=np.float32)
        act = np.asarray(batch.action, dtype=np.float32)
        rew = np.asarray(batch.reward, dtype=np.float32).reshape(-1, 1)
        nxt = np.asarray(batch.next_obs, dtype=np.float32)
        done = np.asarray(batch.done, dtype=np.float32).reshape(-1, 1)
        B = obs.shape[0]

        noise = self.rng.normal(0.0, c.target_noise_sigma, size=act.shape)
        noise = np.clip(noise, -c.target_noise_clip, c.target_noise_clip).astype(np.float32)
        a_next = np.clip(self.actor_target(nxt) + noise, -1.0, 1.0)
        sa_next = np.concatenate([nxt, a_next], axis=1)
        q_min = np.minimum(self.critic1_target(sa_next), self.critic2_target(sa_next))
        y = rew + np.float32(c.gamma) * (1.0 - done) * q_min

        sa = np.concatenate([obs, act], axis=1)
        q1, cache1 = self.critic1.forward(sa)
        q2, cache2 = self.critic2.forward(sa)
        d1 = q1 - y
        d2 = q2 - y
        loss1 = float(np.mean(d1 * d1))
        loss2 = float(np.mean(d2 * d2))
        g1, _ = self.critic1.backward(cache1, (2.0 / B) * d1)
        g2, _ = self.critic2.backward(cache2, (2.0 / B) * d2)
        self.critic_opt.step(g1 + g2)

        actor_loss = None
        if step_index % c.policy_delay == 0:
            a_pi, cache_a = self.actor.forward(obs)
            q_pi, cache_q = self.critic1.forward(np.concatenate([obs, a_pi], axis=1))
            actor_loss = float(-np.mean(q_pi))
            _, g_in = self.critic1.backward(cache_q, np.full_like(q_pi, -1.0 / B))
            ga, _ = self.actor.backward(cache_a, g_in[:, self.obs_dim:])
            self.actor_opt.step(ga)
            for online, target in ((self.actor, self.actor_target),
                                   (self.critic1, self.critic1_target),
                                   (self.critic2, self.critic2_target)):
                soft_update(target, online, c.tau)

        self.n_updates += 1
        if not (np.isfinite(loss1) and np.isfinite(loss2)) or not self._finite():
            raise NumericalDivergence(f"non-finite parameters or loss after update {step_index}")
        return Losses(loss1, loss2, actor_loss, q_min)

    def _finite(self):
        return all(np.isfinite(p.sum()) for net in (self.actor, self.critic1, self.critic2)
                   for p in net.params)

    # persistence

    def save(self, path):
        """Write a little-endian checkpoint: prefix, JSON header, f32 blobs."""
        blobs = []
        shapes = {}
        for name in NETS:
            net = getattr(self, name)
            shapes[name] = [list(p.shape) for p in net.params]
            blobs += net.params
        for opt in (self.actor_opt, self.critic_opt):
            blobs += opt.m + opt.v
        header = {
            "phase": self.phase,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "config": self.config.to_dict(),
            "shapes": shapes,
            "adam_t": [self.actor_opt.t, self.critic_opt.t],
            "buffer": self.buffer_meta(),
            "total_steps": self.total_steps,
            "n_updates": self.n_updates,
        }
        hb = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_PREFIX.pack(CKPT_MAGIC, CKPT_VERSION, len(hb)))
            fh.write(hb)
            for b in blobs:
                fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path):
        raw = Path(path).read_bytes()
        if len(raw) < _PREFIX.size:
            raise FormatError(f"{path}: truncated checkpoint")
        magic, version, hlen = _PREFIX.unpack_from(raw)
        if magic != CKPT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != CKPT_VERSION:
            raise FormatError(f"{path}: checkpoint version {version}, expected {CKPT_VERSION}")
        try:
            header = json.loads(raw[_PREFIX.size:_PREFIX.size + hlen])
        except ValueError as e:
            raise FormatError(f"{path}: unreadable header") from e
        agent = cls(header["obs_dim"], header["act_dim"],
                    Td3Config.from_dict(header["config"]), seed=0, phase=header["phase"])
        targets = []
        for name in NETS:
            net = getattr(agent, name)
            if [list(p.shape) for p in net.params] != header["shapes"][name]:
                raise FormatError(f"{path}: layer shapes of {name} do not match config")
            targets += net.params
        for opt in (agent.actor_opt, agent.critic_opt):
            targets += opt.m + opt.v
        expected = sum(t.size for t in targets) * 4
        off = _PREFIX.size + hlen
        if len(raw) - off != expected:
            raise FormatError(f"{path}: payload has {len(raw) - off} bytes, expected {expected}")
        for t in targets:
            n = t.size
            t[...] = np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(t.shape)
            off += 4 * n
        agent.actor_opt.t, agent.critic_opt.t = header["adam_t"]
        # replay contents are not persisted: the buffer starts empty and the
        # saved cursor metadata is kept for reference
        agent.saved_buffer = dict(header["buffer"])
        agent.total_steps = header["total_steps"]
        agent.n_updates = header["n_updates"]
        return agent


def soft_update(target, online, tau):
    """``target <- (1 - tau) * target + tau * online`` in place."""
    for t, o in zip(target.params, online.params):
        t[...] = (1.0 - tau) * t + tau * o


def act(agent, obs, explore=False, rng=None):
    return agent.act(obs, explore, rng)


def update(agent, batch, step_index):
    return agent.update(batch, step_index)
