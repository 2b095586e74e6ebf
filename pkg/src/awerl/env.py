"""Four-phase pumping-cycle environment.

One :class:`AweEnv` instance runs one phase at a time. A decision step lasts
0.1 s (100 RK4 substeps of 1 ms); the action is a pair of increments to the
attack and bank angles, each clipped to one degree. Rewards, penalties,
terminations and the energy ledger follow the pumping-cycle protocol:

Traction -> T2R -> Retraction -> R2T (skipped if already well positioned).
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import dynamics as dyn
from .dynamics import ALPHA_RANGE, PSI_RANGE, ControlAngles, KiteState, SystemParams
from .errors import AlignmentSingularity, CycleFailed, EpisodeOver, PolarSingularity

J_PER_KWH = 3.6e6


class Phase(str, enum.Enum):
    TRACTION = "traction"
    T2R = "t2r"
    RETRACTION = "retraction"
    R2T = "r2t"

    @property
    def next(self):
        order = list(Phase)
        return order[(order.index(self) + 1) % len(order)]


class Reason(str, enum.Enum):
    GROUND_CONTACT = "GroundContact"
    ALIGNMENT = "AlignmentSingularity"
    TETHER_OVERRUN = "TetherOverrun"
    ALTITUDE_OVERRUN = "AltitudeOverrun"
    HORIZON = "HorizonExhausted"


@dataclass(frozen=True)
class Status:
    kind: str  # "Running", "Goal" or "Failed"
    reason: Reason | None = None

    @classmethod
    def running(cls):
        return cls("Running")

    @classmethod
    def goal(cls):
        return cls("Goal")

    @classmethod
    def failed(cls, reason):
        return cls("Failed", Reason(reason))

    @property
    def terminal(self):
        return self.kind != "Running"

    @property
    def crashed(self):
        """Failure other than running out of decision steps."""
        return self.kind == "Failed" and self.reason is not Reason.HORIZON

    def __str__(self):
        return self.kind if self.reason is None else f"Failed({self.reason.value})"


@dataclass(frozen=True)
class Thresholds:
    r_traction_end: float = 100.0
    r_dot_thr: float = 0.2
    r_thr: float = 27.0
    r_max: float = 130.0
    z_max: float = 100.0
    phi_goal: tuple = (-math.pi / 2, math.pi / 2)
    theta_goal: float = math.pi / 4
    r_r2t_goal: float = 22.0
    r_min: float = 1.0

    def __post_init__(self):
        if not 0 < self.r_thr < self.r_traction_end < self.r_max:
            raise ValueError("need 0 < r_thr < r_traction_end < r_max")


@dataclass(frozen=True)
class PhaseConfig:
    horizon: int
    gamma: float
    motor_force: float = 1200.0
    penalty: float = 100.0


DEFAULT_PHASE_CONFIGS = {
    Phase.TRACTION: PhaseConfig(3000, 1.0),
    Phase.T2R: PhaseConfig(1500, 1.0),
    Phase.RETRACTION: PhaseConfig(3000, 0.99),
    Phase.R2T: PhaseConfig(1500, 0.99),
}


def wrap_angle(a):
    """Map an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Observation:
    alpha: float  # deg
    beta: float  # rad
    psi: float  # deg
    phi: float | None = None  # rad, R2T only

    def vector(self):
        """Components affinely mapped to [-1, 1] by their known ranges."""
        lo, hi = ALPHA_RANGE
        v = [(2.0 * self.alpha - lo - hi) / (hi - lo),
             self.beta / (math.pi / 2),
             self.psi / PSI_RANGE[1]]
        if self.phi is not None:
            v.append(self.phi / math.pi)
        return np.array(v, dtype=np.float32)


def obs_dim(phase):
    return 4 if Phase(phase) is Phase.R2T else 3


ACTION_DIM = 2


@dataclass(frozen=True)
class Handoff:
    """Kite state, controls and clock passed from one phase to the next."""

    state: KiteState
    alpha: float
    psi: float
    t: float = 0.0


# ---------------------------------------------------------------------------
# rewards

def penalty_schedule(k, P=100.0):
    if k < 1:
        raise ValueError("k must be >= 1")
    return -P / k ** 0.2


def _ind(x):
    return 1.0 if x > 0 else 0.0


def _sign(x):
    return (x > 0) - (x < 0)


def reward_traction(delta_e_kwh, status):
    if status.crashed:
        return -0.1
    return delta_e_kwh


def reward_t2r(theta, r_dot, status, k, P=100.0):
    if status.kind == "Goal":
        return 100.0
    if status.crashed:
        return penalty_schedule(k, P)
    return math.cos(theta) / 2.0 - r_dot / 10.0


def reward_retraction(r_dot, w_rel_speed, r, k, status, cfg):
    if status.kind == "Goal":
        spent = sum(cfg.motor_force for _ in range(k))
        return (cfg.horizon * cfg.motor_force - spent) / 100.0
    if status.crashed:
        return 20.0 - r
    return (-w_rel_speed / 100.0 * _ind(r_dot)
            + (-r_dot / 10.0 + (100.0 - w_rel_speed) / 200.0) * _ind(-r_dot))


def reward_r2t(r_dot, psi_prev, psi_now, phi0, k, status, P=100.0):
    """Step reward of the repositioning phase; angles in radians."""
    if status.kind == "Goal":
        return 600.0
    if status.crashed:
        return penalty_schedule(k, P)
    if phi0 * psi_now >= 0:
        return -0.2 * _sign(r_dot) + 5.0 * (psi_prev - psi_now) * _sign(psi_now)
    return -_ind(r_dot) / 2.0 - _ind(-r_dot) / 10.0


# ---------------------------------------------------------------------------
# trajectory and ledger

TRAJECTORY_FIELDS = ["t", "phase", "theta", "phi", "r", "theta_dot", "phi_dot", "r_dot",
                     "x", "y", "z", "alpha_deg", "psi_deg", "beta_rad", "Wr", "Ft",
                     "power_kW", "reward", "status"]


@dataclass
class PhaseRecord:
    phase: Phase
    energy_kwh: float = 0.0
    duration_s: float = 0.0
    steps: int = 0
    status: Status | None = None
    power_t: list = field(default_factory=list)
    power_kw: list = field(default_factory=list)

    @property
    def avg_power_kw(self):
        return self.energy_kwh * 3600.0 / self.duration_s if self.duration_s > 0 else 0.0


@dataclass
class EnergyLedger:
    phases: dict = field(default_factory=dict)

    def add(self, record):
        self.phases[record.phase] = record

    @property
    def total_energy_kwh(self):
        return sum(rec.energy_kwh for rec in self.phases.values())

    @property
    def total_duration_s(self):
        return sum(rec.duration_s for rec in self.phases.values())

    def rows(self):
        """Per-phase (phase, duration s, energy kWh, avg power kW) plus a total row."""
        out = [(rec.phase.value, rec.duration_s, rec.energy_kwh, rec.avg_power_kw)
               for rec in self.phases.values()]
        d, e = self.total_duration_s, self.total_energy_kwh
        out.append(("total", d, e, e * 3600.0 / d if d > 0 else 0.0))
        return out


def write_trajectory(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_trajectory(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in TRAJECTORY_FIELDS:
            if k not in ("phase", "status"):
                row[k] = float(row[k])
    return rows


# ---------------------------------------------------------------------------
# environment

class AweEnv:
    """Single-phase episodic environment."""

    def __init__(self, phase, wind, *, params=None, polar=None, thresholds=None, config=None,
                 dt=0.1, n_sub=100, backend=None):
        self.phase = Phase(phase)
        self.wind = wind
        self.params = params or SystemParams()
        self.polar = polar or dyn.AeroPolar.default()
        self.thresholds = thresholds or Thresholds()
        self.config = config or DEFAULT_PHASE_CONFIGS[self.phase]
        self.dt = dt
        self.n_sub = n_sub
        self.dt_sub = dt / n_sub
        self.backend = backend
        self.z_ceiling = min(self.thresholds.z_max, wind.ceiling)
        if self.phase in (Phase.RETRACTION, Phase.R2T):
            self.mode = dyn.Retraction.from_force(self.config.motor_force, self.params)
        else:
            self.mode = dyn.Traction()
        self.status = None

    # -- helpers ----------------------------------------------------------
    def _evaluate(self, state, controls, t):
        kb = dyn._k.get_backend(self.backend) if self.backend else dyn._k.backend
        cl, cd = dyn.aero_coefficients(controls.alpha, self.polar)
        mode, fm = dyn._mode_args(self.mode, self.params)
        return kb.evaluate(state.as_tuple(), cl, cd, math.radians(controls.psi), mode, fm,
                           dyn._params_args(self.params, kb.BACKEND),
                           *self.wind.kernel_args(kb.BACKEND), t)

    def _observe(self):
        phi = wrap_angle(self.state.phi) if self.phase is Phase.R2T else None
        return Observation(self.controls.alpha, self.beta, self.controls.psi, phi)

    def _row(self, reward, status):
        s = self.state
        x, y, z = s.position
        return {
            "t": self.t, "phase": self.phase.value, "theta": s.theta, "phi": s.phi, "r": s.r,
            "theta_dot": s.theta_dot, "phi_dot": s.phi_dot, "r_dot": s.r_dot,
            "x": float(x), "y": float(y), "z": float(z),
            "alpha_deg": self.controls.alpha, "psi_deg": self.controls.psi,
            "beta_rad": self.beta, "Wr": self.w_rel_speed, "Ft": self.tension,
            "power_kW": self.power_kw, "reward": reward, "status": status,
        }

    @property
    def handoff(self):
        return Handoff(self.state, self.controls.alpha, self.controls.psi, self.t)

    @property
    def well_positioned(self):
        th = self.thresholds
        phi = wrap_angle(self.state.phi)
        return th.phi_goal[0] <= phi <= th.phi_goal[1] and self.state.theta < th.theta_goal

    # -- API --------------------------------------------------------------
    def reset(self, seed=None, inherited=None):
        """Start an episode; fresh traction starts are drawn from ``seed``."""
        if inherited is None:
            if self.phase is not Phase.TRACTION:
                raise ValueError(f"{self.phase.value} episodes need an inherited state")
            rng = np.random.default_rng(seed)
            phi = rng.uniform(-math.pi / 2, math.pi / 2)
            theta = rng.uniform(math.pi / 12, math.pi / 3)
            alpha = rng.uniform(*ALPHA_RANGE)
            psi = rng.uniform(*PSI_RANGE)
            inherited = Handoff(KiteState(theta, phi, 20.0), alpha, psi, 0.0)
        self.state = inherited.state
        self.controls = ControlAngles.clamped(inherited.alpha, inherited.psi)
        self.t = inherited.t
        self.k = 0
        self.phi0 = wrap_angle(self.state.phi)
        self.energy_j = 0.0
        self.duration = 0.0
        self.status = Status.running()
        self.record = PhaseRecord(self.phase)
        code, ten, power, wt, wp, wr = self._evaluate(self.state, self.controls, self.t)
        if code == dyn._k.OK:
            w = np.array([wt, wp, wr])
            self.w_rel_speed = float(np.linalg.norm(w))
            self.beta = dyn.beta_angle(w) if self.w_rel_speed > dyn.EPS_W else 0.0
            self.tension = float(ten)
            self.power_kw = float(power) / 1e3
        else:
            self.w_rel_speed, self.beta, self.tension, self.power_kw = 0.0, 0.0, 0.0, 0.0
        self.record.power_t.append(self.t)
        self.record.power_kw.append(self.power_kw)
        self.trajectory = [self._row(0.0, "Start")]
        return self._observe()

    def step(self, action):
        if self.status is None or self.status.terminal:
            raise EpisodeOver(f"episode already ended with {self.status}")
        d_alpha = float(np.clip(action[0], -1.0, 1.0))
        d_psi = float(np.clip(action[1], -1.0, 1.0))
        self.controls = ControlAngles.clamped(self.controls.alpha + d_alpha,
                                              self.controls.psi + d_psi)
        self.k += 1
        th = self.thresholds
        prev_phi = wrap_angle(self.state.phi)
        try:
            new, energy, diag = dyn.integrate_step(
                self.state, self.controls, self.wind, self.mode, params=self.params,
                polar=self.polar, dt_sub=self.dt_sub, n_sub=self.n_sub, t0=self.t,
                z_ceiling=self.z_ceiling, r_max=th.r_max, backend=self.backend)
        except (AlignmentSingularity, PolarSingularity) as exc:
            n_done = exc.substep or 0
            self.t += n_done * self.dt_sub
            self.duration += n_done * self.dt_sub
            status = Status.failed(Reason.ALIGNMENT)
            reward = self._reward(status, 0.0)
            return self._finish(status, reward, None)

        self.state = new
        self.t += diag.n_substeps * self.dt_sub
        self.duration += diag.n_substeps * self.dt_sub
        self.energy_j += energy
        if diag.w_rel_local is not None:
            self.w_rel_speed = float(np.linalg.norm(diag.w_rel_local))
            self.beta = dyn.beta_angle(diag.w_rel_local) if self.w_rel_speed > dyn.EPS_W else 0.0
            self.tension = diag.tension
            self.power_kw = diag.power / 1e3
        else:
            # outside the wind domain: report the step-average power
            span = diag.n_substeps * self.dt_sub
            self.power_kw = energy / span / 1e3 if span > 0 else 0.0

        s = self.state
        if diag.stop == "ground" or s.r <= th.r_min:
            status = Status.failed(Reason.GROUND_CONTACT)
        elif diag.stop == "altitude":
            status = Status.failed(Reason.ALTITUDE_OVERRUN)
        elif diag.stop == "tether":
            status = Status.failed(Reason.TETHER_OVERRUN)
        elif self._goal_reached():
            status = Status.goal()
        elif self.k >= self.config.horizon:
            status = Status.failed(Reason.HORIZON)
        else:
            status = Status.running()
        reward = self._reward(status, energy / J_PER_KWH, prev_phi)
        return self._finish(status, reward, energy)

    def _goal_reached(self):
        s, th = self.state, self.thresholds
        if self.phase is Phase.TRACTION:
            return s.r >= th.r_traction_end
        if self.phase is Phase.T2R:
            return s.r_dot < th.r_dot_thr
        if self.phase is Phase.RETRACTION:
            return s.r <= th.r_thr
        return self.well_positioned and s.r <= th.r_r2t_goal

    def _reward(self, status, delta_kwh, prev_phi=None):
        cfg = self.config
        s = self.state
        if self.phase is Phase.TRACTION:
            return reward_traction(delta_kwh, status)
        if self.phase is Phase.T2R:
            return reward_t2r(s.theta, s.r_dot, status, self.k, cfg.penalty)
        if self.phase is Phase.RETRACTION:
            return reward_retraction(s.r_dot, self.w_rel_speed, s.r, self.k, status, cfg)
        prev = self.phi0 if prev_phi is None else prev_phi
        return reward_r2t(s.r_dot, prev, wrap_angle(s.phi), self.phi0, self.k, status, cfg.penalty)

    def _finish(self, status, reward, energy):
        self.status = status
        self.record.power_t.append(self.t)
        self.record.power_kw.append(self.power_kw)
        self.record.energy_kwh = self.energy_j / J_PER_KWH
        self.record.duration_s = self.duration
        self.record.steps = self.k
        self.record.status = status
        self.trajectory.append(self._row(reward, str(status)))
        info = {"status": status, "energy_j": energy, "k": self.k}
        return self._observe(), reward, status, info


Policy = Callable[[Observation], "tuple[float, float]"]


def run_episode(env, policy, *, seed=None, inherited=None):
    """Roll out one phase; returns (record, trajectory rows, total reward)."""
    obs = env.reset(seed=seed, inherited=inherited)
    total = 0.0
    while True:
        obs, reward, status, _ = env.step(policy(obs))
        total += reward
        if status.terminal:
            return env.record, env.trajectory, total


def run_cycle(policies, wind, seed, *, params=None, polar=None, thresholds=None, configs=None,
              backend=None):
    """Execute Traction -> T2R -> Retraction -> R2T with one policy per phase.

    ``policies`` maps :class:`Phase` to a callable taking an
    :class:`Observation` and returning the angle increments in degrees. R2T
    is skipped when the kite is already well positioned at the end of the
    retraction. Raises :class:`CycleFailed` on any unsuccessful phase end.
    """
    configs = configs or DEFAULT_PHASE_CONFIGS
    ledger = EnergyLedger()
    trajectory = []
    inherited = None
    for phase in Phase:
        env = AweEnv(phase, wind, params=params, polar=polar, thresholds=thresholds,
                     config=configs[phase], backend=backend)
        if phase is Phase.R2T:
            probe = env
            probe.state = inherited.state
            if probe.well_positioned:
                break
        record, rows, _ = run_episode(env, policies[phase], seed=seed, inherited=inherited)
        ledger.add(record)
        trajectory.extend(rows)
        if record.status.kind != "Goal":
            raise CycleFailed(phase.value, record.status.reason.value, ledger, trajectory)
        inherited = env.handoff
    return ledger, trajectory


def trapezoid_energy_kwh(record):
    """Energy from the trapezoid rule on the recorded power trace."""
    t = np.asarray(record.power_t)
    p = np.asarray(record.power_kw)
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(t))) / 3600.0


def zero_policy(_obs):
    return (0.0, 0.0)
