"""Point-mass kite on a rigid tether, coupled to a ground drum.

The kite position is kept in spherical coordinates (theta from the zenith,
phi azimuth from the downwind x axis, r tether length). Forces are expressed
in the local frame (e_theta, e_phi, e_r) attached to the kite.

The free functions in this module are small numpy reference implementations
of each force term. ``integrate_step`` runs the same model through the
scalar kernel (compiled when available), which is what the environment uses.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import astuple, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernel as _k
from .errors import (
    AlignmentSingularity,
    DegenerateWind,
    OutOfRange,
    PolarSingularity,
)

EPS_W = 1e-6
EPS_THETA = 1e-6

ALPHA_RANGE = (-5.0, 18.0)
PSI_RANGE = (-3.0, 3.0)


@dataclass(frozen=True)
class KiteState:
    theta: float
    phi: float
    r: float
    theta_dot: float = 0.0
    phi_dot: float = 0.0
    r_dot: float = 0.0

    def as_tuple(self):
        return astuple(self)

    @property
    def position(self):
        st = math.sin(self.theta)
        return np.array([
            self.r * st * math.cos(self.phi),
            self.r * st * math.sin(self.phi),
            self.r * math.cos(self.theta),
        ])

    @property
    def altitude(self):
        return self.r * math.cos(self.theta)

    @property
    def velocity_local(self):
        """Kite velocity W^k in (e_theta, e_phi, e_r) components."""
        return np.array([
            self.theta_dot * self.r,
            self.phi_dot * self.r * math.sin(self.theta),
            self.r_dot,
        ])


@dataclass(frozen=True)
class SystemParams:
    """Kite and drum constants. ``k_fric`` is the drum viscous friction (N m s)."""

    m: float = 1.0
    A: float = 10.0
    rho: float = 1.2
    M: float = 10.0
    R: float = 0.2
    k_fric: float = 20.0
    g: float = 9.81

    def __post_init__(self):
        for name in ("m", "A", "rho", "M", "R", "g"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not (self.k_fric >= 0 and math.isfinite(self.k_fric)):
            raise ValueError(f"k_fric must be non-negative, got {self.k_fric}")

    @property
    def inertia(self):
        return 0.5 * self.M * self.R ** 2

    def as_array(self):
        return np.array([self.m, self.A, self.rho, self.M, self.R, self.k_fric, self.g])


@dataclass(frozen=True)
class ControlAngles:
    """Attack angle ``alpha`` and bank angle ``psi``, both in degrees."""

    alpha: float
    psi: float

    def __post_init__(self):
        if not ALPHA_RANGE[0] <= self.alpha <= ALPHA_RANGE[1]:
            raise OutOfRange(f"alpha={self.alpha} outside {ALPHA_RANGE}")
        if not PSI_RANGE[0] <= self.psi <= PSI_RANGE[1]:
            raise OutOfRange(f"psi={self.psi} outside {PSI_RANGE}")

    @classmethod
    def clamped(cls, alpha, psi):
        return cls(min(max(alpha, ALPHA_RANGE[0]), ALPHA_RANGE[1]),
                   min(max(psi, PSI_RANGE[0]), PSI_RANGE[1]))


class LocalFrame(NamedTuple):
    e_theta: np.ndarray
    e_phi: np.ndarray
    e_r: np.ndarray

    @property
    def matrix(self):
        """Rows are the unit vectors; maps world vectors to local components."""
        return np.vstack(self)

    def to_local(self, v):
        return self.matrix @ v

    def to_world(self, v):
        return self.matrix.T @ v


class WindFrame(NamedTuple):
    x_w: np.ndarray
    y_w: np.ndarray
    z_w: np.ndarray
    e_w: np.ndarray
    eta: float
    frame: LocalFrame


@dataclass
class ForceBreakdown:
    gravity: np.ndarray
    centrifugal: np.ndarray
    lift: np.ndarray
    drag: np.ndarray
    tension: float
    slack: bool = False

    @property
    def sum_r(self):
        """Radial force from everything except the tether."""
        return float((self.gravity + self.centrifugal + self.lift + self.drag)[2])

    @property
    def total(self):
        return self.gravity + self.centrifugal + self.lift + self.drag - np.array([0.0, 0.0, self.tension])


@dataclass(frozen=True)
class Traction:
    """Drum driven by the tether only (generator or free braking)."""


@dataclass(frozen=True)
class Retraction:
    """Motor applies ``torque`` C = F^m R to reel the tether in."""

    torque: float

    @classmethod
    def from_force(cls, motor_force, params):
        return cls(motor_force * params.R)


@dataclass(frozen=True)
class Locked:
    """Tether length held fixed (tension balances the radial force exactly)."""


@dataclass(frozen=True)
class AeroPolar:
    """Piecewise-linear lift/drag polar tabulated against attack angle (deg)."""

    alpha: tuple
    cl: tuple
    cd: tuple = field(repr=False)

    def __post_init__(self):
        a = tuple(float(x) for x in self.alpha)
        cl = tuple(float(x) for x in self.cl)
        cd = tuple(float(x) for x in self.cd)
        if not len(a) == len(cl) == len(cd) or len(a) < 2:
            raise ValueError("polar needs at least two knots of equal-length columns")
        if any(b <= a0 for a0, b in zip(a, a[1:])):
            raise ValueError("polar alpha must be strictly increasing")
        if a[0] > ALPHA_RANGE[0] or a[-1] < ALPHA_RANGE[1]:
            raise ValueError(f"polar must cover {ALPHA_RANGE} deg, covers [{a[0]}, {a[-1]}]")
        if any(not c > 0 for c in cd):
            raise ValueError("drag coefficients must be positive")
        if not all(map(math.isfinite, a + cl + cd)):
            raise ValueError("polar values must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "cl", cl)
        object.__setattr__(self, "cd", cd)

    @classmethod
    def default(cls):
        # Placeholder polar: linear C_L ramp and a parabolic drag polar.
        alpha = np.arange(-5, 19, dtype=float)
        cl = 0.2 + 0.8 * (alpha + 5.0) / 23.0
        cd = 0.05 + 0.06 * cl ** 2
        return cls(tuple(alpha), tuple(cl), tuple(cd))

    @classmethod
    def load(cls, path):
        rows = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'alpha_deg C_L C_D'")
            rows.append([float(x) for x in parts])
        if not rows:
            raise ValueError(f"{path}: no polar rows")
        a, cl, cd = zip(*rows)
        return cls(a, cl, cd)

    def save(self, path):
        lines = ["# alpha_deg C_L C_D"]
        lines += [f"{a!r} {l!r} {d!r}" for a, l, d in zip(self.alpha, self.cl, self.cd)]
        Path(path).write_text("\n".join(lines) + "\n")


def local_frame(theta, phi):
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    return LocalFrame(
        np.array([ct * cp, ct * sp, -st]),
        np.array([-sp, cp, 0.0]),
        np.array([st * cp, st * sp, ct]),
    )


def gravity_force(state, p):
    # The radial term opposes e_r: at the zenith gravity points straight down.
    return np.array([p.m * p.g * math.sin(state.theta), 0.0, -p.m * p.g * math.cos(state.theta)])


def centrifugal_force(state, p):
    th, r = state.theta, state.r
    thd, phd, rd = state.theta_dot, state.phi_dot, state.r_dot
    st, ct = math.sin(th), math.cos(th)
    return p.m * np.array([
        phd ** 2 * r * st * ct - 2.0 * rd * thd,
        -2.0 * rd * phd * st - 2.0 * phd * thd * r * ct,
        r * thd ** 2 + r * phd ** 2 * st ** 2,
    ])


def relative_wind(state, wind_world, frame):
    """W^r = W^w - W^k in local components."""
    return frame.to_local(np.asarray(wind_world, dtype=float)) - state.velocity_local


def wind_frame(w_rel_local, frame, psi):
    """Kite wind axes for relative wind ``w_rel_local`` and bank angle ``psi`` (deg)."""
    w_rel = frame.to_world(np.asarray(w_rel_local, dtype=float))
    e_r = frame.e_r
    radial = float(e_r @ w_rel)
    tangent = w_rel - e_r * radial
    tn = float(np.linalg.norm(tangent))
    if tn < EPS_W:
        raise AlignmentSingularity("relative wind parallel to e_r")
    psi_rad = math.radians(psi)
    arg = radial / tn * math.tan(psi_rad)
    if abs(arg) > 1.0:
        raise AlignmentSingularity(f"bank geometry undefined (|sin eta| = {abs(arg):.3g} > 1)")
    eta = math.asin(arg)
    e_w = tangent / tn
    x_w = -w_rel / np.linalg.norm(w_rel)
    y_w = (e_w * (-math.cos(psi_rad) * math.sin(eta))
           + np.cross(e_r, e_w) * (math.cos(psi_rad) * math.cos(eta))
           + e_r * math.sin(psi_rad))
    z_w = np.cross(x_w, y_w)
    return WindFrame(x_w, y_w, z_w, e_w, eta, frame)


def aero_coefficients(alpha, polar):
    """(C_L, C_D) at ``alpha`` degrees by linear interpolation of ``polar``."""
    a = polar.alpha
    if not a[0] <= alpha <= a[-1]:
        raise OutOfRange(f"alpha={alpha} outside polar span [{a[0]}, {a[-1]}]")
    i = min(bisect.bisect_right(a, alpha) - 1, len(a) - 2)
    w = (alpha - a[i]) / (a[i + 1] - a[i])
    return (polar.cl[i] * (1.0 - w) + polar.cl[i + 1] * w,
            polar.cd[i] * (1.0 - w) + polar.cd[i + 1] * w)


def aero_components(w_rel_local, wf, coeffs, p):
    """Drag and lift, each in local components."""
    cl, cd = coeffs
    q = 0.5 * p.A * p.rho * float(np.dot(w_rel_local, w_rel_local))
    drag = -q * cd * wf.x_w
    lift = -q * cl * wf.z_w
    return wf.frame.to_local(drag), wf.frame.to_local(lift)


def aero_force(w_rel_local, wf, coeffs, p):
    drag, lift = aero_components(w_rel_local, wf, coeffs, p)
    return drag + lift


def tether_tension(f_sum_r, r_dot, mode, p, clamp=True):
    """Tether tension from the drum balance; ``clamp`` forbids pushing (slack)."""
    if isinstance(mode, Locked):
        tension = f_sum_r
    else:
        num = p.M * f_sum_r * p.R + 2.0 * p.m * (r_dot / p.R) * p.k_fric
        if isinstance(mode, Retraction):
            num += 2.0 * p.m * mode.torque
        tension = num / (2.0 * p.m * p.R + p.M * p.R)
    return max(tension, 0.0) if clamp else tension


def beta_angle(w_rel_local):
    """Elevation of the relative wind out of the tangent plane (rad)."""
    w = np.asarray(w_rel_local, dtype=float)
    n = float(np.linalg.norm(w))
    if n <= EPS_W:
        raise DegenerateWind(f"|W^r| = {n:.3g} m/s")
    return math.asin(max(-1.0, min(1.0, w[2] / n)))


def derivatives(state, total_force_local, p):
    st = math.sin(state.theta)
    if st <= EPS_THETA:
        raise PolarSingularity()
    f = total_force_local
    return np.array([
        state.theta_dot,
        state.phi_dot,
        state.r_dot,
        f[0] / (p.m * state.r),
        f[1] / (p.m * state.r * st),
        f[2] / p.m,
    ])


def force_breakdown(state, controls, wind_world, mode, p, polar):
    frame = local_frame(state.theta, state.phi)
    w_rel = relative_wind(state, wind_world, frame)
    wf = wind_frame(w_rel, frame, controls.psi)
    drag, lift = aero_components(w_rel, wf, aero_coefficients(controls.alpha, polar), p)
    fg = gravity_force(state, p)
    fc = centrifugal_force(state, p)
    f_sum_r = float((fg + fc + drag + lift)[2])
    raw = tether_tension(f_sum_r, state.r_dot, mode, p, clamp=False)
    return ForceBreakdown(fg, fc, lift, drag, max(raw, 0.0), slack=raw < 0.0)


class StepDiagnostics(NamedTuple):
    n_substeps: int
    stop: str | None  # "ground", "altitude", "tether" or None
    min_altitude: float
    slack: bool
    tension: float | None
    power: float | None
    w_rel_local: np.ndarray | None


_MODE_CODES = {Traction: _k.TRACTION, Retraction: _k.RETRACTION, Locked: _k.LOCKED}


def _mode_args(mode, p):
    code = _MODE_CODES[type(mode)]
    fm = mode.torque / p.R if isinstance(mode, Retraction) else 0.0
    return code, fm


def integrate_step(state, controls, wind, mode, *, params=None, polar=None, dt_sub=1e-3,
                   n_sub=100, t0=0.0, z_ceiling=math.inf, r_max=math.inf, z_floor=0.0,
                   backend=None):
    """Advance one decision step of ``n_sub`` RK4 substeps at fixed controls.

    ``wind`` is any field from :mod:`awerl.wind`. Returns the new state, the
    energy delivered to the drum (J; negative when the motor spends energy)
    and diagnostics. Integration halts early when the kite touches the
    ground (``z <= z_floor``), exceeds ``z_ceiling`` or ``r_max``; the
    reason is reported in ``diagnostics.stop``. Singularities raise with the failing substep index.
    """
    p = params or SystemParams()
    polar = polar or AeroPolar.default()
    kb = _k.get_backend(backend) if backend else _k.backend
    cl, cd = aero_coefficients(controls.alpha, polar)
    code_mode, fm = _mode_args(mode, p)
    wargs = wind.kernel_args(kb.BACKEND)
    pargs = _params_args(p, kb.BACKEND)
    psi = math.radians(controls.psi)
    new, energy, n_done, code, min_z, slack = kb.integrate(
        state.as_tuple(), cl, cd, psi, code_mode, fm, pargs, *wargs,
        t0, dt_sub, n_sub, z_ceiling, r_max, z_floor)
    if code == _k.ALIGNMENT:
        raise AlignmentSingularity(substep=n_done)
    if code == _k.POLAR:
        raise PolarSingularity(substep=n_done)
    new_state = KiteState(*map(float, new))
    stop = None if code == _k.OK else _k.CODE_NAMES[code]
    ecode, ten, power, wt, wp, wr = kb.evaluate(
        new, cl, cd, psi, code_mode, fm, pargs, *wargs, t0 + n_done * dt_sub)
    if stop is None and ecode == _k.ALIGNMENT:
        raise AlignmentSingularity(substep=n_done)
    if stop is None and ecode == _k.POLAR:
        raise PolarSingularity(substep=n_done)
    if ecode == _k.OK:
        diag = StepDiagnostics(n_done, stop, float(min_z), bool(slack), float(ten), float(power),
                               np.array([wt, wp, wr], dtype=float))
    else:
        diag = StepDiagnostics(n_done, stop, float(min_z), bool(slack), None, None, None)
    return new_state, float(energy), diag


_PARAM_CACHE = {}


def _params_args(p, backend_name):
    key = (p, backend_name)
    out = _PARAM_CACHE.get(key)
    if out is None:
        arr = p.as_array()
        out = arr if backend_name == "cython" else tuple(float(x) for x in arr)
        _PARAM_CACHE[key] = out
    return out
