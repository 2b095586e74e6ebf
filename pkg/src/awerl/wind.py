"""Wind fields sampled at a space-time point.

Three providers share one interface (``sample`` and ``kernel_args``):

* :class:`ConstantField` - uniform wind along +x.
* :class:`GriddedField` - velocity snapshots on a regular grid, trilinear in
  space (periodic in x and y), linear in time, cycling through snapshots.
* :class:`SyntheticShearField` - linear shear plus divergence-free Fourier
  modes; a self-contained stand-in for turbulent channel data.

Gridded binary layout (little endian)::

    b"AWEW" | u32 version=1 | u32 nx, ny, nz, nt | f64 Lx, Ly, Lz, dt_snap
    | u8 periodic_xy | f32 data[nt][nz][ny][nx][3]
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernel as _k
from .errors import AboveDomain, BelowGround, DataError, FormatError

MAGIC = b"AWEW"
VERSION = 1
_HEADER = struct.Struct("<4sI4I4dB")


class WindSample(NamedTuple):
    u: float
    v: float
    w: float


class _Field:
    """Mixin that dispatches point queries to the active kernel backend."""

    #: highest altitude at which the field is defined
    ceiling = math.inf

    def _kernel_arrays(self):
        raise NotImplementedError

    def kernel_args(self, backend_name):
        cache = self.__dict__.setdefault("_kargs", {})
        if backend_name not in cache:
            kind, wi, wf, wg = self._kernel_arrays()
            if backend_name == "cython":
                cache[backend_name] = (kind, wi, wf, wg)
            else:
                cache[backend_name] = (kind, wi.tolist(), wf.tolist(), wg.tolist())
        return cache[backend_name]

    def sample(self, x, y, z, t=0.0):
        kb = _k.backend
        code, uvw = kb.sample_wind(*self.kernel_args(kb.BACKEND), float(x), float(y), float(z), float(t))
        if code == _k.GROUND:
            raise BelowGround(f"z={z} < 0")
        if code == _k.ALTITUDE:
            raise AboveDomain(f"z={z} above field top {self.ceiling}")
        return WindSample(*map(float, uvw))


@dataclass(frozen=True, eq=False)
class ConstantField(_Field):
    speed: float = 10.0

    def __post_init__(self):
        if not (self.speed >= 0 and math.isfinite(self.speed)):
            raise ValueError(f"speed must be non-negative, got {self.speed}")

    def _kernel_arrays(self):
        return (_k.WIND_CONSTANT, np.zeros(1, dtype=np.int64),
                np.array([self.speed], dtype=np.float64), np.zeros(1, dtype=np.float32))


@dataclass(frozen=True, eq=False)
class GriddedField(_Field):
    """Snapshots ``data[t, z, y, x, component]`` on a regular grid.

    Grid nodes sit at ``x = i * Lx / nx`` when periodic (node ``nx`` wraps to
    0), otherwise at ``i * Lx / (nx - 1)``; vertically at ``k * Lz / (nz - 1)``.
    ``frozen`` pins the field to snapshot ``snapshot`` for all times.
    """

    data: np.ndarray = field(repr=False)
    Lx: float
    Ly: float
    Lz: float
    dt_snap: float = 1.0
    periodic_xy: bool = True
    frozen: bool = False
    snapshot: int = 0

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 5 or data.shape[-1] != 3:
            raise DataError(f"data must have shape (nt, nz, ny, nx, 3), got {data.shape}")
        nt, nz, ny, nx, _ = data.shape
        if min(nx, ny, nz) < 2 or nt < 1:
            raise DataError(f"need nx, ny, nz >= 2 and nt >= 1, got {(nx, ny, nz, nt)}")
        for name in ("Lx", "Ly", "Lz", "dt_snap"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DataError(f"{name} must be positive, got {v}")
        if not np.isfinite(data).all():
            raise DataError("wind data contains non-finite values")
        if not 0 <= self.snapshot < nt:
            raise DataError(f"snapshot {self.snapshot} outside [0, {nt})")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        nt, nz, ny, nx, _ = self.data.shape
        return nx, ny, nz, nt

    @property
    def ceiling(self):
        return self.Lz

    def node(self, i, j, k):
        """World coordinates of grid node (i, j, k)."""
        nx, ny, nz, _ = self.shape
        sx = self.Lx / nx if self.periodic_xy else self.Lx / (nx - 1)
        sy = self.Ly / ny if self.periodic_xy else self.Ly / (ny - 1)
        return i * sx, j * sy, k * (self.Lz / (nz - 1))

    def with_time_mode(self, frozen, snapshot=0):
        return GriddedField(self.data, self.Lx, self.Ly, self.Lz, self.dt_snap,
                            self.periodic_xy, frozen, snapshot)

    def _kernel_arrays(self):
        nx, ny, nz, nt = self.shape
        wi = np.array([nx, ny, nz, nt, int(self.frozen), self.snapshot, int(self.periodic_xy)],
                      dtype=np.int64)
        wf = np.array([self.Lx, self.Ly, self.Lz, self.dt_snap], dtype=np.float64)
        return _k.WIND_GRIDDED, wi, wf, self.data.reshape(-1)


@dataclass(frozen=True, eq=False)
class SyntheticShearField(_Field):
    """Mean profile ``U(z) = top_speed * z / height`` plus cosine modes.

    ``modes`` rows are ``(kx, ky, kz, ax, ay, az, phase, omega)``; each mode
    contributes ``a * cos(k . x - omega t + phase)`` with ``a . k = 0``.
    """

    top_speed: float = 30.0
    height: float = 100.0
    modes: np.ndarray = field(default_factory=lambda: np.zeros((0, 8)), repr=False)

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.float64).reshape(-1, 8)
        if modes.size:
            dots = np.abs(np.einsum("ij,ij->i", modes[:, :3], modes[:, 3:6]))
            scale = np.linalg.norm(modes[:, :3], axis=1) * np.linalg.norm(modes[:, 3:6], axis=1)
            if (dots > 1e-12 * np.maximum(scale, 1e-300)).any():
                raise DataError("mode amplitudes must be orthogonal to their wavevectors")
        object.__setattr__(self, "modes", modes)

    @property
    def ceiling(self):
        return self.height

    def mean_u(self, z):
        return self.top_speed * z / self.height

    def _kernel_arrays(self):
        wf = np.concatenate([[self.top_speed, self.height, float(len(self.modes))],
                             self.modes.reshape(-1)])
        return (_k.WIND_SHEAR, np.zeros(1, dtype=np.int64), wf.astype(np.float64),
                np.zeros(1, dtype=np.float32))


def sample(field, x, y, z, t=0.0):
    """Wind velocity of ``field`` at (x, y, z, t)."""
    return field.sample(x, y, z, t)


def synth_shear(seed, n_modes, *, top_speed=30.0, height=100.0, length=100.0,
                rms_fraction=0.1, max_wavenumber=4):
    """Reproducible synthetic shear flow.

    Horizontal wavenumbers are nonzero multiples of ``2 pi / length``, so each
    mode averages to zero over a horizontal period and the mean profile is
    exact. Amplitudes are scaled so the total perturbation RMS equals
    ``rms_fraction * top_speed``.
    """
    if n_modes < 0:
        raise ValueError("n_modes must be >= 0")
    if not 0 <= rms_fraction <= 0.2:
        raise ValueError("rms_fraction must lie in [0, 0.2]")
    rng = np.random.default_rng(seed)
    modes = np.zeros((n_modes, 8))
    for q in range(n_modes):
        while True:
            nxy = rng.integers(-max_wavenumber, max_wavenumber + 1, size=2)
            if nxy.any():
                break
        nz = rng.integers(0, max_wavenumber + 1)
        kvec = np.array([2 * np.pi * nxy[0] / length, 2 * np.pi * nxy[1] / length,
                         np.pi * nz / height])
        a = rng.normal(size=3)
        a -= kvec * (a @ kvec) / (kvec @ kvec)
        a /= np.linalg.norm(a)
        modes[q, :3] = kvec
        modes[q, 3:6] = a
        modes[q, 6] = rng.uniform(0, 2 * np.pi)
        modes[q, 7] = rng.uniform(0.0, 1.0)
    if n_modes:
        # each unit-amplitude mode carries mean-square 1/2
        modes[:, 3:6] *= rms_fraction * top_speed / math.sqrt(n_modes / 2.0)
    return SyntheticShearField(top_speed, height, modes)


def save_gridded(field, path):
    nx, ny, nz, nt = field.shape
    header = _HEADER.pack(MAGIC, VERSION, nx, ny, nz, nt, field.Lx, field.Ly, field.Lz,
                          field.dt_snap, int(field.periodic_xy))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(field.data.astype("<f4", copy=False).tobytes(order="C"))


def load_gridded(path, *, frozen=False, snapshot=0):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, nx, ny, nz, nt, Lx, Ly, Lz, dt_snap, periodic = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if periodic not in (0, 1):
        raise FormatError(f"{path}: periodic flag must be 0 or 1, got {periodic}")
    expected = nt * nz * ny * nx * 3 * 4
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(nt, nz, ny, nx, 3)
    return GriddedField(data.astype(np.float32), Lx, Ly, Lz, dt_snap, bool(periodic),
                        frozen, snapshot)
