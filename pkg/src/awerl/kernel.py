"""Backend selection for the physics kernel.

The compiled extension is used when it imports; otherwise the pure-Python
mirror is used. Setting ``AWERL_BACKEND=python`` forces the fallback.
"""
import os

from . import _kernel_py

OK = _kernel_py.OK
ALIGNMENT = _kernel_py.ALIGNMENT
POLAR = _kernel_py.POLAR
GROUND = _kernel_py.GROUND
ALTITUDE = _kernel_py.ALTITUDE
TETHER = _kernel_py.TETHER

TRACTION = _kernel_py.TRACTION
RETRACTION = _kernel_py.RETRACTION
LOCKED = _kernel_py.LOCKED

WIND_CONSTANT = _kernel_py.WIND_CONSTANT
WIND_GRIDDED = _kernel_py.WIND_GRIDDED
WIND_SHEAR = _kernel_py.WIND_SHEAR

CODE_NAMES = {
    OK: "ok",
    ALIGNMENT: "alignment",
    POLAR: "polar",
    GROUND: "ground",
    ALTITUDE: "altitude",
    TETHER: "tether",
}


def _load(name):
    if name == "python":
        return _kernel_py
    from . import _kernel
    return _kernel


def available_backends():
    names = ["python"]
    try:
        _load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def get_backend(name=None):
    """Return the kernel module called ``name``, or the preferred one."""
    if name is None:
        name = os.environ.get("AWERL_BACKEND", "")
    if name:
        return _load(name)
    try:
        return _load("cython")
    except ImportError:
        return _kernel_py


backend = get_backend()
BACKEND = backend.BACKEND
