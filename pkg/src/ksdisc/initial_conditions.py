"""Built-in initial conditions for simulations."""

import re

import numpy as np

from .errors import UsageError
from .models import GalerkinState, GridField
from .odd import FULL_LENGTH, OddState
from .systems import Geometry

_CALL = re.compile(r"^([a-z]+)\(([^)]*)\)$")


def _parse(name):
    name = name.strip()
    match = _CALL.match(name)
    if match is None:
        return name, []
    args = [a.strip() for a in match.group(2).split(",") if a.strip()]
    return match.group(1), args


def builtin_ic(name, geometry):
    """Sample a named initial condition on the requested geometry.

    Names: zero, halfwave (|sin(x/2)|, full geometry only), sine(k),
    random(seed, amplitude).
    """
    kind, args = _parse(name)
    if geometry.kind == "full":
        x = geometry.h * np.arange(geometry.size)
    elif geometry.kind == "odd":
        x = (np.arange(geometry.size) + 0.5) * geometry.h
    else:
        x = None

    def wrap(values):
        if geometry.kind == "full":
            return GridField(values, geometry.h, FULL_LENGTH)
        if geometry.kind == "odd":
            return OddState(values, geometry.size)
        return GalerkinState(values)

    if kind == "zero":
        return wrap(np.zeros(geometry.dof))
    if kind == "halfwave":
        if geometry.kind != "full":
            raise UsageError(
                "halfwave |sin(x/2)| is even about 0 and incompatible with "
                "odd or modal geometry"
            )
        return wrap(np.abs(np.sin(x / 2.0)))
    if kind == "sine":
        if len(args) != 1:
            raise UsageError("sine takes one wavenumber, e.g. sine(2)")
        k = int(args[0])
        if geometry.kind == "modal":
            values = np.zeros(geometry.dof)
            if not 1 <= k <= geometry.dof:
                raise UsageError(f"mode {k} outside 1..{geometry.dof}")
            values[k - 1] = 1.0
            return wrap(values)
        return wrap(np.sin(k * x))
    if kind == "random":
        if len(args) != 2:
            raise UsageError("random takes (seed, amplitude)")
        seed, amplitude = int(args[0]), float(args[1])
        rng = np.random.default_rng(seed)
        return wrap(amplitude * rng.standard_normal(geometry.dof))
    raise UsageError(f"unknown initial condition {name!r}")
