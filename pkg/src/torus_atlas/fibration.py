"""Energy-momentum map, bifurcation diagram and the reduced cubic.

Writing ``z = q3`` the pendulum reduces to ``zdot^2 = f(z)`` with

    f(z) = 2 (E - z) (1 - z^2) - I^2 = 2 (z - z1) (z - z2) (z - z3),

``-1 <= z1 <= z2 <= 1 <= z3`` on the closed range of the map.  The range is
bounded below by the relative equilibria, where f has a double root
``zs`` in (-1, 0):

    I^2 = -(1 - zs^2)^2 / zs,     E = I^2 / (2 (1 - zs^2)) + zs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError
from .geometry import angular_momentum, check_point, hamiltonian

__all__ = [
    "ValueClass",
    "EMValue",
    "ReducedCubic",
    "em_map",
    "boundary_point",
    "lower_energy",
    "classify",
    "reduced_roots",
    "cubic",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-10


class ValueClass(str, enum.Enum):
    REGULAR = "Regular"
    BOUNDARY_CURVE = "BoundaryCurve"
    STABLE_EQUILIBRIUM = "StableEquilibrium"
    FOCUS_FOCUS = "FocusFocus"
    EXTERIOR = "Exterior"


@dataclass(frozen=True)
class EMValue:
    I: float
    E: float

    def __iter__(self):
        yield self.I
        yield self.E


@dataclass(frozen=True)
class ReducedCubic:
    I: float
    E: float
    z1: float
    z2: float
    z3: float

    @property
    def roots(self):
        return (self.z1, self.z2, self.z3)

    def __call__(self, z):
        return cubic(z, self.I, self.E)

    def derivative(self, z):
        z = np.asarray(z, dtype=float)
        return 6.0 * z**2 - 4.0 * self.E * z - 2.0


def _as_value(v):
    if isinstance(v, EMValue):
        return v
    I, E = v
    return EMValue(float(I), float(E))


def cubic(z, I, E):
    z = np.asarray(z, dtype=float)
    return 2.0 * (E - z) * (1.0 - z * z) - I * I


def em_map(x):
    """``(I, E)`` at a phase point."""
    x = check_point(x)
    return EMValue(float(angular_momentum(x)), float(hamiltonian(x)))


def boundary_point(zs):
    """Point of the lower boundary curve (I >= 0 branch) at double root ``zs``."""
    zs = float(zs)
    if not -1.0 < zs < 0.0:
        raise ValueError("double root must lie in (-1, 0)")
    I2 = -((1.0 - zs * zs) ** 2) / zs
    return EMValue(float(np.sqrt(I2)), I2 / (2.0 * (1.0 - zs * zs)) + zs)


def lower_energy(I):
    """Minimum energy at angular momentum ``I``, i.e. the boundary curve.

    Returns ``(E_min, zs)``; at ``I = 0`` this is the corner ``(-1, -1)``.
    """
    I2 = float(I) ** 2
    if I2 == 0.0:
        return -1.0, -1.0
    # -(1 - z^2)^2 / z decreases from +inf to 0 on (-1, 0), so the root is unique
    g = lambda z: (1.0 - z * z) ** 2 + I2 * z
    zs = brentq(g, -1.0, 0.0, xtol=1e-16, rtol=1e-15, maxiter=200)
    # 1 - zs^2 = |I| sqrt(-zs) at the root; this form survives |I| -> 0
    return float(zs + abs(float(I)) / (2.0 * np.sqrt(-zs))), float(zs)


def classify(v, tol=DEFAULT_TOL):
    """Stratum of the bifurcation diagram containing ``v``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    I, E = _as_value(v)
    if abs(I) <= tol and abs(E - 1.0) <= tol:
        return ValueClass.FOCUS_FOCUS
    if abs(I) <= tol and abs(E + 1.0) <= tol:
        return ValueClass.STABLE_EQUILIBRIUM
    e_min, _ = lower_energy(I)
    if E < e_min - tol:
        return ValueClass.EXTERIOR
    if E <= e_min + tol:
        return ValueClass.BOUNDARY_CURVE
    return ValueClass.REGULAR


def _polish(z, I, E, clip=None):
    for _ in range(3):
        fz = 2.0 * (E - z) * (1.0 - z * z) - I * I
        dfz = 6.0 * z * z - 4.0 * E * z - 2.0
        if dfz == 0.0:
            break
        z_new = z - fz / dfz
        if clip is not None:
            z_new = min(max(z_new, clip[0]), clip[1])
        if z_new == z:
            break
        z = z_new
    return z


def reduced_roots(v, tol=DEFAULT_TOL):
    """Roots ``z1 <= z2`` in [-1, 1] and ``z3 >= 1`` of the reduced cubic."""
    v = _as_value(v)
    cls = classify(v, tol)
    if cls is not ValueClass.REGULAR:
        raise DomainError(f"reduced_roots needs a Regular value, got {cls.value} at {v}")
    I, E = v
    if I == 0.0:
        # f = 2 (E - z)(1 - z^2) factors exactly
        z1, z2, z3 = sorted((-1.0, 1.0, E))
        return ReducedCubic(I, E, z1, z2, z3)
    # monic form z^3 + a z^2 + b z + c
    a, b, c = -E, -1.0, E - 0.5 * I * I
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    m = 2.0 * np.sqrt(-p / 3.0)
    arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
    phi = np.arccos(arg) / 3.0
    zs = sorted(m * np.cos(phi - 2.0 * np.pi * k / 3.0) - a / 3.0 for k in range(3))
    z1 = _polish(zs[0], I, E, (-1.0, 1.0))
    z2 = _polish(zs[1], I, E, (-1.0, 1.0))
    z3 = _polish(zs[2], I, E, (1.0, np.inf))
    z1, z2 = min(z1, z2), max(z1, z2)
    return ReducedCubic(I, E, float(z1), float(z2), float(z3))
