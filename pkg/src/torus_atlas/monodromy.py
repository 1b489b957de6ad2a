"""Monodromy of the pendulum torus bundle from the rotation angle.

The principal rotation angle ``Theta mod 2 pi`` is a continuous circle-valued
function on the regular values.  Following it around a closed loop and
lifting consecutive samples to the nearest branch gives ``Delta Theta``, an
integer multiple of ``2 pi``.  In the cycle basis (z-oscillation cycle,
azimuthal cycle) with the matrix acting on column coordinates the
monodromy is ``[[1, k], [0, 1]]`` with ``k = Delta Theta / 2 pi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .action_angle import action_angle_data
from .errors import DomainError, RefinementError
from .fibration import ValueClass, classify

__all__ = [
    "FOCUS_FOCUS",
    "LoopPath",
    "RotationTrack",
    "MonodromyReport",
    "continue_rotation",
    "monodromy_matrix",
    "winding_number",
]

FOCUS_FOCUS = (0.0, 1.0)
MAX_JUMP = np.pi / 4


@dataclass(frozen=True)
class LoopPath:
    """Closed polyline of regular values, shape ``(n, 2)`` with first = last."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 4:
            raise ValueError("a loop needs at least three distinct vertices")
        if not np.allclose(v[0], v[-1], rtol=0.0, atol=1e-14):
            raise ValueError("loop is not closed: first and last vertex differ")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def circle(cls, center=FOCUS_FOCUS, radius=0.3, n=64, turns=1, start=0.0):
        """Circle traversed ``turns`` times (negative turns run clockwise)."""
        m = max(abs(turns), 1) * n
        t = start + 2.0 * np.pi * turns * np.arange(m + 1) / m
        v = np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=-1)
        v[-1] = v[0]
        return cls(v)

    @classmethod
    def polygon(cls, points):
        pts = np.asarray(points, dtype=float)
        if not np.allclose(pts[0], pts[-1], rtol=0.0, atol=1e-14):
            pts = np.vstack([pts, pts[:1]])
        return cls(pts)

    def reversed(self):
        return LoopPath(self.vertices[::-1].copy())

    def concatenate(self, other):
        """This loop followed by ``other``; both must share the base point."""
        if not np.allclose(self.vertices[0], other.vertices[0], rtol=0.0, atol=1e-14):
            raise ValueError("loops must share a base point to be concatenated")
        return LoopPath(np.vstack([self.vertices, other.vertices[1:]]))


@dataclass
class RotationTrack:
    """Samples of the continuously tracked rotation angle along a loop."""

    values: np.ndarray
    theta: np.ndarray
    delta_theta: float
    n_evaluations: int
    n_refinements: int
    max_jump: float


@dataclass
class MonodromyReport:
    loop: LoopPath
    delta_theta: float
    k: int
    matrix: np.ndarray
    winding: int
    track: RotationTrack = field(repr=False)

    def as_dict(self):
        return {
            "vertices": self.loop.vertices.tolist(),
            "delta_theta": self.delta_theta,
            "k": self.k,
            "matrix": self.matrix.tolist(),
            "winding_about_focus_focus": self.winding,
            "evaluations": self.track.n_evaluations,
            "refinements": self.track.n_refinements,
            "max_jump": self.track.max_jump,
        }


def _theta(v):
    if classify(v) is not ValueClass.REGULAR:
        raise DomainError(f"loop meets the singular set at {tuple(v)}")
    return action_angle_data((float(v[0]), float(v[1]))).theta


def _wrap(d):
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def continue_rotation(loop, max_jump=MAX_JUMP, max_depth=20, budget=20_000):
    """Track ``Theta`` continuously around ``loop``.

    Edges are bisected until consecutive samples differ by less than
    ``max_jump`` on the nearest branch.

    Returns
    -------
    RotationTrack
    """
    verts = loop.vertices
    cache = {}

    def theta_at(p):
        key = (float(p[0]), float(p[1]))
        if key not in cache:
            if len(cache) >= budget:
                raise RefinementError(
                    f"rotation tracking exceeded {budget} evaluations; move the loop away "
                    "from the singular set")
            cache[key] = _theta(key)
        return cache[key]

    pts, ths = [verts[0]], [theta_at(verts[0])]
    refinements = 0
    for a, b in zip(verts[:-1], verts[1:]):
        stack = [(a, b, 0)]
        while stack:
            p, q, depth = stack.pop()
            tp, tq = theta_at(p), theta_at(q)
            if abs(_wrap(tq - tp)) < max_jump:
                pts.append(q)
                ths.append(tq)
                continue
            if depth >= max_depth:
                raise RefinementError(
                    f"rotation angle jumps by {abs(_wrap(tq - tp)):.3f} between {tuple(p)} and "
                    f"{tuple(q)} after {max_depth} bisections; adjust the loop")
            m = 0.5 * (p + q)
            refinements += 1
            stack.append((m, q, depth + 1))
            stack.append((p, m, depth + 1))
    ths = np.asarray(ths)
    steps = _wrap(np.diff(ths))
    lifted = ths[0] + np.concatenate([[0.0], np.cumsum(steps)])
    return RotationTrack(np.asarray(pts), lifted, float(lifted[-1] - lifted[0]),
                         len(cache), refinements, float(np.max(np.abs(steps))))


def winding_number(loop, center=FOCUS_FOCUS):
    """Winding number of the loop about ``center`` by angle summation."""
    d = loop.vertices - np.asarray(center, dtype=float)
    if np.any(np.hypot(d[:, 0], d[:, 1]) == 0.0):
        raise DomainError("loop passes through the winding centre")
    ang = np.arctan2(d[:, 1], d[:, 0])
    steps = _wrap(np.diff(ang))
    if np.any(np.abs(steps) > 0.9 * np.pi):
        raise DomainError("loop edges too long for angle summation; add vertices")
    return int(round(float(np.sum(steps)) / (2.0 * np.pi)))


def monodromy_matrix(loop, tol=1e-6, **kw):
    """Monodromy of the bundle along ``loop``.

    Raises RefinementError when ``Delta Theta / 2 pi`` is not an integer
    within ``tol``.
    """
    track = continue_rotation(loop, **kw)
    ratio = track.delta_theta / (2.0 * np.pi)
    k = int(round(ratio))
    if abs(ratio - k) > tol:
        raise RefinementError(f"Delta Theta / 2 pi = {ratio:.9f} is not an integer")
    mat = np.array([[1, k], [0, 1]], dtype=np.int64)
    return MonodromyReport(loop, track.delta_theta, k, mat, winding_number(loop), track)
