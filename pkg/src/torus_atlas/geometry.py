"""Spherical pendulum on T*S^2 embedded in R^6.

A phase point is a length-6 array ``(q1, q2, q3, p1, p2, p3)`` with
``<q, q> = 1`` and ``<q, p> = 0``.  Units are fixed to m = l = g = 1, so the
integrable Hamiltonian is ``H = |p|^2 / 2 + q3``.  The perturbed Hamiltonian
is ``H + eps * F`` with F picked from a small analytic family:

====  ===========================  ==================
 id    F(q, p)                      name
====  ===========================  ==================
 1     q1                           tilted gravity
 2     q1 * q3
 3     q3 * |p|^2 / 2               height-dependent mass
====  ===========================  ==================

Equations of motion are the constrained Hamilton equations obtained by
eliminating the two Lagrange multipliers (Dirac bracket), and time stepping
uses generalized RATTLE composed to sixth order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import IntegrationError, InvalidPointError

__all__ = [
    "PERTURBATIONS",
    "HamiltonianSpec",
    "Trajectory",
    "check_point",
    "project",
    "hamiltonian",
    "perturbation",
    "angular_momentum",
    "vector_field",
    "rattle_step",
    "step",
    "integrate",
    "integrate_many",
    "COMPOSITION_WEIGHTS",
]

TOL_CONSTRAINT = 1e-12
MAX_PROJECTION_ITER = 50

PERTURBATIONS = {1: "q1", 2: "q1*q3", 3: "q3*|p|^2/2"}

# Yoshida's sixth-order symmetric composition (solution A)
_W1 = -1.17767998417887
_W2 = 0.235573213359357
_W3 = 0.784513610477560
_W0 = 1.0 - 2.0 * (_W1 + _W2 + _W3)
COMPOSITION_WEIGHTS = np.array([_W3, _W2, _W1, _W0, _W1, _W2, _W3])


@dataclass(frozen=True)
class HamiltonianSpec:
    """Perturbation size and choice of F; ``epsilon=0`` is the integrable pendulum."""

    epsilon: float = 0.0
    perturbation_id: int = 1

    def __post_init__(self):
        if self.perturbation_id not in PERTURBATIONS:
            raise ValueError(
                f"unknown perturbation_id {self.perturbation_id!r}; "
                f"expected one of {sorted(PERTURBATIONS)}"
            )
        if not self.epsilon >= 0.0:
            raise ValueError("epsilon must be non-negative")


@dataclass
class Trajectory:
    """Uniformly sampled trajectory; ``states[k]`` is the point at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    step: float

    def __len__(self):
        return len(self.times)


def check_point(x, tol=TOL_CONSTRAINT):
    """Return ``x`` as a float array, raising if it is off the constraint set."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 6:
        raise InvalidPointError(f"phase point must have 6 components, got shape {x.shape}")
    q, p = x[..., :3], x[..., 3:]
    c1 = np.abs(np.einsum("...i,...i", q, q) - 1.0)
    c2 = np.abs(np.einsum("...i,...i", q, p))
    worst = float(max(np.max(c1), np.max(c2)))
    if not worst <= tol:
        raise InvalidPointError(f"constraint violation {worst:.3e} exceeds {tol:.1e}")
    return x


def project(x):
    """Nearest point of T*S^2: normalize q, then drop the radial part of p."""
    x = np.array(x, dtype=float)
    q = x[..., :3] / np.linalg.norm(x[..., :3], axis=-1, keepdims=True)
    p = x[..., 3:]
    p = p - np.einsum("...i,...i", q, p)[..., None] * q
    return np.concatenate([q, p], axis=-1)


def perturbation(x, perturbation_id):
    """Value of F at ``x`` (any leading shape)."""
    x = np.asarray(x)
    q, p = x[..., :3], x[..., 3:]
    if perturbation_id == 1:
        return q[..., 0]
    if perturbation_id == 2:
        return q[..., 0] * q[..., 2]
    if perturbation_id == 3:
        return 0.5 * q[..., 2] * np.einsum("...i,...i", p, p)
    raise ValueError(f"unknown perturbation_id {perturbation_id!r}")


def hamiltonian(x, spec=None, tol=TOL_CONSTRAINT):
    """Energy ``|p|^2/2 + q3`` (plus ``eps * F`` when ``spec`` is given)."""
    x = check_point(x, tol)
    q, p = x[..., :3], x[..., 3:]
    energy = 0.5 * np.einsum("...i,...i", p, p) + q[..., 2]
    if spec is not None and spec.epsilon != 0.0:
        energy = energy + spec.epsilon * perturbation(x, spec.perturbation_id)
    return energy[()] if np.ndim(energy) == 0 else energy


def angular_momentum(x):
    x = np.asarray(x)
    return x[..., 0] * x[..., 4] - x[..., 1] * x[..., 3]


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _grad_q(q, p, eps, pid, out):
    # gradient in q of the R^6 extension of H + eps*F
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 1.0
    if eps != 0.0:
        if pid == 1:
            out[0] += eps
        elif pid == 2:
            out[0] += eps * q[2]
            out[2] += eps * q[0]
        else:
            out[2] += 0.5 * eps * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2])


@numba.njit(cache=True)
def _mass_factor(q, eps, pid):
    # grad_p H = c(q) * p for every member of the family
    if eps != 0.0 and pid == 3:
        return 1.0 + eps * q[2]
    return 1.0


@numba.njit(cache=True)
def _field(x, eps, pid, out):
    q = x[:3]
    p = x[3:]
    hq = np.empty(3)
    _grad_q(q, p, eps, pid, hq)
    c = _mass_factor(q, eps, pid)
    qq = q[0] * q[0] + q[1] * q[1] + q[2] * q[2]
    qp = q[0] * p[0] + q[1] * p[1] + q[2] * p[2]
    pp = p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
    qhq = q[0] * hq[0] + q[1] * hq[1] + q[2] * hq[2]
    mu2 = -c * qp / qq
    mu1 = (c * pp - qhq) / qq
    for i in range(3):
        out[i] = c * p[i] + mu2 * q[i]
        out[3 + i] = -hq[i] - mu1 * q[i] - mu2 * p[i]


@numba.njit(cache=True)
def _field_batch(xs, eps, pid):
    out = np.empty_like(xs)
    for k in range(xs.shape[0]):
        _field(xs[k], eps, pid, out[k])
    return out


@numba.njit(cache=True)
def _rattle(x, h, eps, pid, out):
    """Generalized RATTLE step; returns False if projection fails."""
    q = x[:3]
    p = x[3:]
    c0 = _mass_factor(q, eps, pid)
    hq = np.empty(3)
    a = np.empty(3)
    ph = p.copy()
    qn = q + h * c0 * p
    qq = q[0] * q[0] + q[1] * q[1] + q[2] * q[2]
    converged = False
    for it in range(50):
        _grad_q(q, ph, eps, pid, hq)
        for i in range(3):
            a[i] = p[i] - 0.5 * h * hq[i]
        s = 0.5 * h * (c0 + _mass_factor(qn, eps, pid))
        qa = q[0] * a[0] + q[1] * a[1] + q[2] * a[2]
        aa = a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
        disc = (s * qa) ** 2 - qq * (s * s * aa - 1.0)
        if disc < 0.0:
            return False
        beta = (-s * qa + np.sqrt(disc)) / qq
        lam = 2.0 * (1.0 - beta) / (s * h)
        diff = 0.0
        scale = 1.0
        for i in range(3):
            ph_new = a[i] - 0.5 * h * lam * q[i]
            qn_new = beta * q[i] + s * a[i]
            diff = max(diff, abs(ph_new - ph[i]), abs(qn_new - qn[i]))
            scale = max(scale, abs(ph_new))
            ph[i] = ph_new
            qn[i] = qn_new
        if it > 0 and diff <= 4e-16 * scale:
            converged = True
            break
    if not converged:
        return False
    _grad_q(qn, ph, eps, pid, hq)
    b = ph - 0.5 * h * hq
    qnqn = qn[0] * qn[0] + qn[1] * qn[1] + qn[2] * qn[2]
    mu = 2.0 * (qn[0] * b[0] + qn[1] * b[1] + qn[2] * b[2]) / (h * qnqn)
    for i in range(3):
        out[i] = qn[i]
        out[3 + i] = b[i] - 0.5 * h * mu * qn[i]
    return True


@numba.njit(cache=True)
def _composed(x, h, eps, pid, weights, out):
    cur = x.copy()
    nxt = np.empty(6)
    for w in weights:
        if not _rattle(cur, w * h, eps, pid, nxt):
            return False
        cur[:] = nxt
    out[:] = cur
    return True


@numba.njit(cache=True)
def _run(x0, h, n_steps, every, eps, pid, weights, samples):
    cur = x0.copy()
    nxt = np.empty(6)
    samples[0] = cur
    j = 1
    for k in range(1, n_steps + 1):
        if not _composed(cur, h, eps, pid, weights, nxt):
            return k
        cur[:] = nxt
        if k % every == 0:
            samples[j] = cur
            j += 1
    return 0


@numba.njit(cache=True)
def _run_many(x0s, h, n_steps, every, eps, pid, weights, samples):
    for m in range(x0s.shape[0]):
        fail = _run(x0s[m], h, n_steps, every, eps, pid, weights, samples[m])
        if fail != 0:
            return m, fail
    return -1, 0


# ---------------------------------------------------------------------------
# public wrappers
# ---------------------------------------------------------------------------


def vector_field(x, spec=HamiltonianSpec()):
    """Constrained Hamiltonian vector field at ``x`` (shape ``(..., 6)``).

    For ``eps = 0`` this is ``qdot = p``, ``pdot = -e3 + (q3 - |p|^2) q``.
    """
    x = np.asarray(x, dtype=float)
    flat = np.ascontiguousarray(x.reshape(-1, 6))
    out = _field_batch(flat, float(spec.epsilon), int(spec.perturbation_id))
    return out.reshape(x.shape)


def rattle_step(x, h, spec=HamiltonianSpec()):
    """One second-order generalized RATTLE step (symmetric, symplectic)."""
    out = np.empty(6)
    ok = _rattle(np.asarray(x, dtype=float), float(h), float(spec.epsilon),
                 int(spec.perturbation_id), out)
    if not ok:
        raise IntegrationError("RATTLE projection did not converge", time=None)
    return out


def step(x, h, spec=HamiltonianSpec()):
    """One sixth-order composed step of size ``h`` (``h`` may be negative)."""
    out = np.empty(6)
    ok = _composed(np.asarray(x, dtype=float), float(h), float(spec.epsilon),
                   int(spec.perturbation_id), COMPOSITION_WEIGHTS, out)
    if not ok:
        raise IntegrationError("RATTLE projection did not converge", time=None)
    return out


def _grid(t_end, h, sample_every):
    if not (h > 0 and t_end > 0):
        raise ValueError("need h > 0 and t_end > 0")
    n = int(np.ceil(t_end / h - 1e-9))
    h_eff = t_end / n
    every = max(1, int(sample_every))
    if n % every:
        n = (n // every + 1) * every
        h_eff = t_end / n
    return n, h_eff, every


def integrate(x0, spec=HamiltonianSpec(), t_end=1.0, h=1e-3, sample_every=1):
    """Integrate from ``x0`` to ``t_end``.

    The step is shrunk so that an integer number of steps lands on ``t_end``
    and every ``sample_every``-th state is recorded.
    """
    x0 = check_point(x0)
    n, h_eff, every = _grid(t_end, h, sample_every)
    samples = np.empty((n // every + 1, 6))
    fail = _run(np.ascontiguousarray(x0, dtype=float), h_eff, n, every,
                float(spec.epsilon), int(spec.perturbation_id), COMPOSITION_WEIGHTS, samples)
    if fail:
        raise IntegrationError(f"projection failed at t = {fail * h_eff:.6g}", time=fail * h_eff)
    times = np.arange(samples.shape[0]) * (every * h_eff)
    return Trajectory(times=times, states=samples, step=h_eff)


def integrate_many(x0s, spec=HamiltonianSpec(), t_end=1.0, h=1e-3, sample_every=1):
    """Integrate a batch ``(m, 6)`` of initial points on a common time grid.

    Returns ``(times, states)`` with ``states`` of shape ``(m, n_samples, 6)``.
    """
    x0s = check_point(np.atleast_2d(x0s))
    n, h_eff, every = _grid(t_end, h, sample_every)
    samples = np.empty((x0s.shape[0], n // every + 1, 6))
    m, fail = _run_many(np.ascontiguousarray(x0s, dtype=float), h_eff, n, every,
                        float(spec.epsilon), int(spec.perturbation_id),
                        COMPOSITION_WEIGHTS, samples)
    if m >= 0:
        raise IntegrationError(
            f"projection failed for point {m} at t = {fail * h_eff:.6g}", time=fail * h_eff)
    times = np.arange(samples.shape[1]) * (every * h_eff)
    return times, samples
