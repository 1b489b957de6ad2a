"""Invariant tori of the perturbed pendulum by Newton iteration in Fourier space.

The unknown is an embedding ``K`` of the standard torus with prescribed
frequency ``omega`` solving ``DK(theta) omega = X(K(theta))`` for the vector
field of ``H + eps F``.  Each Newton step is solved in the adapted frame
``P = [DK, J DK (DK^T DK)^-1]``, in which the linearized operator is upper
triangular up to terms of the size of the current defect::

    omega . d xi_N            = eta_N
    omega . d xi_L - T xi_N   = eta_L

Both equations are diagonal in Fourier space with divisors ``i <omega, k>``.
The average of ``xi_N`` is fixed by the torsion ``<T>`` (invertible by
nondegeneracy) and the average of ``xi_L`` is set to zero, which removes
the translation freedom relative to the seed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CloughTocher2DInterpolator

from .errors import DomainError, GridTooCoarse, SmallnessViolated
from .geometry import HamiltonianSpec, integrate_many, project, vector_field
from .torus import (
    TorusEmbedding,
    canonical_field,
    canonical_jacobian,
    cartesian_to_stereographic,
    stereographic_to_cartesian,
    wavenumbers,
)

log = logging.getLogger(__name__)

__all__ = [
    "KamConfig",
    "SolvedTorus",
    "LocalConjugacy",
    "invariance_residual",
    "solve_invariance",
    "validate_torus",
    "calibrate_guard",
    "build_local_conjugacy",
    "torus_coordinates",
]


@dataclass(frozen=True)
class KamConfig:
    newton_tol: float = 1e-10
    max_newton: int = 12
    N: int = 64
    tail_tol: float = 1e-8
    smallness_guard: float | None = None

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")


@dataclass
class SolvedTorus:
    omega: np.ndarray
    K: TorusEmbedding
    residual: float
    epsilon: float
    perturbation_id: int = 1
    history: list = field(default_factory=list)
    min_divisor: float = np.inf
    seed: TorusEmbedding | None = None

    @property
    def spec(self):
        return HamiltonianSpec(self.epsilon, self.perturbation_id)


def invariance_residual(K, omega, spec=HamiltonianSpec()):
    """Sup over the grid of ``|DK . omega - X(K)|`` with spectral derivatives."""
    lhs = K.derivative(np.asarray(omega, dtype=float))
    rhs = vector_field(K.grid_values(), spec)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# Fourier helpers on (N, N, ...) grids
# ---------------------------------------------------------------------------


def _fft(f):
    return np.fft.fft2(f, axes=(0, 1))


def _ifft(F):
    return np.fft.ifft2(F, axes=(0, 1)).real


def _symbol(omega, N):
    k = wavenumbers(N)
    return 1j * (omega[0] * k[:, None] + omega[1] * k[None, :])


def _mask(N):
    m = np.ones((N, N))
    m[N // 2, :] = 0.0
    m[:, N // 2] = 0.0
    return m


def _lowpass(N):
    k = np.abs(np.fft.fftfreq(N, d=1.0 / N))
    return (np.maximum(k[:, None], k[None, :]) <= N // 3).astype(float)


def _deriv(f, direction, N):
    sym = _symbol(direction, N) * _mask(N)
    return _ifft(_fft(f) * sym.reshape(sym.shape + (1,) * (f.ndim - 2)))


def _solve_cohomological(f, omega, N):
    """Zero-mean solution of ``omega . d u = f - <f>``."""
    sym = _symbol(omega, N)
    inv = np.zeros_like(sym)
    nz = (np.abs(sym) > 0) & (_mask(N) > 0)
    inv[nz] = 1.0 / sym[nz]
    return _ifft(_fft(f) * inv.reshape(inv.shape + (1,) * (f.ndim - 2)))


def _min_divisor(omega, N):
    sym = np.abs(_symbol(omega, N))
    nz = (sym > 0) & (_mask(N) > 0)
    return float(sym[nz].min())


def _embedding(Y, omega, winding, N, meta=None):
    values = stereographic_to_cartesian(Y)
    return TorusEmbedding.from_grid(values, omega, winding, meta)


def _pullback_metric(Y, h=1e-30):
    """Euclidean metric of R^6 pulled back to stereographic coordinates."""
    cols = []
    for j in range(4):
        yc = Y.astype(complex)
        yc[..., j] += 1j * h
        cols.append(stereographic_to_cartesian(yc).imag / h)
    D = np.stack(cols, axis=-1)
    return np.einsum("...ki,...kj->...ij", D, D)


def _frame(Y, L):
    """Symplectic frame ``[L, N]`` with ``N = J g L G^-1`` made Lagrangian.

    The metric ``g`` is pulled back from R^6; the Euclidean metric of the
    chart gives a Gram matrix whose inverse is poorly resolved on tori
    passing near the bottom pole.
    """
    g = _pullback_metric(Y)
    gL = np.einsum("...ij,...ja->...ia", g, L)
    G = np.einsum("...ia,...ib->...ab", L, gL)
    JgL = np.concatenate([gL[..., 2:, :], -gL[..., :2, :]], axis=-2)
    Nf = np.einsum("...ia,...ab->...ib", JgL, np.linalg.inv(G))
    JN = np.concatenate([Nf[..., 2:, :], -Nf[..., :2, :]], axis=-2)
    S = np.einsum("...ia,...ib->...ab", Nf, JN)
    Nf = Nf - 0.5 * np.einsum("...ia,...ab->...ib", L, S)
    return np.concatenate([L, Nf], axis=-1)


def _newton_step(Y, omega, eps, pid, N):
    defect = _deriv(Y, omega, N) - canonical_field(Y, eps, pid)

    L = np.stack([_deriv(Y, (1.0, 0.0), N), _deriv(Y, (0.0, 1.0), N)], axis=-1)
    P = _frame(Y, L)
    Pinv = np.linalg.inv(P)

    DX = canonical_jacobian(Y, eps, pid)
    LwP = _deriv(P, omega, N)
    Lam = np.einsum("...ij,...jk->...ik", Pinv, np.einsum("...ij,...jk->...ik", DX, P) - LwP)
    torsion = Lam[..., :2, 2:]

    eta = -np.einsum("...ij,...j->...i", Pinv, defect)
    eta_L, eta_N = eta[..., :2], eta[..., 2:]
    xi_N_osc = _solve_cohomological(eta_N, omega, N)
    T_avg = torsion.mean(axis=(0, 1))
    coupling = np.einsum("...ij,...j->...i", torsion, xi_N_osc)
    rhs = -eta_L.mean(axis=(0, 1)) - coupling.mean(axis=(0, 1))
    xi_N = xi_N_osc + np.linalg.solve(T_avg, rhs)
    xi_L = _solve_cohomological(eta_L + np.einsum("...ij,...j->...i", torsion, xi_N), omega, N)
    dY = np.einsum("...ij,...j->...i", P, np.concatenate([xi_L, xi_N], axis=-1))
    # two-thirds dealiasing keeps grid round-off out of the small divisors
    return Y + _ifft(_fft(dY) * _lowpass(N)[..., None]), T_avg


def torus_coordinates(K):
    """Stereographic canonical coordinates ``(x1, x2, y1, y2)`` on the grid."""
    return cartesian_to_stereographic(K.grid_values())


def solve_invariance(K0, omega, spec, cfg=KamConfig(), params=None):
    """Invariant torus of ``H + eps F`` with frequency ``omega`` seeded at ``K0``.

    Raises SmallnessViolated when Newton diverges or makes no progress and
    GridTooCoarse when it stalls or ends with a Fourier tail above
    ``cfg.tail_tol``.
    """
    omega = np.asarray(omega, dtype=float)
    if params is not None:
        from .diophantine import is_diophantine
        ok, margin = is_diophantine(omega, params)
        if not ok:
            raise DomainError(f"omega = {omega} is not Diophantine (margin {margin:.3e})")
    eps, pid = float(spec.epsilon), int(spec.perturbation_id)
    N = K0.N
    if eps == 0.0:
        res = invariance_residual(K0, omega, spec)
        return SolvedTorus(omega, K0, res, 0.0, pid, [res], _min_divisor(omega, N), K0)
    if cfg.smallness_guard is not None and eps > cfg.smallness_guard:
        raise SmallnessViolated(
            f"eps = {eps:g} exceeds the calibrated smallness guard {cfg.smallness_guard:g}")

    Y = torus_coordinates(K0)
    K = K0
    res = invariance_residual(K, omega, spec)
    history = [res]
    with np.errstate(all="ignore"):
        for it in range(cfg.max_newton):
            if res <= cfg.newton_tol:
                break
            Y, _ = _newton_step(Y, omega, eps, pid, N)
            if not np.all(np.isfinite(Y)):
                history.append(np.inf)
                break
            K = _embedding(Y, omega, K0.winding, N, dict(K0.meta))
            res = invariance_residual(K, omega, spec)
            history.append(res)
            log.debug("newton %d: residual %.3e", it + 1, res)
            if not np.isfinite(res) or res > 1e3 * history[0]:
                break
    if not history[-1] <= cfg.newton_tol:
        # a stall well below the initial residual is resolution-limited; anything else
        # means Newton left its basin
        stalled = np.isfinite(history[-1]) and min(history) < 1e-2 * history[0]
        tail = K.tail() if stalled else np.inf
        if stalled and tail > cfg.tail_tol:
            raise GridTooCoarse(
                f"Fourier tail {tail:.1e} exceeds {cfg.tail_tol:.0e} at N = {N}", suggested_n=2 * N)
        raise SmallnessViolated(
            f"Newton failed at eps = {eps:g}: residuals "
            + ", ".join(f"{r:.2e}" for r in history), residuals=history)
    tail = K.tail()
    if tail > cfg.tail_tol:
        raise GridTooCoarse(
            f"Fourier tail {tail:.1e} exceeds {cfg.tail_tol:.0e} at N = {N}", suggested_n=2 * N)
    K.meta.update(epsilon=eps, perturbation_id=pid, residual=history[-1])
    return SolvedTorus(omega, K, history[-1], eps, pid, history, _min_divisor(omega, N), K0)


def validate_torus(st, spec=None, t_end=100.0, n_points=3, seed=0, h=1e-3, n_samples=400):
    """Max distance between the perturbed flow from ``K(theta0)`` and
    ``K(theta0 + omega t)`` over ``[0, t_end]`` for random ``theta0``."""
    spec = spec or st.spec
    rng = np.random.Generator(np.random.Philox(seed))
    theta0 = rng.uniform(0.0, 2.0 * np.pi, size=(n_points, 2))
    x0 = project(st.K.evaluate(theta0))
    every = max(1, int(round(t_end / h / n_samples)))
    times, states = integrate_many(x0, spec, t_end, h, sample_every=every)
    drift = np.asarray(st.omega)[None, None, :] * times[None, :, None]
    pred = st.K.evaluate(theta0[:, None, :] + drift)
    return float(np.max(np.linalg.norm(states - pred, axis=-1)))


def calibrate_guard(K0, omega, spec, cfg=KamConfig(), eps_hi=0.5, iters=12):
    """Bracket the breakdown of Newton in eps by bisection.

    Returns ``(eps_ok, eps_fail)``: the solver converges at ``eps_ok`` and
    raises SmallnessViolated (or GridTooCoarse) at ``eps_fail``.
    """
    cfg = replace(cfg, smallness_guard=None)

    def works(eps):
        try:
            solve_invariance(K0, omega, replace(spec, epsilon=eps), cfg)
            return True
        except (SmallnessViolated, GridTooCoarse):
            return False

    lo, hi = 0.0, float(eps_hi)
    while works(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 64.0:
            return lo, np.inf
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if works(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


# ---------------------------------------------------------------------------
# local conjugacy over a chart
# ---------------------------------------------------------------------------


class LocalConjugacy:
    """Solved Diophantine tori of one chart plus interpolation across actions.

    The conjugacy sends the integrable torus at action ``a`` (chart angles
    theta) to the perturbed torus: ``Phi(K0_a(theta)) = K_a(theta)``.
    """

    def __init__(self, chart, spec, params, cfg, labels):
        self.chart = chart
        self.spec = spec
        self.params = params
        self.cfg = cfg
        self.labels = labels
        self.tori = {}
        self._cache = {}
        self._interp = None

    # seeds and exact solves -------------------------------------------------
    def seed(self, v):
        from .action_angle import integrable_embedding
        key = (float(v[0]), float(v[1]))
        if key not in self._cache:
            K0 = integrable_embedding(key, self.cfg.N)
            self._cache[key] = K0.translate(self.chart.phase)
        return self._cache[key]

    def solve(self, v):
        """Exact solve of the torus at value ``v`` (must be Diophantine)."""
        from .diophantine import label_value
        key = (float(v[0]), float(v[1]))
        if key in self.tori:
            return self.tori[key]
        ok, omega = label_value(self.chart, key, self.params)
        if not ok:
            raise DomainError(f"value {key} is not in D_gamma(A_gamma) of chart {self.chart.id}")
        K0 = self.seed(key)
        st = solve_invariance(K0, K0.omega, self.spec, self.cfg)
        self.tori[key] = st
        return st

    # interpolation ------------------------------------------------------------
    def _build_interpolant(self):
        from .action_angle import action_J
        keys = sorted(self.tori)
        if len(keys) < 3:
            raise DomainError("interpolation needs at least three solved tori")
        pts = np.array([[I, action_J((I, E))] for I, E in keys])
        dY = np.stack([torus_coordinates(self.tori[k].K) - torus_coordinates(self.tori[k].seed)
                       for k in keys])
        self._interp = CloughTocher2DInterpolator(pts, dY.reshape(len(keys), -1))
        self._shape = dY.shape[1:]

    def interpolate(self, v):
        """Perturbed torus at ``v`` from the seed plus the interpolated deformation."""
        from .action_angle import action_J
        if self._interp is None:
            self._build_interpolant()
        K0 = self.seed(v)
        dY = self._interp(np.array([[v[0], action_J(v)]]))[0].reshape(self._shape)
        if not np.all(np.isfinite(dY)):
            raise DomainError(f"value {tuple(v)} lies outside the solved action hull")
        Y = torus_coordinates(K0) + dY
        return _embedding(Y, K0.omega, K0.winding, K0.N, dict(K0.meta))

    @property
    def values(self):
        return sorted(self.tori)


def build_local_conjugacy(chart, spec, params, shape=(10, 10), cfg=KamConfig(), labels=None):
    """Solve every Diophantine grid torus of ``chart``.

    Any failure aborts with the failing value in the message.
    """
    from .diophantine import diophantine_set_in_chart
    if labels is None:
        labels = diophantine_set_in_chart(chart, params, shape)
    lc = LocalConjugacy(chart, spec, params, cfg, labels)
    for (I, E), ok in zip(labels.values, labels.inside):
        if not ok:
            continue
        try:
            lc.solve((I, E))
        except (SmallnessViolated, GridTooCoarse) as exc:
            raise type(exc)(f"chart {chart.id}, value ({I:.6g}, {E:.6g}): {exc}") from exc
    if not lc.tori:
        raise DomainError(f"chart {chart.id} has no Diophantine grid tori")
    return lc
