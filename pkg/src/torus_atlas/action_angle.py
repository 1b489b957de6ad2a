"""Actions, periods, rotation angle and the frequency map of the pendulum.

For a regular value ``(I, E)`` with reduced roots ``z1 <= z2 <= z3``:

    J     = (1/pi) int_{z1}^{z2} sqrt(f) / (1 - z^2) dz
    T     = 2 int_{z1}^{z2} dz / sqrt(f)
    Theta = 2 I int_{z1}^{z2} dz / ((1 - z^2) sqrt(f))

The substitution ``z = z1 + (z2 - z1) sin^2(psi)`` removes the square-root
endpoint behaviour shared by all three integrands.  ``Theta`` as given by the
integral (``theta_lift``) lies in (pi, 2 pi) for I > 0 and in (-2 pi, -pi)
for I < 0; the chart convention reduces it to the principal value in
[0, 2 pi), which is continuous across the planar axis I = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .errors import DomainError
from .fibration import EMValue, ValueClass, classify, reduced_roots
from .torus import TorusEmbedding, angle_grid, spherical_to_cartesian

__all__ = [
    "ActionAngleData",
    "FrequencyVector",
    "ActionPair",
    "ChartSpec",
    "NondegeneracyScan",
    "action_angle_data",
    "action_J",
    "periods",
    "theta_limits",
    "frequency_map",
    "actions",
    "values_from_actions",
    "frequency_jacobian",
    "nondegeneracy_scan",
    "integrable_embedding",
    "translate_on_torus",
]

EPSABS = 1e-13
EPSREL = 1e-13
AXIS_TOL = 1e-13


@dataclass(frozen=True)
class FrequencyVector:
    omega1: float
    omega2: float

    def __array__(self, dtype=None, copy=None):
        return np.array([self.omega1, self.omega2], dtype=dtype)

    def __iter__(self):
        yield self.omega1
        yield self.omega2

    def __getitem__(self, i):
        return (self.omega1, self.omega2)[i]

    def __len__(self):
        return 2


@dataclass(frozen=True)
class ActionPair:
    I: float
    J: float


@dataclass(frozen=True)
class ActionAngleData:
    I: float
    E: float
    J: float
    T: float
    theta: float
    theta_lift: float

    @property
    def omega(self):
        return FrequencyVector(2.0 * np.pi / self.T, self.theta / self.T)

    @property
    def winding(self):
        """Integer ``m`` with ``theta = theta_lift + 2 pi m``."""
        return int(round((self.theta - self.theta_lift) / (2.0 * np.pi)))


@dataclass(frozen=True)
class ChartSpec:
    """Action-angle chart over a rectangle of regular values.

    ``phase`` is the angle offset of this chart relative to the canonical
    anchoring (theta1 = 0 at z = z1, theta2 = 0 at azimuth 0).
    """

    id: int
    I_range: tuple
    E_range: tuple
    gamma: float = 1e-3
    phase: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (self.I_range[0] < self.I_range[1] and self.E_range[0] < self.E_range[1]):
            raise ValueError("chart window must be a nondegenerate rectangle")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def contains(self, v, margin=0.0):
        I, E = v
        return (self.I_range[0] + margin <= I <= self.I_range[1] - margin
                and self.E_range[0] + margin <= E <= self.E_range[1] - margin)

    def corners(self):
        (a, b), (c, d) = self.I_range, self.E_range
        return [(a, c), (b, c), (b, d), (a, d)]

    def validate(self, n=9):
        """Raise unless the closed window avoids the singular set."""
        I = np.linspace(*self.I_range, n)
        E = np.linspace(*self.E_range, n)
        bad = [(float(i), float(e)) for i in I for e in E
               if classify((i, e)) is not ValueClass.REGULAR]
        if bad:
            raise DomainError(f"chart {self.id} window meets the singular set at {bad[:5]}")
        return self

    def action_window(self, n=33):
        """Boundary of the window mapped to actions ``(I, J)``, shape (4n, 2)."""
        pts = _rectangle_boundary(self.I_range, self.E_range, n)
        return np.array([[I, action_J((I, E))] for I, E in pts])


def _rectangle_boundary(I_range, E_range, n):
    s = np.linspace(0.0, 1.0, n, endpoint=False)
    (a, b), (c, d) = I_range, E_range
    return np.concatenate([
        np.stack([a + (b - a) * s, np.full(n, c)], 1),
        np.stack([np.full(n, b), c + (d - c) * s], 1),
        np.stack([b - (b - a) * s, np.full(n, d)], 1),
        np.stack([np.full(n, a), d - (d - c) * s], 1),
    ])


def theta_limits(E):
    """One-sided limits of ``theta_lift`` as I -> 0- and I -> 0+ at energy E."""
    if E < 1.0:
        return (-np.pi, np.pi)
    return (-2.0 * np.pi, 2.0 * np.pi)


def _regular(v):
    v = v if isinstance(v, EMValue) else EMValue(float(v[0]), float(v[1]))
    cls = classify(v)
    if cls is not ValueClass.REGULAR:
        raise DomainError(f"value {tuple(v)} is {cls.value}, not Regular")
    return v


def action_angle_data(v, epsabs=EPSABS, epsrel=EPSREL):
    """``J``, ``T`` and the rotation angle at a regular value, one quadrature pass."""
    v = _regular(v)
    I, E = v
    r = reduced_roots(v)
    z1, z2, z3 = r.roots
    delta = z2 - z1
    on_axis = abs(I) <= AXIS_TOL

    def integrand(psi):
        s2 = np.sin(psi) ** 2
        c2 = np.cos(psi) ** 2
        A = (1.0 + z1) + delta * s2      # 1 + z
        B = (1.0 - z2) + delta * c2      # 1 - z
        w = np.sqrt(2.0 * ((z3 - z2) + delta * c2))   # sqrt(2 (z3 - z))
        rows = [
            (2.0 / np.pi) * delta**2 * s2 * c2 * w / (A * B),
            4.0 / w,
        ]
        if not on_axis:
            rows.append(4.0 * I / (A * B * w))
        return np.vstack(rows)

    vals, _, _ = quadrature.integrate(integrand, 0.0, 0.5 * np.pi, epsabs=epsabs, epsrel=epsrel)
    J, T = float(vals[0]), float(vals[1])
    if on_axis:
        lift = theta_limits(E)[1]
    else:
        lift = float(vals[2])
    theta = float(np.mod(lift, 2.0 * np.pi))
    if theta >= 2.0 * np.pi:
        theta = 0.0
    return ActionAngleData(float(I), float(E), J, T, theta, lift)


def action_J(v):
    """Second action ``J`` (area / 2 pi of the reduced orbit)."""
    return action_angle_data(v).J


def periods(v):
    """``(T, theta, theta_lift)``: z-period, principal rotation angle, integral branch."""
    d = action_angle_data(v)
    return d.T, d.theta, d.theta_lift


def frequency_map(v):
    """``(omega1, omega2) = (2 pi / T, theta / T)`` with the principal rotation angle."""
    return action_angle_data(v).omega


def actions(v):
    d = action_angle_data(v)
    return ActionPair(d.I, d.J)


def values_from_actions(I, J, E_guess, tol=1e-14, max_iter=50):
    """Invert ``E -> J(I, E)`` at fixed I by Newton (dJ/dE = T / 2 pi)."""
    E = float(E_guess)
    for _ in range(max_iter):
        d = action_angle_data((I, E))
        step = (d.J - J) * 2.0 * np.pi / d.T
        E -= step
        if abs(step) <= tol * max(1.0, abs(E)):
            return EMValue(float(I), E)
    raise DomainError(f"could not invert J = {J} at I = {I}")


def frequency_jacobian(v, h=1e-4):
    """``d(omega1, omega2) / d(I, J)`` by central differences in (I, E).

    Returns ``(matrix, data)`` where data is the ActionAngleData at ``v``.
    """
    I, E = v
    d0 = action_angle_data((I, E))
    w = {}
    for key, (dI, dE) in {"I+": (h, 0), "I-": (-h, 0), "E+": (0, h), "E-": (0, -h)}.items():
        w[key] = np.asarray(action_angle_data((I + dI, E + dE)).omega)
    dw_dI = (w["I+"] - w["I-"]) / (2 * h)
    dw_dE = (w["E+"] - w["E-"]) / (2 * h)
    dw_dIE = np.column_stack([dw_dI, dw_dE])
    # (I, J) as a function of (I, E): dJ/dI = -theta_lift / 2 pi, dJ/dE = T / 2 pi
    dA = np.array([[1.0, 0.0], [-d0.theta_lift / (2 * np.pi), d0.T / (2 * np.pi)]])
    return dw_dIE @ np.linalg.inv(dA), d0


@dataclass
class NondegeneracyScan:
    """Grid of ``det d omega / d(I, J)``; skipped points hold ``nan``."""

    I: np.ndarray
    E: np.ndarray
    det: np.ndarray
    data: list
    skipped: list = field(default_factory=list)

    @property
    def min_abs_det(self):
        return float(np.nanmin(np.abs(self.det)))

    @property
    def argmin(self):
        i, j = np.unravel_index(np.nanargmin(np.abs(self.det)), self.det.shape)
        return float(self.I[i]), float(self.E[j])


def nondegeneracy_scan(I_range, E_range, shape=(40, 40), h=1e-4, skip_singular=False):
    """Minimum of ``|det d omega / d(I, J)|`` over a grid of the rectangle.

    Grid points whose difference stencil leaves the Regular set raise a
    DomainError listing them, or with ``skip_singular`` are left out and
    recorded in ``skipped``.
    """
    Is = np.linspace(I_range[0], I_range[1], shape[0])
    Es = np.linspace(E_range[0], E_range[1], shape[1])
    bad = []
    for I in Is:
        for E in Es:
            for dI, dE in ((0, 0), (h, 0), (-h, 0), (0, h), (0, -h)):
                if classify((I + dI, E + dE)) is not ValueClass.REGULAR:
                    bad.append((float(I), float(E)))
                    break
    if bad and not skip_singular:
        raise DomainError(f"{len(bad)} grid points are not Regular: {bad[:10]}")
    skip = set(bad)
    det = np.full(shape, np.nan)
    data = []
    for a, I in enumerate(Is):
        for b, E in enumerate(Es):
            if (float(I), float(E)) in skip:
                data.append(None)
                continue
            jac, d = frequency_jacobian((I, E), h)
            det[a, b] = np.linalg.det(jac)
            data.append(d)
    if np.all(np.isnan(det)):
        raise DomainError("no Regular grid points in the scan region")
    return NondegeneracyScan(Is, Es, det, data, bad)


# ---------------------------------------------------------------------------
# integrable torus embedding
# ---------------------------------------------------------------------------


def _periodic_antiderivative(coef, k):
    """Fourier coefficients of the zero-at-0 antiderivative of the
    non-constant part of a series."""
    out = np.zeros_like(coef)
    nz = k != 0
    out[nz] = coef[nz] / (1j * k[nz])
    return out


def _series_eval(coef, k, u):
    return (np.exp(1j * np.outer(u, k)) @ coef).real


def integrable_embedding(v, N=64, residual_target=1e-8, M=None):
    """Embedding ``K0 : T^2 -> R^6`` of the unperturbed torus at ``v``.

    theta1 is the reduced phase normalized by the z-period with theta1 = 0 at
    z = z1; theta2 is the azimuth corrected by the rotation drift with
    theta2 = 0 at azimuth 0 when theta1 = 0.
    """
    if N < 32 or N & (N - 1):
        raise ValueError("N must be a power of two >= 32")
    v = _regular(v)
    I, E = v
    if abs(I) <= AXIS_TOL:
        raise DomainError("the planar axis I = 0 has no embedding in azimuthal coordinates")
    r = reduced_roots(v)
    z1, z2, z3 = r.roots
    c, d = 0.5 * (z1 + z2), 0.5 * (z2 - z1)

    M = M or max(8 * N, 512)
    while True:
        u = 2.0 * np.pi * np.arange(M) / M
        cosu = np.cos(u)
        g = 1.0 / np.sqrt(2.0 * ((z3 - c) + d * cosu))       # dt/du
        A = (1.0 + z1) + d * (1.0 - cosu)
        B = (1.0 - z2) + d * (1.0 + cosu)
        hphi = I * g / (A * B)                                 # dphi/du
        gh = np.fft.fft(g) / M
        hh = np.fft.fft(hphi) / M
        tail = max(np.abs(gh[M // 2 - 8: M // 2 + 8]).max() / abs(gh[0]),
                   np.abs(hh[M // 2 - 8: M // 2 + 8]).max() / abs(hh[0]))
        if tail < 1e-15 or M >= 2**16:
            break
        M *= 2
    k = np.fft.fftfreq(M, d=1.0 / M)
    T = 2.0 * np.pi * gh[0].real
    lift = 2.0 * np.pi * hh[0].real
    theta = float(np.mod(lift, 2.0 * np.pi))
    m = int(round((theta - lift) / (2.0 * np.pi)))
    omega1, omega2 = 2.0 * np.pi / T, theta / T
    tg = _periodic_antiderivative(gh, k)
    th = _periodic_antiderivative(hh, k)
    tg0, th0 = tg.sum().real, th.sum().real

    def t_of_u(uu):
        return T / (2 * np.pi) * uu + _series_eval(tg, k, uu) - tg0

    def phi_of_u(uu):
        return lift / (2 * np.pi) * uu + _series_eval(th, k, uu) - th0

    # invert omega1 * t(u) = theta1 by Newton
    theta1 = 2.0 * np.pi * np.arange(N) / N
    uu = theta1.copy()
    for _ in range(60):
        resid = omega1 * t_of_u(uu) - theta1
        gu = 1.0 / np.sqrt(2.0 * ((z3 - c) + d * np.cos(uu)))
        step = resid / (omega1 * gu)
        uu -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    zz = c - d * np.cos(uu)
    rate = np.sqrt(2.0 * ((z3 - c) + d * np.cos(uu)))          # du/dt
    zdot = d * np.sin(uu) * rate
    Au = (1.0 + z1) + d * (1.0 - np.cos(uu))
    Bu = (1.0 - z2) + d * (1.0 + np.cos(uu))
    pz = zdot / (Au * Bu)
    phi_hat = phi_of_u(uu) - omega2 * t_of_u(uu) + m * theta1

    t1, t2 = angle_grid(N)
    Z = np.broadcast_to(zz[:, None], (N, N))
    PZ = np.broadcast_to(pz[:, None], (N, N))
    PHI = t2 - m * t1 + phi_hat[:, None]
    values = spherical_to_cartesian(Z, PHI, PZ, np.full((N, N), I))
    K = TorusEmbedding.from_grid(values, (omega1, omega2), winding=m,
                                 meta={"I": float(I), "E": float(E), "T": float(T),
                                       "theta_lift": float(lift)})
    from .kam import invariance_residual  # local import: kam depends on this module
    from .geometry import HamiltonianSpec
    res = invariance_residual(K, K.omega, HamiltonianSpec())
    K.meta["residual"] = res
    if res > residual_target:
        raise DomainError(
            f"embedding residual {res:.2e} exceeds {residual_target:.0e} at N = {N}; "
            f"try N = {2 * N}")
    return K


def translate_on_torus(K, c):
    """``theta -> K(theta + c)``, exact on the Fourier coefficients."""
    return K.translate(np.asarray(c, dtype=float))
