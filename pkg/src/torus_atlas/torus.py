"""Fourier representation of embedded 2-tori and spherical canonical coordinates.

Tori are stored as 2-d Fourier coefficients of their R^6 embedding on an
``N x N`` grid ``theta = 2 pi (i, j) / N``.  Nyquist modes are always zero so
that phase rotations keep real embeddings real.  Newton iterations work in
the cotangent lift of stereographic projection from the north pole, which
is canonical and regular along orbits passing close to the bottom pole.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TorusEmbedding",
    "wavenumbers",
    "angle_grid",
    "spherical_to_cartesian",
    "cartesian_to_spherical",
    "stereographic_to_cartesian",
    "cartesian_to_stereographic",
    "canonical_hamiltonian",
    "canonical_gradient",
    "canonical_field",
    "canonical_jacobian",
]


def wavenumbers(N):
    k = np.fft.fftfreq(N, d=1.0 / N)
    k[N // 2] = 0.0  # Nyquist is kept at zero
    return k


def angle_grid(N):
    th = 2.0 * np.pi * np.arange(N) / N
    return np.meshgrid(th, th, indexing="ij")


def _nyquist_mask(N):
    mask = np.ones((N, N), dtype=bool)
    mask[N // 2, :] = False
    mask[:, N // 2] = False
    return mask


@dataclass
class TorusEmbedding:
    """Map ``T^2 -> R^6`` with an attached frequency vector.

    Attributes
    ----------
    coeffs : complex array (6, N, N)
        ``numpy.fft.fft2`` of the grid values over axes ``(theta1, theta2)``.
    omega : array (2,)
        Frequency vector of the linear flow on the torus.
    winding : int
        Integer ``m`` such that the azimuth lifts to ``theta2 - m theta1 + periodic``.
    """

    coeffs: np.ndarray
    omega: np.ndarray
    winding: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.coeffs.shape[-1]

    @classmethod
    def from_grid(cls, values, omega, winding=0, meta=None):
        values = np.asarray(values, dtype=float)
        coeffs = np.fft.fft2(np.moveaxis(values, -1, 0), axes=(1, 2))
        coeffs *= _nyquist_mask(values.shape[0])
        return cls(coeffs, np.asarray(omega, dtype=float).copy(), int(winding), dict(meta or {}))

    def copy(self):
        return TorusEmbedding(self.coeffs.copy(), self.omega.copy(), self.winding, dict(self.meta))

    def grid_values(self):
        """Values on the angle grid, shape ``(N, N, 6)``."""
        return np.moveaxis(np.fft.ifft2(self.coeffs, axes=(1, 2)).real, 0, -1)

    def derivative(self, direction=None):
        """Grid values of ``DK . direction`` (default: ``DK . omega``)."""
        d = self.omega if direction is None else np.asarray(direction, dtype=float)
        k = wavenumbers(self.N)
        symbol = 1j * (d[0] * k[:, None] + d[1] * k[None, :])
        return np.moveaxis(np.fft.ifft2(self.coeffs * symbol, axes=(1, 2)).real, 0, -1)

    def jacobian_grid(self):
        """``DK`` on the grid, shape ``(N, N, 6, 2)``."""
        return np.stack([self.derivative((1.0, 0.0)), self.derivative((0.0, 1.0))], axis=-1)

    def evaluate(self, theta):
        """Evaluate at arbitrary angles ``theta`` of shape ``(..., 2)``."""
        theta = np.asarray(theta, dtype=float)
        flat = theta.reshape(-1, 2)
        k = wavenumbers(self.N)
        e1 = np.exp(1j * np.outer(flat[:, 0], k))
        e2 = np.exp(1j * np.outer(flat[:, 1], k))
        vals = np.einsum("pk,ckl,pl->pc", e1, self.coeffs, e2).real / self.N**2
        return vals.reshape(theta.shape[:-1] + (6,))

    def evaluate_jacobian(self, theta):
        """``DK`` at arbitrary angles, shape ``(..., 6, 2)``."""
        theta = np.asarray(theta, dtype=float)
        flat = theta.reshape(-1, 2)
        k = wavenumbers(self.N)
        e1 = np.exp(1j * np.outer(flat[:, 0], k))
        e2 = np.exp(1j * np.outer(flat[:, 1], k))
        d1 = np.einsum("pk,ckl,pl->pc", e1 * (1j * k), self.coeffs, e2).real
        d2 = np.einsum("pk,ckl,pl->pc", e1, self.coeffs, e2 * (1j * k)).real
        jac = np.stack([d1, d2], axis=-1) / self.N**2
        return jac.reshape(theta.shape[:-1] + (6, 2))

    def translate(self, c):
        """Coefficients of ``theta -> K(theta + c)``."""
        k = wavenumbers(self.N)
        phase = np.exp(1j * (c[0] * k[:, None] + c[1] * k[None, :]))
        out = self.copy()
        out.coeffs = self.coeffs * phase
        return out

    def tail(self, width=2):
        """Largest coefficient among the outermost ``width`` retained orders,
        relative to the largest coefficient overall."""
        k = np.abs(wavenumbers(self.N))
        kmax = np.maximum(k[:, None], k[None, :])
        top = kmax >= (self.N // 2 - width)
        mag = np.abs(self.coeffs)
        return float(mag[:, top].max() / mag.max())

    def spherical_grid(self):
        """Canonical coordinates ``(z, phi_hat, p_z, p_phi)`` on the grid, with
        ``phi = theta2 - winding * theta1 + phi_hat``."""
        return cartesian_to_spherical(self.grid_values(), self.N, self.winding)

    @property
    def lift(self):
        """Average of the periodic azimuth lift; the normalization datum."""
        return float(self.spherical_grid()[..., 1].mean())


def spherical_to_cartesian(z, phi, pz, pphi):
    """R^6 point from canonical spherical coordinates (broadcasting)."""
    z, phi, pz, pphi = np.broadcast_arrays(z, phi, pz, pphi)
    rho2 = (1.0 - z) * (1.0 + z)
    rho = np.sqrt(rho2)
    c, s = np.cos(phi), np.sin(phi)
    out = np.empty(z.shape + (6,), dtype=np.result_type(z, phi, pz, pphi, float))
    out[..., 0] = rho * c
    out[..., 1] = rho * s
    out[..., 2] = z
    out[..., 3] = -z * rho * pz * c - (pphi / rho) * s
    out[..., 4] = -z * rho * pz * s + (pphi / rho) * c
    out[..., 5] = rho2 * pz
    return out


def cartesian_to_spherical(values, N=None, winding=0):
    """Canonical coordinates of R^6 points.

    With ``N`` given, ``values`` is an ``(N, N, 6)`` torus grid and the azimuth
    is returned as its periodic lift ``phi - theta2 + winding * theta1``
    (continuous, anchored in (-pi, pi] at the grid origin).  Otherwise the raw
    azimuth in (-pi, pi] is returned.
    """
    x = np.asarray(values, dtype=float)
    z = x[..., 2]
    rho2 = (1.0 - z) * (1.0 + z)
    phi = np.arctan2(x[..., 1], x[..., 0])
    pz = x[..., 5] / rho2
    pphi = x[..., 0] * x[..., 4] - x[..., 1] * x[..., 3]
    if N is not None:
        t1, t2 = angle_grid(N)
        phi = np.angle(np.exp(1j * (phi - t2 + winding * t1)))
        phi = np.unwrap(np.unwrap(phi, axis=0), axis=1)
        base = phi[0, 0] - np.angle(np.exp(1j * phi[0, 0]))
        phi -= 2.0 * np.pi * np.round(base / (2.0 * np.pi))
    return np.stack([z, phi, pz, pphi], axis=-1)


# ---------------------------------------------------------------------------
# stereographic canonical coordinates (x1, x2, y1, y2)
#
# q = (2 x1, 2 x2, |x|^2 - 1) / (1 + |x|^2) projects from the north pole, so
# the chart is regular at the bottom pole; y is the cotangent lift,
# y_i = <p, dq/dx_i>.  With s = 1 + |x|^2 the metric is (4 / s^2) delta and
# H = s^2 |y|^2 / 8 + 1 - 2 / s.
# ---------------------------------------------------------------------------


def stereographic_to_cartesian(y):
    """R^6 point from stereographic canonical coordinates ``(..., 4)``."""
    y = np.asarray(y)
    x1, x2, y1, y2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    s = 1.0 + x1 * x1 + x2 * x2
    out = np.empty(y.shape[:-1] + (6,), dtype=np.result_type(y, float))
    out[..., 0] = 2.0 * x1 / s
    out[..., 1] = 2.0 * x2 / s
    out[..., 2] = 1.0 - 2.0 / s
    # p = (s^2 / 4) sum_i y_i dq/dx_i
    xy = x1 * y1 + x2 * y2
    out[..., 3] = 0.5 * s * y1 - x1 * xy
    out[..., 4] = 0.5 * s * y2 - x2 * xy
    out[..., 5] = xy
    return out


def cartesian_to_stereographic(values):
    """Stereographic canonical coordinates of R^6 points (q3 < 1)."""
    x = np.asarray(values, dtype=float)
    q, p = x[..., :3], x[..., 3:]
    d = 1.0 - q[..., 2]
    x1, x2 = q[..., 0] / d, q[..., 1] / d
    s = 1.0 + x1 * x1 + x2 * x2
    # dq/dx_i = 2 e_i / s - 4 x_i (x1, x2, -1) / s^2 in the first two slots
    dot = x1 * p[..., 0] + x2 * p[..., 1] - p[..., 2]
    y1 = 2.0 * p[..., 0] / s - 4.0 * x1 * dot / s**2
    y2 = 2.0 * p[..., 1] / s - 4.0 * x2 * dot / s**2
    return np.stack([x1, x2, y1, y2], axis=-1)


def canonical_hamiltonian(y, eps=0.0, pid=1):
    x1, x2, y1, y2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    s = 1.0 + x1 * x1 + x2 * x2
    kin = s * s * (y1 * y1 + y2 * y2) / 8.0
    q3 = 1.0 - 2.0 / s
    h = kin + q3
    if eps:
        q1 = 2.0 * x1 / s
        h = h + eps * {1: q1, 2: q1 * q3, 3: q3 * kin}[pid]
    return h


def canonical_gradient(y, eps=0.0, pid=1):
    """``(H_x1, H_x2, H_y1, H_y2)``; works for complex arguments."""
    x1, x2, y1, y2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    s = 1.0 + x1 * x1 + x2 * x2
    yy = y1 * y1 + y2 * y2
    kin = s * s * yy / 8.0
    kin_x1, kin_x2 = 0.5 * s * x1 * yy, 0.5 * s * x2 * yy
    kin_y1, kin_y2 = 0.25 * s * s * y1, 0.25 * s * s * y2
    q3 = 1.0 - 2.0 / s
    q3_x1, q3_x2 = 4.0 * x1 / s**2, 4.0 * x2 / s**2
    g = [kin_x1 + q3_x1, kin_x2 + q3_x2, kin_y1, kin_y2]
    if eps:
        q1 = 2.0 * x1 / s
        q1_x1 = 2.0 / s - 4.0 * x1 * x1 / s**2
        q1_x2 = -4.0 * x1 * x2 / s**2
        if pid == 1:
            g[0] = g[0] + eps * q1_x1
            g[1] = g[1] + eps * q1_x2
        elif pid == 2:
            g[0] = g[0] + eps * (q3 * q1_x1 + q1 * q3_x1)
            g[1] = g[1] + eps * (q3 * q1_x2 + q1 * q3_x2)
        else:
            g[0] = g[0] + eps * (kin * q3_x1 + q3 * kin_x1)
            g[1] = g[1] + eps * (kin * q3_x2 + q3 * kin_x2)
            g[2] = g[2] + eps * q3 * kin_y1
            g[3] = g[3] + eps * q3 * kin_y2
    return np.stack(g, axis=-1)


def canonical_field(y, eps=0.0, pid=1):
    """Hamiltonian vector field ``(x', y') = (H_y, -H_x)``."""
    g = canonical_gradient(y, eps, pid)
    return np.stack([g[..., 2], g[..., 3], -g[..., 0], -g[..., 1]], axis=-1)


def canonical_jacobian(y, eps=0.0, pid=1, h=1e-30):
    """``D X`` by complex-step differentiation, shape ``(..., 4, 4)``."""
    y = np.asarray(y, dtype=float)
    cols = []
    for j in range(4):
        yc = y.astype(complex)
        yc[..., j] += 1j * h
        cols.append(canonical_field(yc, eps, pid).imag / h)
    return np.stack(cols, axis=-1)
