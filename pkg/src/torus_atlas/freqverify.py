"""Frequency extraction from sampled trajectories.

Each component is located on a zero-padded FFT of the Hann^p-windowed
residual, refined by maximizing the modulus of the windowed discrete-time
Fourier transform with Brent's method, and then removed together with all
earlier components by a windowed least-squares fit.  A final sweep refines
every frequency against the residual with the others subtracted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import HamiltonianSpec, integrate

__all__ = [
    "FrequencyEstimate",
    "OBSERVABLES",
    "extract_frequencies",
    "extract_from_signal",
    "turning_point",
    "trajectory_frequencies",
]

MIN_SAMPLES = 2**12

OBSERVABLES = {
    "q1": lambda s: s[:, 0],
    "q2": lambda s: s[:, 1],
    "q3": lambda s: s[:, 2],
    "z": lambda s: s[:, 2],
    "p1": lambda s: s[:, 3],
    "p2": lambda s: s[:, 4],
    "p3": lambda s: s[:, 5],
    "xy": lambda s: s[:, 0] + 1j * s[:, 1],
}


@dataclass
class FrequencyEstimate:
    """Extracted ``(frequency, amplitude)`` pairs sorted by amplitude.

    ``error`` is the largest change of the leading frequencies between the
    full window and its second half; ``flagged`` marks an empty estimate.
    """

    frequencies: list
    window_length: float
    error: float
    flagged: bool = False
    amplitudes_complex: list = field(default_factory=list, repr=False)

    @property
    def values(self):
        return np.array([f for f, _ in self.frequencies])

    @property
    def dominant(self):
        if self.flagged:
            raise ValueError("empty frequency estimate")
        return self.frequencies[0][0]


def _window(n, power):
    x = np.arange(n) / (n - 1)
    return (0.5 * (1.0 - np.cos(2.0 * np.pi * x))) ** power


class _Fitter:
    def __init__(self, t, x, power):
        self.t = t - t[0]
        self.x = x
        self.real = not np.iscomplexobj(x)
        self.w = _window(len(t), power)
        self.wsum = self.w.sum()
        self.dt = t[1] - t[0]

    def basis(self, nus):
        cols = []
        for nu in nus:
            if self.real:
                cols += [np.cos(nu * self.t), np.sin(nu * self.t)]
            else:
                cols.append(np.exp(1j * nu * self.t))
        return np.stack(cols, axis=-1)

    def fit(self, nus):
        """Windowed least squares onto constant plus the given exponentials."""
        B = np.concatenate([np.ones((len(self.t), 1)), self.basis(nus)], axis=-1) if len(nus) else \
            np.ones((len(self.t), 1))
        sw = np.sqrt(self.w)[:, None]
        coef, *_ = np.linalg.lstsq(B * sw, self.x * sw[:, 0], rcond=None)
        return coef, self.x - B @ coef

    def amplitude(self, nu, r):
        return np.abs(np.sum(self.w * r * np.exp(-1j * nu * self.t))) / self.wsum

    def peak(self, r, exclude=()):
        n = len(r)
        pad = 4 * int(2 ** np.ceil(np.log2(n)))
        spec = np.abs(np.fft.fft(self.w * r, pad))
        nu = 2.0 * np.pi * np.fft.fftfreq(pad, d=self.dt)
        if self.real:
            spec = spec[nu >= 0]
            nu = nu[nu >= 0]
        d = nu[1] - nu[0] if len(nu) > 1 else 1.0
        # keep away from already resolved lines
        for e in exclude:
            spec[np.abs(nu - e) < 4.0 * 2.0 * np.pi / (n * self.dt)] = 0.0
        i = int(np.argmax(spec))
        return nu[i], abs(d)

    def refine(self, nu0, r, width):
        res = minimize_scalar(lambda nu: -self.amplitude(nu, r), bounds=(nu0 - width, nu0 + width),
                              method="bounded", options={"xatol": 1e-13, "maxiter": 200})
        return float(res.x)


def extract_from_signal(t, x, n_freq=2, window_power=2, rel_threshold=1e-6, sweeps=2):
    """Frequencies of a uniformly sampled real or complex signal.

    Parameters
    ----------
    t, x : array_like
        Uniform sample times and signal values.
    n_freq : int
        Number of components to extract.
    window_power : int
        Exponent ``p`` of the Hann^p window.
    rel_threshold : float
        Components with amplitude below ``rel_threshold`` times the RMS of
        the mean-free signal are treated as noise.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x)
    if len(t) < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {len(t)}")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * abs(dt[0]):
        raise ValueError("samples must be uniform in time")
    f = _Fitter(t, x, window_power)
    _, r = f.fit([])
    scale = np.sqrt(np.mean(np.abs(r) ** 2))
    span = t[-1] - t[0]
    if scale <= 1e-14 * max(1.0, np.max(np.abs(x))):
        return FrequencyEstimate([], span, np.inf, True)
    nus = []
    for _ in range(n_freq):
        nu0, d = f.peak(r, nus)
        nu = f.refine(nu0, r, 2.0 * d)
        if f.amplitude(nu, r) < rel_threshold * scale:
            break
        nus.append(nu)
        _, r = f.fit(nus)
    if not nus:
        return FrequencyEstimate([], span, np.inf, True)
    for _ in range(sweeps):
        for j in range(len(nus)):
            others = nus[:j] + nus[j + 1:]
            _, rj = f.fit(others)
            nus[j] = f.refine(nus[j], rj, 2.0 * np.pi / span)
    coef, _ = f.fit(nus)
    amps = []
    for j in range(len(nus)):
        if f.real:
            c, s = coef[1 + 2 * j], coef[2 + 2 * j]
            amps.append(complex(c, -s))
        else:
            amps.append(complex(coef[1 + j]))
    order = np.argsort([-abs(a) for a in amps], kind="stable")
    freqs = [(float(nus[i]), float(abs(amps[i]))) for i in order]
    return FrequencyEstimate(freqs, span, np.nan, False, [amps[i] for i in order])


def extract_frequencies(traj, observable="z", n_freq=2, window_power=2, error_estimate=True,
                        **kw):
    """Frequencies of an observable along a trajectory.

    ``observable`` is a key of ``OBSERVABLES`` or a callable on the
    ``(n, 6)`` state array.
    """
    sel = OBSERVABLES[observable] if isinstance(observable, str) else observable
    t = np.asarray(traj.times)
    x = sel(np.asarray(traj.states))
    est = extract_from_signal(t, x, n_freq, window_power, **kw)
    if est.flagged or not error_estimate:
        return est
    half = len(t) // 2
    if len(t) - half >= MIN_SAMPLES:
        other = extract_from_signal(t[half:], x[half:], len(est.frequencies), window_power, **kw)
        errs = [min(abs(f - g) for g in other.values) if len(other.values) else np.inf
                for f in est.values]
        est.error = float(max(errs))
    return est


def turning_point(v):
    """Phase point at ``z = z1`` with zero vertical velocity and azimuth 0."""
    from .errors import DomainError
    from .fibration import reduced_roots
    I, E = float(v[0]), float(v[1])
    z1 = reduced_roots((I, E)).z1
    rho = np.sqrt((1.0 - z1) * (1.0 + z1))
    if not rho > 0.0:
        raise DomainError(f"turning circle of {(I, E)} degenerates to the pole")
    return np.array([rho, 0.0, z1, 0.0, I / rho, 0.0])


def trajectory_frequencies(v, t_end=500.0, h=5e-3, dt_sample=0.05, spec=HamiltonianSpec()):
    """``(omega1, omega2)`` measured on an integrated trajectory.

    ``omega1`` is the dominant line of ``z``; the azimuthal signal
    ``q1 + i q2`` has lines at ``omega2 + k omega1`` and its dominant line
    reduced modulo ``omega1`` gives the principal ``omega2``.
    """
    every = max(1, int(round(dt_sample / h)))
    traj = integrate(turning_point(v), spec, t_end, h, sample_every=every)
    w1 = extract_frequencies(traj, "z", n_freq=1, error_estimate=False).dominant
    nu = extract_frequencies(traj, "xy", n_freq=1, error_estimate=False).dominant
    return np.array([w1, nu % w1])
