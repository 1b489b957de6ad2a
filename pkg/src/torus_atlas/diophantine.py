"""Diophantine frequency sets, shrunken frequency domains and measure estimates.

A frequency ``omega`` in R^2 is accepted when

    |<omega, k>| |k|^tau >= gamma    for all 0 < |k|_inf <= k_max,

with ``|k| = |k1| + |k2|``.  For fixed ``k2`` the scaled divisor
``|k1 a + k2 b| (|k1| + |k2|)^tau`` (``a`` the larger frequency component) is
quasi-concave in ``k1`` on each side of the resonance ``k1 = -k2 b / a``, so
its minimum over ``k1`` sits at ``k1 = 0`` or at one of the two integers
bracketing the resonance.  Three candidates per ``k2`` therefore give the
exact minimum over the whole box.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import Polygon, box

from .errors import DomainError, EmptyDomainError

__all__ = [
    "DiophantineParams",
    "FrequencyDomain",
    "ChartLabels",
    "MeasureEstimate",
    "scaled_divisor_margin",
    "is_diophantine",
    "shrink_domain",
    "chart_domain",
    "label_value",
    "diophantine_set_in_chart",
    "measure_estimate",
    "ray_check",
    "continued_fraction",
    "convergents",
    "cf_certificate",
    "nearby_resonance",
]


@dataclass(frozen=True)
class DiophantineParams:
    """Parameters of ``D_gamma``.

    ``gamma_tilde`` is the boundary shrink of the frequency domain; ``None``
    means ``gamma_tilde = gamma``.
    """

    gamma: float
    tau: float = 1.5
    k_max: int = 200
    gamma_tilde: float | None = None

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not self.tau > 1:
            raise ValueError("tau must exceed n - 1 = 1")
        if self.k_max < 10:
            raise ValueError("k_max must be at least 10")
        if self.gamma_tilde is not None and not self.gamma_tilde >= 0:
            raise ValueError("gamma_tilde must be non-negative")

    @property
    def shrink(self):
        return self.gamma if self.gamma_tilde is None else self.gamma_tilde


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def _scaled_divisors(omegas, tau, k_max):
    """Minimum of ``|<omega,k>| |k|^tau`` over the box and the minimizing k."""
    w = np.atleast_2d(np.asarray(omegas, dtype=float))
    swap = np.abs(w[:, 1]) > np.abs(w[:, 0])
    a = np.where(swap, w[:, 1], w[:, 0])
    b = np.where(swap, w[:, 0], w[:, 1])
    k2 = np.arange(1, k_max + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = -k2[None, :] * (b / a)[:, None]
    x = np.where(np.isfinite(x), x, 0.0)
    cand = np.stack([np.zeros_like(x), np.floor(x), np.ceil(x)], axis=-1)
    cand = np.clip(cand, -k_max, k_max)
    val = np.abs(cand * a[:, None, None] + k2[None, :, None] * b[:, None, None])
    val = val * (np.abs(cand) + k2[None, :, None]) ** tau
    flat = val.reshape(len(w), -1)
    idx = np.argmin(flat, axis=1)
    best = flat[np.arange(len(w)), idx]
    j, c = np.divmod(idx, 3)
    k1 = cand[np.arange(len(w)), j, c]
    kk2 = k2[j]
    # k = (1, 0) along the larger component
    edge = np.abs(a) < best
    best = np.where(edge, np.abs(a), best)
    k1 = np.where(edge, 1.0, k1)
    kk2 = np.where(edge, 0.0, kk2)
    ka = np.stack([k1, kk2], axis=-1)
    k = np.where(swap[:, None], ka[:, ::-1], ka).astype(np.int64)
    return best, k


def scaled_divisor_margin(omegas, params, chunk=2048):
    """Vectorized margins ``min_k |<omega,k>| |k|^tau - gamma`` and minimizers.

    Parameters
    ----------
    omegas : array_like, shape (m, 2) or (2,)
    params : DiophantineParams

    Returns
    -------
    margin : ndarray (m,)
    k : ndarray (m, 2) of int
    """
    w = np.atleast_2d(np.asarray(omegas, dtype=float))
    margins = np.empty(len(w))
    ks = np.empty((len(w), 2), dtype=np.int64)
    for s in range(0, len(w), chunk):
        best, k = _scaled_divisors(w[s:s + chunk], params.tau, params.k_max)
        margins[s:s + chunk] = best - params.gamma
        ks[s:s + chunk] = k
    return margins, ks


def is_diophantine(omega, params):
    """Truncation-certified Diophantine verdict.

    Checks every ``0 < |k|_inf <= k_max``; larger ``k`` can only violate the
    condition where ``|<omega,k>| < gamma k_max^-tau``.

    Returns
    -------
    (accepted, margin)
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (2,) or not np.all(np.isfinite(omega)):
        raise ValueError("omega must be a finite 2-vector")
    margin, _ = scaled_divisor_margin(omega, params)
    return bool(margin[0] >= 0.0), float(margin[0])


def ray_check(omega, params, s_values):
    """True iff ``s omega`` is accepted for every listed ``s >= 1``."""
    ok, _ = is_diophantine(omega, params)
    if not ok:
        raise DomainError("ray_check needs a Diophantine omega")
    s_values = np.asarray(s_values, dtype=float)
    if np.any(s_values < 1.0):
        raise ValueError("ray scalings must satisfy s >= 1")
    scaled = s_values[:, None] * np.asarray(omega, float)[None, :]
    margins, _ = scaled_divisor_margin(scaled, params)
    return bool(np.all(margins >= 0.0))


# ---------------------------------------------------------------------------
# continued fractions
# ---------------------------------------------------------------------------


def continued_fraction(x, depth=40, tol=1e-13):
    """Partial quotients of ``x``, stopping once the remainder is round-off."""
    x = float(x)
    out = []
    for _ in range(depth):
        a = int(np.floor(x))
        out.append(a)
        frac = x - a
        if frac < tol:
            break
        x = 1.0 / frac
    return out


def convergents(x, depth=40):
    """Convergents ``(p_n, q_n)`` of ``x``."""
    p0, q0, p_prev, q_prev = 1, 0, 0, 1
    out = []
    for a in continued_fraction(x, depth):
        p, q = a * p0 + p_prev, a * q0 + q_prev
        p_prev, q_prev, p0, q0 = p0, q0, p, q
        out.append((p, q))
    return out


def cf_certificate(omega, params, depth=40, q_cap=10**6):
    """Lower bound of ``|<omega,k>| |k|^tau`` from continued fractions.

    With ``alpha`` the ratio of the smaller to the larger component and
    ``q_n`` its convergent denominators, best approximation gives
    ``|k1 + k2 alpha| >= |q_n alpha - p_n|`` whenever ``q_n <= |k2| < q_{n+1}``,
    with ``k1`` unrestricted.

    Returns
    -------
    bound : float
        Valid for every ``k`` whose coordinate along the smaller component
        is below ``k2_limit``.
    k2_limit : int

    Denominators above ``q_cap`` are dropped so that ``|q alpha - p|`` stays
    well above the round-off of ``alpha``.
    """
    w = np.asarray(omega, dtype=float)
    i = int(np.abs(w[1]) > np.abs(w[0]))
    a, b = abs(w[i]), abs(w[1 - i])
    if a == 0.0:
        return 0.0, 1
    alpha = b / a
    bound = a  # k along the larger component only
    conv = [pq for pq in convergents(alpha, depth) if pq[1] <= q_cap]
    for p, q in conv[:-1]:
        if q == 0:
            continue
        dist = abs(q * alpha - p)
        bound = min(bound, a * dist * q**params.tau)
    k2_limit = conv[-1][1] if len(conv) > 1 else 1
    return float(bound), int(k2_limit)


def nearby_resonance(omega, params, depth=40):
    """Exactly resonant frequency within ``2 gamma`` of ``omega``.

    Projects ``omega`` onto the line ``<w, k> = 0`` for the first convergent
    direction ``k = (p, -q)`` close enough to ``omega``.

    Returns
    -------
    (omega_res, k)
    """
    w = np.asarray(omega, dtype=float)
    if params.gamma <= 0:
        raise ValueError("a resonance within 2 gamma needs gamma > 0")
    i = int(np.abs(w[1]) > np.abs(w[0]))
    a, b = w[i], w[1 - i]
    alpha = b / a
    for p, q in convergents(alpha, depth):
        k = np.zeros(2)
        # <w, k> = a p - b q is small since alpha ~ p / q
        k[i], k[1 - i] = p, -q
        dot = float(k @ w)
        dist = abs(dot) / float(np.hypot(p, q))
        if q > 0 and dist <= 2.0 * params.gamma:
            w_res = w - dot * k / float(k @ k)
            return w_res, k.astype(np.int64)
    raise DomainError("no convergent close enough; increase depth")


# ---------------------------------------------------------------------------
# frequency domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyDomain:
    """Polygonal representation of a region of frequency space."""

    polygon: Polygon

    @classmethod
    def from_points(cls, boundary):
        poly = Polygon(np.asarray(boundary, dtype=float))
        if not poly.is_valid:
            poly = shapely.make_valid(poly)
        return cls(poly)

    @classmethod
    def from_box(cls, lo, hi):
        return cls(box(lo[0], lo[1], hi[0], hi[1]))

    @property
    def area(self):
        return float(self.polygon.area)

    @property
    def empty(self):
        return bool(self.polygon.is_empty or self.polygon.area == 0.0)

    @property
    def bounds(self):
        return self.polygon.bounds

    def contains(self, omegas):
        w = np.atleast_2d(np.asarray(omegas, dtype=float))
        return shapely.contains_xy(self.polygon, w[:, 0], w[:, 1])

    def boundary(self):
        """Exterior boundary vertices, shape (n, 2)."""
        if self.empty:
            return np.empty((0, 2))
        geom = self.polygon
        if geom.geom_type != "Polygon":
            geom = max(geom.geoms, key=lambda g: g.area)
        return np.asarray(geom.exterior.coords)


def shrink_domain(domain, gamma_tilde):
    """``{omega in Gamma : dist(omega, boundary) >= gamma_tilde}``.

    Raises EmptyDomainError when nothing survives.
    """
    if not gamma_tilde >= 0:
        raise ValueError("gamma_tilde must be non-negative")
    if gamma_tilde == 0:
        return domain
    out = FrequencyDomain(domain.polygon.buffer(-float(gamma_tilde), join_style="mitre"))
    if out.empty:
        raise EmptyDomainError(f"frequency domain is empty after shrinking by {gamma_tilde:g}")
    return out


@functools.lru_cache(maxsize=64)
def chart_domain(chart, n=64):
    """``Gamma = omega(A)`` for a chart, from its value-window boundary."""
    from .action_angle import _rectangle_boundary, frequency_map
    pts = _rectangle_boundary(chart.I_range, chart.E_range, n)
    return FrequencyDomain.from_points([tuple(frequency_map(tuple(v))) for v in pts])


# ---------------------------------------------------------------------------
# labels over a chart
# ---------------------------------------------------------------------------


@dataclass
class ChartLabels:
    """Cell-centred value grid of a chart with ``D_gamma(A_gamma)`` labels."""

    chart: object
    params: DiophantineParams
    shape: tuple
    values: np.ndarray
    actions: np.ndarray
    omegas: np.ndarray
    margins: np.ndarray
    inside: np.ndarray

    @property
    def fraction(self):
        return float(np.mean(self.inside))


def _chart_grid(chart, shape):
    n, m = shape
    I = chart.I_range[0] + (np.arange(n) + 0.5) * (chart.I_range[1] - chart.I_range[0]) / n
    E = chart.E_range[0] + (np.arange(m) + 0.5) * (chart.E_range[1] - chart.E_range[0]) / m
    II, EE = np.meshgrid(I, E, indexing="ij")
    return np.stack([II.ravel(), EE.ravel()], axis=-1)


def label_value(chart, v, params, domain=None):
    """Whether ``v`` lies in ``D_gamma(A_gamma)`` of the chart.

    Returns
    -------
    (accepted, omega)
    """
    from .action_angle import frequency_map
    if not chart.contains(v):
        return False, None
    omega = np.asarray(frequency_map(tuple(v)), dtype=float)
    dom = domain if domain is not None else chart_domain(chart)
    try:
        shrunk = shrink_domain(dom, params.shrink)
    except EmptyDomainError:
        return False, omega
    if not shrunk.contains(omega)[0]:
        return False, omega
    return is_diophantine(omega, params)[0], omega


def diophantine_set_in_chart(chart, params, shape=(10, 10), domain=None):
    """Label a cell-centred value grid of the chart.

    A grid point is in when its frequency lies in the shrunken domain
    ``Gamma_gamma_tilde`` and passes ``is_diophantine``.
    """
    from .action_angle import action_angle_data
    pts = _chart_grid(chart, shape)
    data = [action_angle_data(tuple(v)) for v in pts]
    omegas = np.array([d.omega for d in data])
    actions = np.array([[d.I, d.J] for d in data])
    margins, _ = scaled_divisor_margin(omegas, params)
    dom = domain if domain is not None else chart_domain(chart)
    try:
        inside = shrink_domain(dom, params.shrink).contains(omegas)
    except EmptyDomainError:
        inside = np.zeros(len(pts), dtype=bool)
    inside = inside & (margins >= 0.0)
    return ChartLabels(chart, params, tuple(shape), pts, actions, omegas, margins, inside)


# ---------------------------------------------------------------------------
# Monte Carlo measure
# ---------------------------------------------------------------------------


@dataclass
class MeasureEstimate:
    fraction: float
    stderr: float
    samples: int
    seed: int
    omegas: np.ndarray
    accepted: np.ndarray
    margins: np.ndarray


def _stream(seed, index):
    return np.random.Generator(np.random.Philox(key=int(seed)).jumped(int(index)))


def measure_estimate(domain, params, samples=10_000, seed=0, chunk=4096):
    """Fraction of ``Gamma`` occupied by ``D_gamma(Gamma_gamma_tilde)``.

    Points are drawn uniformly in ``Gamma`` by rejection from its bounding
    box.  Chunk ``c`` of box draws uses the Philox stream ``seed`` jumped
    ``c`` times, so results do not depend on how chunks are scheduled.
    """
    if samples < 1000:
        raise ValueError("measure_estimate needs at least 1000 samples")
    if domain.empty:
        raise EmptyDomainError("empty frequency domain")
    x0, y0, x1, y1 = domain.bounds
    got, c = [], 0
    n = 0
    while n < samples:
        rng = _stream(seed, c)
        pts = rng.uniform((x0, y0), (x1, y1), size=(chunk, 2))
        pts = pts[domain.contains(pts)]
        got.append(pts)
        n += len(pts)
        c += 1
        if c > 10_000:
            raise EmptyDomainError("rejection sampling found no interior points")
    omegas = np.concatenate(got)[:samples]
    margins, _ = scaled_divisor_margin(omegas, params)
    try:
        inner = shrink_domain(domain, params.shrink).contains(omegas)
    except EmptyDomainError:
        inner = np.zeros(samples, dtype=bool)
    accepted = inner & (margins >= 0.0)
    f = float(np.mean(accepted))
    se = float(np.sqrt(max(f * (1.0 - f), 0.0) / samples))
    return MeasureEstimate(f, se, int(samples), int(seed), omegas, accepted, margins)
