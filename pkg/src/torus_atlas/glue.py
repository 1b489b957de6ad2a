"""Partition of unity over charts and fibrewise gluing of local conjugacies.

Angles are compared in the canonical anchoring of the integrable torus
``K0`` at a value ``v``: chart ``j`` uses ``theta = alpha - phase_j``, and its
solved torus read in canonical angles is ``Kt_j(alpha) = K_j(alpha - phase_j)``,
so that ``Phi^j(K0(alpha)) = Kt_j(alpha)``.  Two charts sharing a torus satisfy
``Kt_j(alpha) = Kt_i(alpha + c)`` up to the deviation reported by
:func:`overlap_translation`, i.e. ``Psi^i = T_c o Psi^j`` on the torus.

Fibrewise, the convex combination ``Psi = sum_j xi^j Psi^j`` is the reference
chart's ``Psi^r`` followed by the translation ``-c_bar`` with
``c_bar = sum_j xi^j c_j`` (``c_r = 0``), whose inverse is

    Phi(K0(alpha)) = Kt_r(alpha + c_bar).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageGap, DomainError, OverlapMismatch
from .fibration import em_map
from .geometry import integrate_many, project

log = logging.getLogger(__name__)

__all__ = [
    "bump",
    "PartitionOfUnity",
    "build_partition",
    "TransitionMap",
    "invert_embedding",
    "overlap_translation",
    "GluedTorus",
    "GlobalConjugacy",
    "glue",
    "hausdorff_distance",
    "ConjugacyReport",
    "verify_global_conjugacy",
    "LEMMA_TOL",
]

LEMMA_TOL = 1e-6


# ---------------------------------------------------------------------------
# partition of unity
# ---------------------------------------------------------------------------


def bump(s):
    """``exp(-1 / (1 - s^2))`` on ``|s| < 1`` and zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass
class PartitionOfUnity:
    """Bumps on rectangles ``supports[j] = [[I_lo, I_hi], [E_lo, E_hi]]``
    normalized by their sum.  Weights depend on ``(I, E)`` only and are
    therefore constant on fibres."""

    charts: list
    supports: np.ndarray

    @property
    def ids(self):
        return [c.id for c in self.charts]

    def _scaled(self, values):
        v = np.atleast_2d(np.asarray(values, dtype=float))
        lo, hi = self.supports[:, :, 0], self.supports[:, :, 1]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return v, (v[:, None, :] - mid[None]) / half[None]

    def bumps(self, values):
        """Unnormalized product bumps, shape ``(n, n_charts)``."""
        _, s = self._scaled(values)
        return bump(s[..., 0]) * bump(s[..., 1])

    def log_bumps(self, values):
        """Logarithms of the bumps; ``-inf`` outside a support."""
        _, s = self._scaled(values)
        out = np.full(s.shape[:-1], -np.inf)
        inside = np.all(np.abs(s) < 1.0, axis=-1)
        s2 = s[inside] ** 2
        out[inside] = -1.0 / (1.0 - s2[:, 0]) - 1.0 / (1.0 - s2[:, 1])
        return out

    def __call__(self, values):
        """Weights ``xi^j`` at ``values``, shape ``(n, n_charts)``.

        Normalized in log space so that weights stay exact where the bumps
        themselves underflow near the support edges.
        """
        v, _ = self._scaled(values)
        L = self.log_bumps(v)
        top = L.max(axis=1)
        if np.any(~np.isfinite(top)):
            w = v[int(np.argmax(~np.isfinite(top)))]
            raise CoverageGap(f"no chart support covers ({w[0]:.6g}, {w[1]:.6g})",
                              witness=(float(w[0]), float(w[1])))
        e = np.exp(L - top[:, None])
        return e / e.sum(axis=1, keepdims=True)

    def weights(self, v):
        return dict(zip(self.ids, self(np.asarray(v, dtype=float)[None])[0].tolist()))

    def at_point(self, x):
        """Weights at a phase point, through the energy-momentum map."""
        return self.weights(tuple(em_map(x)))

    def reference(self, v):
        """Chart of largest weight; ties go to the smallest id."""
        w = self.weights(v)
        best = max(w.values())
        return min(i for i, x in w.items() if x == best)


def build_partition(cover, inset=0.05, region=None, n_check=64):
    """Partition of unity subordinate to the chart windows.

    Each support is the chart window inset by ``inset`` times its side
    lengths, a compact subset of the window interior.  When ``region``
    ``((I_lo, I_hi), (E_lo, E_hi))`` is given, coverage is checked on an
    ``n_check x n_check`` grid and a CoverageGap is raised with a witness.
    """
    if not cover:
        raise ValueError("empty cover")
    if not 0.0 < inset < 0.5:
        raise ValueError("inset must lie in (0, 0.5)")
    sup = []
    for c in cover:
        (a, b), (e0, e1) = c.I_range, c.E_range
        dI, dE = inset * (b - a), inset * (e1 - e0)
        sup.append([[a + dI, b - dI], [e0 + dE, e1 - dE]])
    pu = PartitionOfUnity(list(cover), np.asarray(sup, dtype=float))
    if region is not None:
        (a, b), (e0, e1) = region
        I, E = np.meshgrid(np.linspace(a, b, n_check), np.linspace(e0, e1, n_check), indexing="ij")
        pu(np.stack([I.ravel(), E.ravel()], axis=-1))
    return pu


# ---------------------------------------------------------------------------
# overlaps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionMap:
    """``alpha^j = S alpha^i + c`` between charts ``i`` and ``j``."""

    i: int
    j: int
    c: tuple
    deviation: float = 0.0
    S: tuple = ((1, 0), (0, 1))

    def __post_init__(self):
        if abs(round(np.linalg.det(np.asarray(self.S, dtype=float)))) != 1:
            raise ValueError("transition matrix must be unimodular")

    def as_dict(self):
        return {"i": self.i, "j": self.j, "S": [list(r) for r in self.S],
                "c": list(self.c), "deviation": self.deviation}


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def invert_embedding(K, x, guess, tol=1e-14, max_iter=30):
    """Angles ``beta`` with ``K(beta) = x`` by Gauss-Newton from ``guess``."""
    beta = np.array(guess, dtype=float).reshape(-1, 2)
    x = np.asarray(x, dtype=float).reshape(-1, 6)
    for _ in range(max_iter):
        r = x - K.evaluate(beta)
        D = K.evaluate_jacobian(beta)
        normal = np.einsum("pia,pib->pab", D, D)
        step = np.linalg.solve(normal, np.einsum("pia,pi->pa", D, r)[..., None])[..., 0]
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    return beta, float(np.max(np.linalg.norm(x - K.evaluate(beta), axis=-1)))


def overlap_translation(Ki, Kj, n=16, tol=LEMMA_TOL, i=None, j=None):
    """Translation ``c`` with ``Kj(alpha) = Ki(alpha + c)`` on a shared torus.

    Both embeddings are read in canonical angles.  The angle-difference
    field is sampled on an ``n x n`` grid and lifted near 0; ``c`` is its
    mean and the deviation its sup distance from ``c``.

    Returns
    -------
    (c, deviation)
    """
    if Ki is Kj or (i is not None and i == j):
        return np.zeros(2), 0.0
    th = 2.0 * np.pi * np.arange(n) / n
    alpha = np.stack(np.meshgrid(th, th, indexing="ij"), axis=-1).reshape(-1, 2)
    beta, miss = invert_embedding(Ki, Kj.evaluate(alpha), alpha)
    field_ = _wrap(beta - alpha)
    c = np.mean(field_, axis=0)
    dev = float(max(np.max(np.abs(field_ - c)), miss))
    if dev > tol:
        raise OverlapMismatch(f"overlap of charts {i} and {j} deviates from a translation by "
                              f"{dev:.2e} > {tol:.0e}")
    return c, dev


def hausdorff_distance(Ka, Kb, n=16):
    """Two-sided distance between two embedded tori, via projection of
    ``n x n`` samples of each onto the other."""
    th = 2.0 * np.pi * np.arange(n) / n
    alpha = np.stack(np.meshgrid(th, th, indexing="ij"), axis=-1).reshape(-1, 2)
    d = 0.0
    for A, B in ((Ka, Kb), (Kb, Ka)):
        x = A.evaluate(alpha)
        guess = alpha[np.argmin(np.linalg.norm(x[:, None, :] - B.evaluate(alpha)[None], axis=-1),
                                axis=1)]
        _, miss = invert_embedding(B, x, guess)
        d = max(d, miss)
    return d


# ---------------------------------------------------------------------------
# global conjugacy
# ---------------------------------------------------------------------------


@dataclass
class GluedTorus:
    value: tuple
    omega: np.ndarray
    weights: dict
    reference: int
    translations: dict
    deviations: dict
    c_bar: np.ndarray
    K0: object = field(repr=False)
    K_ref: object = field(repr=False)
    canonical: dict = field(repr=False, default_factory=dict)

    def __call__(self, alpha):
        """``Phi(K0(alpha))``, shape ``(..., 6)``."""
        alpha = np.asarray(alpha, dtype=float)
        return self.K_ref.evaluate(alpha + self.c_bar)

    def integrable(self, alpha):
        return self.K0.evaluate(np.asarray(alpha, dtype=float))


class GlobalConjugacy:
    """Partition-weighted combination of local conjugacies, evaluated per torus."""

    def __init__(self, locals_, partition, lemma_tol=LEMMA_TOL):
        self.locals = {lc.chart.id: lc for lc in locals_}
        missing = set(partition.ids) - set(self.locals)
        if missing:
            raise ValueError(f"no local conjugacy for charts {sorted(missing)}")
        self.partition = partition
        self.lemma_tol = lemma_tol
        self._tori = {}

    def canonical_torus(self, j, v):
        """Chart ``j``'s exactly solved torus at ``v`` in canonical angles."""
        lc = self.locals[j]
        st = lc.solve(v)
        return st, st.K.translate(-np.asarray(lc.chart.phase, dtype=float))

    def torus(self, v):
        """Glued conjugacy on the Diophantine torus at ``v``.

        Raises DomainError if some chart with positive weight does not
        accept ``v`` as a Diophantine value.
        """
        from .diophantine import label_value
        key = (float(v[0]), float(v[1]))
        if key in self._tori:
            return self._tori[key]
        w = {j: x for j, x in self.partition.weights(key).items() if x > 0.0}
        for j in w:
            lc = self.locals[j]
            ok, _ = label_value(lc.chart, key, lc.params)
            if not ok:
                raise DomainError(f"value {key} is not a Diophantine torus of chart {j}; the "
                                  "conjugacy is only defined on the Diophantine tori")
        ref = self.partition.reference(key)
        st_ref, K_ref = self.canonical_torus(ref, key)
        canon = {ref: K_ref}
        cs, devs = {ref: np.zeros(2)}, {ref: 0.0}
        for j in w:
            if j == ref:
                continue
            _, Kj = self.canonical_torus(j, key)
            canon[j] = Kj
            cs[j], devs[j] = overlap_translation(K_ref, Kj, tol=self.lemma_tol, i=ref, j=j)
        c_bar = sum(w[j] * cs[j] for j in w)
        K0 = self.locals[ref].seed(key).translate(-np.asarray(self.locals[ref].chart.phase))
        gt = GluedTorus(key, np.asarray(st_ref.omega), w, ref, cs, devs, np.asarray(c_bar),
                        K0, K_ref, canon)
        self._tori[key] = gt
        return gt

    def __call__(self, v, alpha):
        return self.torus(v)(alpha)

    def transitions(self, v):
        gt = self.torus(v)
        return [TransitionMap(gt.reference, j, tuple(map(float, gt.translations[j])),
                              float(gt.deviations[j]))
                for j in sorted(gt.translations) if j != gt.reference]


def glue(locals_, partition, lemma_tol=LEMMA_TOL):
    """Global conjugacy from local conjugacies and a partition of unity."""
    return GlobalConjugacy(locals_, partition, lemma_tol)


@dataclass
class ConjugacyReport:
    values: list
    defect: float
    identity_distance: float
    per_torus: list

    def as_dict(self):
        return {"values": [list(v) for v in self.values], "defect": self.defect,
                "identity_distance": self.identity_distance, "per_torus": self.per_torus}


def verify_global_conjugacy(gc, spec, values, n_points=4, t_end=50.0, h=1e-3, seed=0,
                            n_samples=200):
    """Flow-commutation defect of the glued conjugacy.

    For each torus and random ``alpha``, compares ``Phi(phi_H^t(K0(alpha)))
    = Phi(K0(alpha + omega t))`` with the perturbed flow of ``Phi(K0(alpha))``
    over ``[0, t_end]``.  Also reports ``sup |Phi(x) - x|`` over the samples.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    defect, ident, rows = 0.0, 0.0, []
    every = max(1, int(round(t_end / h / n_samples)))
    for v in values:
        gt = gc.torus(v)
        alpha = rng.uniform(0.0, 2.0 * np.pi, size=(n_points, 2))
        x0 = project(gt(alpha))
        times, states = integrate_many(x0, spec, t_end, h, sample_every=every)
        pred = gt(alpha[:, None, :] + gt.omega[None, None, :] * times[None, :, None])
        d = float(np.max(np.linalg.norm(states - pred, axis=-1)))
        th = 2.0 * np.pi * np.arange(16) / 16
        grid = np.stack(np.meshgrid(th, th, indexing="ij"), axis=-1).reshape(-1, 2)
        di = float(np.max(np.linalg.norm(gt(grid) - gt.integrable(grid), axis=-1)))
        defect, ident = max(defect, d), max(ident, di)
        rows.append({"I": v[0], "E": v[1], "reference": gt.reference,
                     "weights": {str(k): x for k, x in gt.weights.items()},
                     "c_bar": gt.c_bar.tolist(), "defect": d, "identity_distance": di})
    return ConjugacyReport([tuple(v) for v in values], defect, ident, rows)
