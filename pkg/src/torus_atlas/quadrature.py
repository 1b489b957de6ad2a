"""Globally adaptive Gauss-Kronrod (7/15) quadrature for vector integrands."""
from __future__ import annotations

import heapq

import numpy as np

from .errors import QuadratureError

# Kronrod abscissae in [0, 1) and the matching weights (QUADPACK qk15)
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# Gauss weights live on the odd Kronrod nodes
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]
GAUSS_WEIGHTS[7] = _WG[3]


def gk15(fun, a, b):
    """One Gauss-Kronrod panel; returns ``(kronrod, |kronrod - gauss|)``."""
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * NODES
    fx = np.asarray(fun(x), dtype=float)
    if fx.ndim == 1:
        fx = fx[None, :]
    k = half * (fx @ KRONROD_WEIGHTS)
    g = half * (fx @ GAUSS_WEIGHTS)
    return k, np.abs(k - g)


def integrate(fun, a, b, epsabs=1e-13, epsrel=1e-13, limit=2000):
    """Integrate a vector-valued ``fun`` over ``[a, b]``.

    ``fun`` takes a 1-d array of abscissae and returns either a 1-d array of
    values or an ``(m, n)`` array holding ``m`` integrands.  Refinement
    bisects the panel with the largest weighted error until every component
    meets ``max(epsabs, epsrel * |I|)``.

    Returns ``(values, errors, n_panels)``.
    """
    k, e = gk15(fun, a, b)
    heap = [(-float(np.sum(e)), 0, a, b, k, e)]
    total = k.copy()
    error = e.copy()
    counter = 1
    while True:
        tol = np.maximum(epsabs, epsrel * np.abs(total))
        if np.all(error <= tol):
            return total, error, len(heap)
        if len(heap) >= limit:
            raise QuadratureError(
                f"quadrature budget of {limit} panels exhausted; error {error.max():.2e}")
        _, _, lo, hi, k, e = heapq.heappop(heap)
        total -= k
        error -= e
        mid = 0.5 * (lo + hi)
        for left, right in ((lo, mid), (mid, hi)):
            kk, ee = gk15(fun, left, right)
            total += kk
            error += ee
            heapq.heappush(heap, (-float(np.sum(ee / tol)), counter, left, right, kk, ee))
            counter += 1
