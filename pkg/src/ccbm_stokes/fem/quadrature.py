"""Quadrature rules on the reference triangle and the unit segment.

Triangle rules live on ``{(xi, eta): xi, eta >= 0, xi + eta <= 1}`` with
weights summing to the reference area 1/2.
"""

from functools import lru_cache

import numpy as np


def _sym(weights_orbits):
    pts, wts = [], []
    for w, orbit in weights_orbits:
        for p in orbit:
            pts.append(p)
            wts.append(w)
    return np.array(pts, float), 0.5 * np.array(wts, float)


def _s21(a, w):
    b = 1.0 - 2.0 * a
    return w, [(a, a), (b, a), (a, b)]


# Dunavant degree 4, 6 points
_D4 = _sym([
    _s21(0.445948490915965, 0.223381589678011),
    _s21(0.091576213509771, 0.109951743655322),
])

# Dunavant degree 5, 7 points
_D5 = _sym([
    (0.225, [(1.0 / 3.0, 1.0 / 3.0)]),
    _s21(0.470142064105115, 0.132394152788506),
    _s21(0.101286507323456, 0.125939180544827),
])


@lru_cache(maxsize=None)
def _collapsed(n):
    """Conical product Gauss rule, exact for degree ``2n - 2``."""
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu)
    xi = uu
    eta = vv * (1.0 - uu)
    weights = ww * (1.0 - uu)
    return np.stack([xi.ravel(), eta.ravel()], axis=1), weights.ravel()


def triangle_rule(degree: int):
    """Points ``(nq, 2)`` and weights ``(nq,)`` exact up to ``degree``."""
    if degree <= 4:
        return _D4
    if degree == 5:
        return _D5
    return _collapsed((degree + 3) // 2)


@lru_cache(maxsize=None)
def segment_rule(degree: int):
    """Gauss-Legendre on ``[0, 1]`` exact up to ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
