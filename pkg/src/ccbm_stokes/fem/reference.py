"""Lagrange basis functions on the reference triangle.

Local P2 numbering: vertices 0, 1, 2 then the midpoints of edges
(0, 1), (1, 2), (2, 0).
"""

import numpy as np

_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_EDGES = ((0, 1), (1, 2), (2, 0))


def barycentric(pts):
    pts = np.atleast_2d(pts)
    return np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=1)


def p1_values(pts):
    return barycentric(pts)


def p1_gradients(pts):
    """Reference gradients, shape ``(nq, 3, 2)``."""
    nq = len(np.atleast_2d(pts))
    return np.broadcast_to(_DLAMBDA, (nq, 3, 2)).copy()


def p2_values(pts):
    lam = barycentric(pts)
    vals = [lam[:, i] * (2.0 * lam[:, i] - 1.0) for i in range(3)]
    vals += [4.0 * lam[:, i] * lam[:, j] for i, j in _EDGES]
    return np.stack(vals, axis=1)


def p2_gradients(pts):
    """Reference gradients, shape ``(nq, 6, 2)``."""
    lam = barycentric(pts)
    grads = [(4.0 * lam[:, i] - 1.0)[:, None] * _DLAMBDA[i] for i in range(3)]
    grads += [4.0 * (lam[:, i][:, None] * _DLAMBDA[j] + lam[:, j][:, None] * _DLAMBDA[i])
              for i, j in _EDGES]
    return np.stack(grads, axis=1)


def p2_hessians(nq=1):
    """Constant reference Hessians, shape ``(nq, 6, 2, 2)``."""
    h = np.zeros((6, 2, 2))
    for i in range(3):
        h[i] = 4.0 * np.outer(_DLAMBDA[i], _DLAMBDA[i])
    for k, (i, j) in enumerate(_EDGES):
        h[3 + k] = 4.0 * (np.outer(_DLAMBDA[i], _DLAMBDA[j]) + np.outer(_DLAMBDA[j], _DLAMBDA[i]))
    return np.broadcast_to(h, (nq, 6, 2, 2)).copy()


def segment_p2(s):
    """P2 trace on an edge parametrised by ``s`` in [0, 1]: (start, end, midpoint)."""
    s = np.asarray(s, float)
    return np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)], axis=-1)


def segment_p2_derivative(s):
    s = np.asarray(s, float)
    return np.stack([4 * s - 3, 4 * s - 1, 4 - 8 * s], axis=-1)
