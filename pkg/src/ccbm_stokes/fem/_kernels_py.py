"""Vectorised NumPy element kernels (reference implementation and fallback)."""

import numpy as np


def affine_maps(nodes, tris):
    """Jacobians ``(T, 2, 2)``, determinants and inverse transposes."""
    p0 = nodes[tris[:, 0]]
    jac = np.stack([nodes[tris[:, 1]] - p0, nodes[tris[:, 2]] - p0], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)
    inv_t[:, 0, 0] = jac[:, 1, 1] / det
    inv_t[:, 0, 1] = -jac[:, 1, 0] / det
    inv_t[:, 1, 0] = -jac[:, 0, 1] / det
    inv_t[:, 1, 1] = jac[:, 0, 0] / det
    return jac, det, inv_t


def p2p1_element_matrices(nodes, tris, grad_ref, val_ref, p1_ref, qw):
    """Local Taylor-Hood blocks for every triangle.

    Returns ``(det, A, Bx, By, M2, M1)`` where ``A`` is the scalar P2
    stiffness, ``Bx``/``By`` hold ``-int lambda_k d(phi_a)/dx_i`` and
    ``M2``/``M1`` are the P2 and P1 mass matrices.
    """
    _, det, inv_t = affine_maps(nodes, tris)
    g = np.einsum("tij,qaj->tqai", inv_t, grad_ref)
    wdet = qw[None, :] * np.abs(det)[:, None]
    stiff = np.einsum("tq,tqai,tqbi->tab", wdet, g, g)
    bx = -np.einsum("tq,qk,tqa->tka", wdet, p1_ref, g[..., 0])
    by = -np.einsum("tq,qk,tqa->tka", wdet, p1_ref, g[..., 1])
    m2 = np.einsum("tq,qa,qb->tab", wdet, val_ref, val_ref)
    m1 = np.einsum("tq,qa,qb->tab", wdet, p1_ref, p1_ref)
    return det, stiff, bx, by, m2, m1


def p1_element_matrices(nodes, tris):
    """Exact P1 stiffness and mass matrices, each ``(T, 3, 3)``."""
    _, det, inv_t = affine_maps(nodes, tris)
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    g = np.einsum("tij,aj->tai", inv_t, dl)
    area = 0.5 * np.abs(det)
    stiff = area[:, None, None] * np.einsum("tai,tbi->tab", g, g)
    mass = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    return stiff, mass
