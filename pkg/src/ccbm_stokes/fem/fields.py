"""Finite-element field containers and pointwise evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels_py
from .reference import p1_values, p2_gradients, p2_values
from .spaces import FeSpacePair


@dataclass(frozen=True, eq=False)
class ComplexStokesField:
    """Complex velocity (vector P2) and pressure (P1) coefficients.

    Also used for the adjoint pair ``(v, q)``.
    """

    spaces: FeSpacePair
    u: np.ndarray  # (2 * n_p2,) complex, component blocked
    p: np.ndarray  # (n_vertices,) complex

    def __post_init__(self):
        u = np.asarray(self.u, complex)
        p = np.asarray(self.p, complex)
        if u.shape != (self.spaces.n_velocity,) or p.shape != (self.spaces.n_pressure,):
            raise ValueError("coefficient lengths do not match the spaces")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_full(cls, spaces, vec):
        return cls(spaces, vec[:spaces.n_velocity], vec[spaces.n_velocity:])

    @classmethod
    def zeros(cls, spaces):
        return cls(spaces, np.zeros(spaces.n_velocity, complex), np.zeros(spaces.n_pressure, complex))

    @property
    def u_r(self):
        return self.u.real

    @property
    def u_i(self):
        return self.u.imag

    @property
    def p_r(self):
        return self.p.real

    @property
    def p_i(self):
        return self.p.imag

    def full(self) -> np.ndarray:
        return np.concatenate([self.u, self.p])

    def nodal_velocity(self) -> np.ndarray:
        """``(n_p2, 2)`` complex velocity at every P2 node."""
        n2 = self.spaces.n_p2
        return np.stack([self.u[:n2], self.u[n2:]], axis=1)


def physical_points(mesh, pts):
    """Map reference points ``(nq, 2)`` into every triangle: ``(T, nq, 2)``."""
    p0 = mesh.nodes[mesh.triangles[:, 0]]
    e1 = mesh.nodes[mesh.triangles[:, 1]] - p0
    e2 = mesh.nodes[mesh.triangles[:, 2]] - p0
    return p0[:, None, :] + pts[None, :, 0, None] * e1[:, None, :] + pts[None, :, 1, None] * e2[:, None, :]


def p2_eval(spaces, coeff, pts):
    """Values ``(T, nq)`` of a scalar P2 function at reference points."""
    return np.einsum("ta,qa->tq", np.asarray(coeff)[spaces.cells_p2], p2_values(pts))


def p2_grad(spaces, coeff, pts):
    """Gradients ``(T, nq, 2)`` of a scalar P2 function."""
    _, _, inv_t = _kernels_py.affine_maps(spaces.mesh.nodes, spaces.mesh.triangles)
    g = np.einsum("tij,qaj->tqai", inv_t, p2_gradients(pts))
    return np.einsum("ta,tqai->tqi", np.asarray(coeff)[spaces.cells_p2], g)


def p1_eval(spaces, coeff, pts):
    return np.einsum("ta,qa->tq", np.asarray(coeff)[spaces.mesh.triangles], p1_values(pts))


def p1_grad(mesh, coeff):
    """Elementwise constant gradient ``(T, 2)`` of a P1 function (scalar or ``(N, k)``)."""
    _, _, inv_t = _kernels_py.affine_maps(mesh.nodes, mesh.triangles)
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    g = np.einsum("tij,aj->tai", inv_t, dl)
    c = np.asarray(coeff)[mesh.triangles]
    return np.einsum("ta...,tai->t...i", c, g)


def jacobian_dets(mesh):
    return _kernels_py.affine_maps(mesh.nodes, mesh.triangles)[1]
