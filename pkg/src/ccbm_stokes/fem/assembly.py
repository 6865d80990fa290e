"""Sparse assembly of the complex Stokes systems.

The full unknown vector is ``[u_x, u_y, p]``, with velocity blocked by
component over scalar P2 nodes.  With real basis functions the state
matrix is

    K = [[alpha * A + i S, B^T], [B, 0]]

where ``A`` is the vector P2 stiffness, ``S`` the Robin coupling
``int_Sigma (phi . n)(psi . n)`` and ``B = -int lambda div phi``.  The adjoint
uses the conjugate coupling ``-i S``.  Dirichlet DOFs on the fixed boundary
are lifted and eliminated symmetrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import AssemblyError
from ..mesh import SIGMA, boundary_geometry
from . import kernels
from .quadrature import segment_rule, triangle_rule
from .reference import p1_values, p2_gradients, p2_values, segment_p2
from .spaces import FeSpacePair


@dataclass(frozen=True, eq=False)
class ComplexSparseSystem:
    """A reduced linear system over the free DOFs.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
        Square matrix over the free DOFs (free velocity, then all pressure).
    rhs : ndarray
    free, fixed : ndarray
        Indices into the full vector ``[u_x, u_y, p]``.
    fixed_values : ndarray
        Lifted values at the fixed DOFs.
    n_velocity_free : int
        Number of leading free DOFs that are velocity DOFs.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    n_velocity_free: int
    full_size: int

    def expand(self, x) -> np.ndarray:
        out = np.zeros(self.full_size, dtype=np.result_type(x, self.fixed_values, complex))
        out[self.free] = x
        out[self.fixed] = self.fixed_values
        return out


@dataclass(frozen=True, eq=False)
class GlobalMatrices:
    """Real global operators shared by every system on one mesh."""

    stiffness: sp.csr_matrix  # scalar P2
    mass_p2: sp.csr_matrix
    mass_p1: sp.csr_matrix
    bx: sp.csr_matrix  # (n_p1, n_p2)
    by: sp.csr_matrix
    robin: sp.csr_matrix  # (2 n_p2, 2 n_p2)

    @property
    def div(self) -> sp.csr_matrix:
        return sp.hstack([self.bx, self.by]).tocsr()

    def vector_mass(self) -> sp.csr_matrix:
        return sp.block_diag([self.mass_p2, self.mass_p2]).tocsr()

    def vector_stiffness(self) -> sp.csr_matrix:
        return sp.block_diag([self.stiffness, self.stiffness]).tocsr()


def _scatter(rows_local, cols_local, vals, shape):
    r = np.broadcast_to(rows_local[:, :, None], vals.shape).ravel()
    c = np.broadcast_to(cols_local[:, None, :], vals.shape).ravel()
    return sp.coo_matrix((vals.ravel(), (r, c)), shape=shape).tocsr()


def robin_matrix(spaces: FeSpacePair, normals=None) -> sp.csr_matrix:
    """``int_Sigma (phi . n)(psi . n)`` with linearly interpolated nodal normals."""
    mesh = spaces.mesh
    n2 = spaces.n_p2
    if not len(mesh.edges_of(SIGMA)):
        return sp.csr_matrix((2 * n2, 2 * n2))
    geo = boundary_geometry(mesh, SIGMA)
    nn = geo.node_normals if normals is None else normals
    s, w = segment_rule(5)
    phi = segment_p2(s)  # (nq, 3)
    na, nb = nn, np.roll(nn, -1, axis=0)
    nq = (1 - s)[None, :, None] * na[:, None, :] + s[None, :, None] * nb[:, None, :]
    dofs = np.stack([geo.edges[:, 0], geo.edges[:, 1], spaces.sigma_midpoints], axis=1)
    lw = geo.edge_lengths[:, None] * w[None, :]
    # local (E, 2, 3, 2, 3): comp c node i, comp d node j
    loc = np.einsum("eq,qi,qj,eqc,eqd->ecidj", lw, phi, phi, nq, nq)
    gl = np.stack([dofs, dofs + n2], axis=1).reshape(len(dofs), 6)
    return _scatter(gl, gl, loc.reshape(len(dofs), 6, 6), (2 * n2, 2 * n2))


def global_matrices(spaces: FeSpacePair, backend=None) -> GlobalMatrices:
    mesh = spaces.mesh
    pts, qw = triangle_rule(4)
    det, a, bx, by, m2, m1 = kernels.p2p1_element_matrices(
        mesh.nodes, mesh.triangles, p2_gradients(pts), p2_values(pts), p1_values(pts), qw,
        backend=backend)
    if np.any(det <= 0):
        raise AssemblyError("degenerate or inverted triangle in assembly")
    cells, tris = spaces.cells_p2, mesh.triangles
    n2, n1 = spaces.n_p2, spaces.n_pressure
    return GlobalMatrices(
        stiffness=_scatter(cells, cells, a, (n2, n2)),
        mass_p2=_scatter(cells, cells, m2, (n2, n2)),
        mass_p1=_scatter(tris, tris, m1, (n1, n1)),
        bx=_scatter(tris, cells, bx, (n1, n2)),
        by=_scatter(tris, cells, by, (n1, n2)),
        robin=robin_matrix(spaces),
    )


def stokes_operator(spaces, mats: GlobalMatrices, alpha, coupling=1j) -> sp.csr_matrix:
    """Full (unreduced) complex operator with Robin coefficient ``coupling``."""
    top = alpha * mats.vector_stiffness() + coupling * mats.robin
    b = mats.div
    return sp.bmat([[top, b.T], [b, None]], format="csr").astype(complex)


def load_vector(spaces: FeSpacePair, forcing, degree=6) -> np.ndarray:
    """``int f . phi`` for every velocity DOF; ``forcing(x, y) -> (2, ...)``."""
    mesh = spaces.mesh
    pts, qw = triangle_rule(degree)
    phi = p2_values(pts)
    p0 = mesh.nodes[mesh.triangles[:, 0]]
    e1 = mesh.nodes[mesh.triangles[:, 1]] - p0
    e2 = mesh.nodes[mesh.triangles[:, 2]] - p0
    xq = p0[:, None, :] + pts[None, :, 0, None] * e1[:, None, :] + pts[None, :, 1, None] * e2[:, None, :]
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    with np.errstate(all="ignore"):
        fv = np.asarray(forcing(xq[..., 0], xq[..., 1]), dtype=complex)
    fv = np.broadcast_to(fv, (2,) + xq.shape[:2])
    if not np.all(np.isfinite(fv)):
        raise AssemblyError("forcing is not finite at some quadrature point")
    out = np.zeros(spaces.n_velocity, dtype=complex)
    n2 = spaces.n_p2
    for c in range(2):
        loc = np.einsum("tq,q,qa,t->ta", fv[c], qw, phi, det)
        idx = spaces.cells_p2.ravel() + c * n2
        out += np.bincount(idx, loc.real.ravel(), minlength=2 * n2)
        out += 1j * np.bincount(idx, loc.imag.ravel(), minlength=2 * n2)
    return out


def dirichlet_values(spaces: FeSpacePair, data) -> np.ndarray:
    """Nodal interpolation of ``data`` at the constrained velocity DOFs."""
    pts = spaces.p2_points()
    n2 = spaces.n_p2
    nodes = spaces.constrained % n2
    comp = spaces.constrained // n2
    if data is None or len(nodes) == 0:
        return np.zeros(len(nodes), complex)
    with np.errstate(all="ignore"):
        vals = np.asarray(data(pts[nodes, 0], pts[nodes, 1]), dtype=complex)
    vals = np.broadcast_to(vals, (2, len(nodes)))
    out = vals[comp, np.arange(len(nodes))]
    if not np.all(np.isfinite(out)):
        raise AssemblyError("Dirichlet data is not finite on the fixed boundary")
    return out


def reduce_system(spaces, full_matrix, full_rhs, fixed_values) -> ComplexSparseSystem:
    """Lift the fixed DOFs and keep the free block."""
    n = spaces.n_total
    fixed = spaces.constrained
    mask = np.ones(n, bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    k = sp.csr_matrix(full_matrix)
    rhs = np.asarray(full_rhs, complex)[free]
    if len(fixed):
        rhs = rhs - k[free][:, fixed] @ fixed_values
    mat = k[free][:, free].tocsr()
    if not (np.all(np.isfinite(mat.data)) and np.all(np.isfinite(rhs))):
        raise AssemblyError("non-finite entries in assembled system")
    n_vel_free = int(np.sum(free < spaces.n_velocity))
    return ComplexSparseSystem(mat, rhs, free, fixed, np.asarray(fixed_values, complex),
                               n_vel_free, n)


def assemble_state(mesh, spaces, case, mats=None) -> ComplexSparseSystem:
    """Reduced state system for ``case`` (alpha, forcing, dirichlet)."""
    if not case.alpha > 0:
        raise AssemblyError(f"alpha must be positive, got {case.alpha}")
    mats = mats or global_matrices(spaces)
    k = stokes_operator(spaces, mats, case.alpha, 1j)
    rhs = np.zeros(spaces.n_total, complex)
    rhs[:spaces.n_velocity] = load_vector(spaces, case.forcing)
    return reduce_system(spaces, k, rhs, dirichlet_values(spaces, case.dirichlet))


def assemble_adjoint(mesh, spaces, source_u_i, source_p_i, alpha, mats=None) -> ComplexSparseSystem:
    """Reduced adjoint system with coupling ``-i`` and sources ``(u_i, p_i)``."""
    if not alpha > 0:
        raise AssemblyError(f"alpha must be positive, got {alpha}")
    mats = mats or global_matrices(spaces)
    k = stokes_operator(spaces, mats, alpha, -1j)
    rhs = np.zeros(spaces.n_total, complex)
    rhs[:spaces.n_velocity] = mats.vector_mass() @ np.asarray(source_u_i, float)
    rhs[spaces.n_velocity:] = mats.mass_p1 @ np.asarray(source_p_i, float)
    return reduce_system(spaces, k, rhs, np.zeros(len(spaces.constrained), complex))
