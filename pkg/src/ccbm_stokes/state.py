"""State, adjoint and auxiliary solves, and the cost functionals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .expressions import VectorField
from .fem import _kernels_py
from .fem.assembly import (assemble_adjoint, assemble_state, dirichlet_values, load_vector,
                           reduce_system, stokes_operator)
from .fem.cache import matrices
from .fem.fields import ComplexStokesField
from .fem.linsolve import solve, solve_sparse
from .fem.quadrature import segment_rule
from .fem.reference import p2_gradients, p2_values
from .mesh import SIGMA, boundary_geometry


@dataclass(frozen=True, eq=False)
class PhysicsCase:
    """Viscosity ``alpha``, forcing ``f`` and Dirichlet data ``g`` on the fixed boundary."""

    alpha: float
    forcing: VectorField
    dirichlet: VectorField
    label: str = "case"

    def __post_init__(self):
        a = float(self.alpha)
        if not (np.isfinite(a) and a > 0):
            raise ValidationError(f"alpha must be a positive finite number, got {self.alpha}")
        object.__setattr__(self, "alpha", a)

    def rotated(self, angle) -> "PhysicsCase":
        return PhysicsCase(self.alpha, self.forcing.rotated(angle), self.dirichlet.rotated(angle),
                           self.label)


def solve_state(mesh, spaces, case: PhysicsCase) -> ComplexStokesField:
    system = assemble_state(mesh, spaces, case, mats=matrices(spaces))
    return ComplexStokesField.from_full(spaces, system.expand(solve(system)))


def solve_adjoint(mesh, spaces, case: PhysicsCase, state: ComplexStokesField) -> ComplexStokesField:
    """Adjoint ``(v, q)`` sourced by the imaginary parts of the state."""
    system = assemble_adjoint(mesh, spaces, state.u_i, state.p_i, case.alpha,
                              mats=matrices(spaces))
    return ComplexStokesField.from_full(spaces, system.expand(solve(system)))


def cost_J(mesh, state: ComplexStokesField) -> float:
    """``J = 1/2 int |u_i|^2 + |p_i|^2``, exact for the FE representation."""
    mats = matrices(state.spaces)
    ui, pi = state.u_i, state.p_i
    val = 0.5 * (ui @ (mats.vector_mass() @ ui) + pi @ (mats.mass_p1 @ pi))
    return float(max(val, 0.0))


# ---------------------------------------------------------------------------
# auxiliary states and classical costs


@dataclass(frozen=True, eq=False)
class AuxiliaryState:
    """Real velocity/pressure pair of one of the classical auxiliary problems."""

    spaces: object
    u: np.ndarray
    p: np.ndarray

    def nodal_velocity(self):
        n2 = self.spaces.n_p2
        return np.stack([self.u[:n2], self.u[n2:]], axis=1)


@dataclass(frozen=True)
class Diagnostics:
    J: float
    J_KV: float
    J_D: float
    J_N: float
    max_abs_u_i: float
    max_abs_p_i: float
    max_abs_v: float
    max_abs_q: float

    def as_dict(self):
        return dict(self.__dict__)


def _sigma_p2_normals(spaces):
    """Unit normals at Sigma P2 nodes: nodal bisectors and normalised edge averages."""
    geo = boundary_geometry(spaces.mesh, SIGMA)
    nn = geo.node_normals
    mid = nn + np.roll(nn, -1, axis=0)
    mid /= np.hypot(mid[:, 0], mid[:, 1])[:, None]
    return (np.concatenate([geo.loop_nodes, spaces.sigma_midpoints]),
            np.concatenate([nn, mid]))


def _real_stokes(spaces, case, mats):
    """Real Stokes operator with natural Sigma condition and its load vector."""
    k = stokes_operator(spaces, mats, case.alpha, 0.0).real.tocsr()
    rhs = np.zeros(spaces.n_total)
    rhs[:spaces.n_velocity] = load_vector(spaces, case.forcing).real
    g = dirichlet_values(spaces, case.dirichlet).real
    return k, rhs, g


def solve_auxiliary_states(mesh, spaces, case: PhysicsCase):
    """Return ``(u_D, u_N)``.

    ``u_N`` has zero traction ``alpha du/dn - p n`` on Sigma.  ``u_D`` has
    ``u . n = 0`` and zero tangential traction on Sigma, imposed in a
    rotated normal/tangent frame at the Sigma P2 nodes; its pressure has
    zero mean.
    """
    mats = matrices(spaces)
    k, rhs, g = _real_stokes(spaces, case, mats)

    # u_N: plain elimination of the Gamma DOFs
    sys_n = reduce_system(spaces, k, rhs, g)
    full_n = sys_n.expand(solve_sparse(sys_n.matrix, sys_n.rhs)).real
    u_n = AuxiliaryState(spaces, full_n[:spaces.n_velocity], full_n[spaces.n_velocity:])

    # u_D: rotate Sigma nodes to (normal, tangent) components
    n2, nt = spaces.n_p2, spaces.n_total
    nodes, normals = _sigma_p2_normals(spaces)
    gamma = set((spaces.constrained % n2).tolist())
    keep = np.array([i not in gamma for i in nodes.tolist()])
    nodes, normals = nodes[keep], normals[keep]
    t = sp.lil_matrix((nt, nt))
    t.setdiag(1.0)
    for i, (nx, ny) in zip(nodes.tolist(), normals.tolist()):
        # columns (i, i + n2) now hold (u_n, u_t); u = n u_n + tau u_t, tau = (-ny, nx)
        t[i, i], t[i, i + n2] = nx, -ny
        t[i + n2, i], t[i + n2, i + n2] = ny, nx
    t = t.tocsr()
    kr = (t.T @ k @ t).tocsr()
    rr = t.T @ rhs
    fixed = np.concatenate([spaces.constrained, nodes])
    fixed_vals = np.concatenate([g, np.zeros(len(nodes))])
    order = np.argsort(fixed)
    fixed, fixed_vals = fixed[order], fixed_vals[order]
    mask = np.ones(nt, bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    kf = kr[free][:, free]
    bf = rr[free] - kr[free][:, fixed] @ fixed_vals
    # zero-mean pressure through a Lagrange multiplier
    mean_row = np.zeros(nt)
    mean_row[spaces.n_velocity:] = mats.mass_p1 @ np.ones(spaces.n_pressure)
    c = sp.csr_matrix(mean_row[free][None, :])
    aug = sp.bmat([[kf, c.T], [c, None]], format="csc")
    sol = solve_sparse(aug, np.concatenate([bf, [0.0]]))
    z = np.zeros(nt)
    z[free] = sol[:-1]
    z[fixed] = fixed_vals
    full_d = t @ z
    u_d = AuxiliaryState(spaces, full_d[:spaces.n_velocity], full_d[spaces.n_velocity:])
    return u_d, u_n


def _sigma_quadrature(spaces, degree=6):
    """Edge quadrature data on Sigma: points, weights, normals, owning triangles."""
    mesh = spaces.mesh
    geo = boundary_geometry(mesh, SIGMA)
    s, w = segment_rule(degree)
    a, b = geo.edges[:, 0], geo.edges[:, 1]
    xq = mesh.nodes[a][:, None, :] * (1 - s)[None, :, None] + mesh.nodes[b][:, None, :] * s[None, :, None]
    nn = geo.node_normals
    nq = (1 - s)[None, :, None] * nn[:, None, :] + s[None, :, None] * np.roll(nn, -1, 0)[:, None, :]
    wq = geo.edge_lengths[:, None] * w[None]
    return xq, wq, nq, spaces.sigma_triangles


def _values_and_gradients_at(spaces, coeff, tris, xq):
    """P2 values and gradients of scalar ``coeff`` at points ``xq`` (E, nq, 2) in ``tris``."""
    mesh = spaces.mesh
    jac, _, inv_t = _kernels_py.affine_maps(mesh.nodes, mesh.triangles)
    p0 = mesh.nodes[mesh.triangles[tris, 0]]
    inv = np.linalg.inv(jac[tris])
    ref = np.einsum("eij,eqj->eqi", inv, xq - p0[:, None, :])
    flat = ref.reshape(-1, 2)
    vals = p2_values(flat).reshape(ref.shape[:2] + (6,))
    grads = p2_gradients(flat).reshape(ref.shape[:2] + (6, 2))
    grads = np.einsum("eij,eqaj->eqai", inv_t[tris], grads)
    c = np.asarray(coeff)[spaces.cells_p2[tris]]
    return np.einsum("ea,eqa->eq", c, vals), np.einsum("ea,eqai->eqi", c, grads)


def classical_costs(mesh, spaces, case, u_d: AuxiliaryState, u_n: AuxiliaryState):
    """``(J_KV, J_D, J_N)``.

    ``J_N`` uses the traction ``-p_D n + alpha du_D/dn`` from the single
    owning triangle of each Sigma edge and is minimised over the free
    pressure constant of ``u_D`` (that is, the mean normal traction is
    removed), so it vanishes at exact solutions.
    """
    mats = matrices(spaces)
    w = u_n.u - u_d.u
    j_kv = 0.5 * float(w @ (mats.vector_stiffness() @ w))
    xq, wq, nq, tris = _sigma_quadrature(spaces)
    n2 = spaces.n_p2
    un = []
    grads = []
    for comp in range(2):
        v, _ = _values_and_gradients_at(spaces, u_n.u[comp * n2:(comp + 1) * n2], tris, xq)
        un.append(v)
        _, gd = _values_and_gradients_at(spaces, u_d.u[comp * n2:(comp + 1) * n2], tris, xq)
        grads.append(gd)
    un = np.stack(un, axis=-1)
    j_d = 0.5 * float(np.sum(wq * np.einsum("eqi,eqi->eq", un, nq) ** 2))
    geo = boundary_geometry(mesh, SIGMA)
    pa, pb = u_d.p[geo.edges[:, 0]], u_d.p[geo.edges[:, 1]]
    s, _ = segment_rule(6)
    pq = pa[:, None] * (1 - s)[None] + pb[:, None] * s[None]
    dudn = np.stack([np.einsum("eqi,eqi->eq", grads[c], nq) for c in range(2)], axis=-1)
    trac = -pq[..., None] * nq + case.alpha * dudn
    # remove the best constant pressure shift c: traction -> traction - c n
    nn2 = np.einsum("eqi,eqi->eq", nq, nq)
    shift = np.sum(wq * np.einsum("eqi,eqi->eq", trac, nq)) / np.sum(wq * nn2)
    trac = trac - shift * nq
    j_n = 0.5 * float(np.sum(wq * np.einsum("eqi,eqi->eq", trac, trac)))
    return j_kv, j_d, j_n


def diagnostics(mesh, case, state, adjoint, u_d, u_n) -> Diagnostics:
    spaces = state.spaces
    j_kv, j_d, j_n = classical_costs(mesh, spaces, case, u_d, u_n)
    return Diagnostics(
        J=cost_J(mesh, state),
        J_KV=j_kv,
        J_D=j_d,
        J_N=j_n,
        max_abs_u_i=float(np.max(np.abs(state.u_i))),
        max_abs_p_i=float(np.max(np.abs(state.p_i))),
        max_abs_v=float(np.max(np.abs(adjoint.nodal_velocity()))),
        max_abs_q=float(np.max(np.abs(adjoint.p))),
    )
