"""Shape calculus on the free boundary.

Curvature by a smoothed normal extension, the shape derivative of the cost
in boundary and distributed (volume) form, the H1 Sobolev gradient and a
finite-difference validator.

The boundary form is assembled as ``dJ[theta] = sum_k G_k (theta_k . n_k)``
over Sigma nodes, where ``Vn`` is the piecewise-linear interpolant of the
nodal normal components.  The term ``div_S[alpha (grad_S u) Vn]`` is
integrated by parts so that only first arclength derivatives appear.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem import kernels
from .fem.fields import ComplexStokesField, p1_grad, p2_grad, p2_eval, p1_eval, physical_points
from .fem.linsolve import solve_sparse
from .fem.quadrature import segment_rule, triangle_rule
from .fem.reference import segment_p2, segment_p2_derivative
from .fem.spaces import build_spaces
from .mesh import GAMMA, SIGMA, boundary_geometry, deform

C_N_DEFAULT = 1e-8


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Nodal mean curvature on Sigma and the smoothed normal extension ``N``."""

    loop_nodes: np.ndarray
    kappa: np.ndarray  # (n_sigma,), loop order
    extension: np.ndarray  # (n_nodes, 2), piecewise linear


@dataclass(frozen=True, eq=False)
class DisplacementField:
    """Piecewise-linear vector field vanishing on Gamma, with its H1 norm."""

    values: np.ndarray
    h1_norm: float

    @property
    def h1_norm_sq(self) -> float:
        return self.h1_norm ** 2


@dataclass(frozen=True, eq=False)
class BoundaryDerivative:
    """Nodal coefficients ``G_k`` with ``dJ[theta] = sum_k G_k theta_k . n_k``."""

    loop_nodes: np.ndarray
    coefficients: np.ndarray
    node_normals: np.ndarray
    node_weights: np.ndarray

    def __call__(self, theta) -> float:
        th = np.asarray(getattr(theta, "values", theta), float)[self.loop_nodes]
        return float(np.sum(self.coefficients * np.einsum("ki,ki->k", th, self.node_normals)))

    @property
    def density(self) -> np.ndarray:
        """Lumped scalar density ``g_Sigma`` at the Sigma nodes."""
        return self.coefficients / self.node_weights

    def gradient_vector(self, n_nodes) -> np.ndarray:
        """Nodal vector ``dJ[e_k c]`` for every P1 vector basis function."""
        out = np.zeros((n_nodes, 2))
        out[self.loop_nodes] = self.coefficients[:, None] * self.node_normals
        return out


@dataclass
class ShapeDerivativeReport:
    dJ_boundary: float
    dJ_distributed: float
    t: list = field(default_factory=list)
    fd_quotients: list = field(default_factory=list)

    @property
    def err_boundary(self):
        return [_rel(q, self.dJ_boundary) for q in self.fd_quotients]

    @property
    def err_distributed(self):
        return [_rel(q, self.dJ_distributed) for q in self.fd_quotients]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "fd_quotient", "err_boundary", "err_distributed"])
            for row in zip(self.t, self.fd_quotients, self.err_boundary, self.err_distributed):
                w.writerow([repr(float(v)) for v in row])


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# ---------------------------------------------------------------------------
# P1 vector helpers


def _p1_matrices(mesh):
    stiff, mass = kernels.p1_element_matrices(mesh.nodes, mesh.triangles)
    t = mesh.triangles
    r = np.repeat(t, 3, axis=1).ravel()
    c = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    k = sp.coo_matrix((stiff.ravel(), (r, c)), shape=(n, n)).tocsr()
    m = sp.coo_matrix((mass.ravel(), (r, c)), shape=(n, n)).tocsr()
    return k, m


def _sigma_mass(mesh, geo):
    """Consistent P1 mass matrix on the Sigma loop."""
    a, b = geo.edges[:, 0], geo.edges[:, 1]
    L = geo.edge_lengths
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate([L / 3, L / 3, L / 6, L / 6])
    n = mesh.n_nodes
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _triangle_areas(mesh):
    p = mesh.nodes[mesh.triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))


# ---------------------------------------------------------------------------
# curvature


def curvature(mesh, spaces=None, c_N=C_N_DEFAULT) -> CurvatureField:
    """Mean curvature of Sigma from a smoothed extension ``N`` of the normal.

    ``N`` solves ``c_N (grad N, grad phi) + (N, phi)_Sigma = (n, phi)_Sigma``
    in the P1 vector space.  At a Sigma node the curvature is the
    area-weighted average, over the adjacent triangles, of the tangential
    divergence ``div N - (DN n) . n``.
    """
    if not c_N > 0:
        raise ValueError("c_N must be positive")
    geo = boundary_geometry(mesh, SIGMA)
    k, _ = _p1_matrices(mesh)
    msig = _sigma_mass(mesh, geo)
    mat = (c_N * k + msig).tocsc()
    a, b = geo.edges[:, 0], geo.edges[:, 1]
    half = 0.5 * geo.edge_lengths[:, None] * geo.edge_normals
    rhs = np.zeros((mesh.n_nodes, 2))
    np.add.at(rhs, a, half)
    np.add.at(rhs, b, half)
    ext = np.stack([solve_sparse(mat, rhs[:, c]) for c in range(2)], axis=1)
    dn = p1_grad(mesh, ext)  # (T, 2, 2): [component, derivative]
    div = dn[:, 0, 0] + dn[:, 1, 1]
    area = _triangle_areas(mesh)
    loop = geo.loop_nodes
    pos = np.full(mesh.n_nodes, -1)
    pos[loop] = np.arange(len(loop))
    num = np.zeros(len(loop))
    den = np.zeros(len(loop))
    for j in range(3):
        v = mesh.triangles[:, j]
        on = pos[v] >= 0
        kk = pos[v[on]]
        nrm = geo.node_normals[kk]
        tang_div = div[on] - np.einsum("ti,tij,tj->t", nrm, dn[on], nrm)
        np.add.at(num, kk, area[on] * tang_div)
        np.add.at(den, kk, area[on])
    return CurvatureField(loop.copy(), num / den, ext)


# ---------------------------------------------------------------------------
# boundary form


def _sigma_traces(spaces, fld: ComplexStokesField, s):
    """Velocity, pressure and their arclength derivatives along Sigma edges."""
    geo = boundary_geometry(spaces.mesh, SIGMA)
    n2 = spaces.n_p2
    nodes = np.stack([geo.edges[:, 0], geo.edges[:, 1], spaces.sigma_midpoints], axis=1)
    ux = fld.u[:n2][nodes]
    uy = fld.u[n2:][nodes]
    phi, dphi = segment_p2(s), segment_p2_derivative(s)
    L = geo.edge_lengths[:, None]
    u = np.stack([ux @ phi.T, uy @ phi.T], axis=-1)
    du = np.stack([ux @ dphi.T, uy @ dphi.T], axis=-1) / L[..., None]
    pa, pb = fld.p[geo.edges[:, 0]], fld.p[geo.edges[:, 1]]
    p = pa[:, None] * (1 - s)[None] + pb[:, None] * s[None]
    dp = (pb - pa)[:, None] / L * np.ones_like(s)[None]
    return u, du, p, dp


def shape_derivative_boundary(mesh, state, adjoint, curv: CurvatureField, theta=None,
                              forcing=None, alpha=None, case=None):
    """Boundary form of the shape derivative.

    Returns the value ``dJ[theta]`` when ``theta`` is given, otherwise the
    :class:`BoundaryDerivative` linear functional.  ``case`` supplies
    ``alpha`` and the forcing.
    """
    if case is not None:
        forcing, alpha = case.forcing, case.alpha
    spaces = state.spaces
    geo = boundary_geometry(mesh, SIGMA)
    s, w = segment_rule(9)
    u, du, p, dp = _sigma_traces(spaces, state, s)
    v, dv, _, _ = _sigma_traces(spaces, adjoint, s)
    vb, dvb = np.conj(v), np.conj(dv)
    nn = geo.node_normals
    nq = (1 - s)[None, :, None] * nn[:, None, :] + s[None, :, None] * np.roll(nn, -1, 0)[:, None, :]
    tau = np.broadcast_to(geo.edge_tangents[:, None, :], nq.shape)
    kap = curv.kappa
    kq = (1 - s)[None] * kap[:, None] + s[None] * np.roll(kap, -1)[:, None]
    a, b = geo.edges[:, 0], geo.edges[:, 1]
    xq = mesh.nodes[a][:, None, :] * (1 - s)[None, :, None] + mesh.nodes[b][:, None, :] * s[None, :, None]
    fq = np.moveaxis(np.asarray(forcing(xq[..., 0], xq[..., 1]), complex), 0, -1) \
        if forcing is not None else np.zeros_like(u)

    def dot(x, y):
        return np.einsum("eqi,eqi->eq", x, y)

    un, vn = dot(u, nq), dot(vb, nq)
    vt = dot(vb, tau)
    c0 = (dot(fq, vb) - dp * vt - alpha * dot(du, dvb) + 1j * dot(tau, du) * vn
          - kq * (-p * vn + 1j * un * vn)).imag
    c0 = c0 + 0.5 * (np.sum(u.imag ** 2, axis=-1) + p.imag ** 2)
    c1 = (-p * vt + 1j * dot(u, tau) * vn + 1j * un * vt).imag
    L = geo.edge_lengths
    ia = L * ((c0 * (1 - s)[None]) @ w) - c1 @ w
    ib = L * ((c0 * s[None]) @ w) + c1 @ w
    k = len(L)
    coeffs = ia + np.roll(ib, 1)  # node k starts edge k and ends edge k-1
    assert coeffs.shape == (k,)
    functional = BoundaryDerivative(geo.loop_nodes, coeffs, nn, geo.node_weights)
    if theta is None:
        return functional
    return functional(theta)


# ---------------------------------------------------------------------------
# distributed form


def shape_derivative_distributed(mesh, state, adjoint, theta, forcing=None, alpha=None,
                                 case=None) -> float:
    """Volume (distributed) form of the shape derivative along ``theta``."""
    if case is not None:
        forcing, alpha = case.forcing, case.alpha
    spaces = state.spaces
    th = np.asarray(getattr(theta, "values", theta), float)
    dth = p1_grad(mesh, th)  # (T, 2, 2): [i, j] = d theta_i / d x_j
    divth = dth[:, 0, 0] + dth[:, 1, 1]
    eye = np.eye(2)
    amat = divth[:, None, None] * eye - dth - np.swapaxes(dth, 1, 2)
    pts, qw = triangle_rule(6)
    det = np.abs(2 * _triangle_areas(mesh))
    wq = det[:, None] * qw[None]
    n2 = spaces.n_p2

    def vec_grad(fld):
        return np.stack([p2_grad(spaces, fld.u[:n2], pts), p2_grad(spaces, fld.u[n2:], pts)], axis=2)

    def vec_val(fld):
        return np.stack([p2_eval(spaces, fld.u[:n2], pts), p2_eval(spaces, fld.u[n2:], pts)], axis=-1)

    gu = vec_grad(state)  # (T, nq, comp, deriv)
    gv = np.conj(vec_grad(adjoint))
    uval = vec_val(state)
    vval = np.conj(vec_val(adjoint))
    p = p1_eval(spaces, state.p, pts)
    qb = np.conj(p1_eval(spaces, adjoint.p, pts))
    divu = gu[..., 0, 0] + gu[..., 1, 1]
    divv = gv[..., 0, 0] + gv[..., 1, 1]
    tr_th_v = np.einsum("tij,tqji->tq", dth, gv)
    tr_th_u = np.einsum("tij,tqji->tq", dth, gu)
    xq = physical_points(mesh, pts)
    if forcing is not None:
        fv = np.moveaxis(np.asarray(forcing(xq[..., 0], xq[..., 1]), complex), 0, -1)
        gf = np.moveaxis(np.asarray(forcing.gradient(xq[..., 0], xq[..., 1]), complex), (0, 1), (-2, -1))
        thq = np.asarray(p1_eval(spaces, th[:, 0], pts)), np.asarray(p1_eval(spaces, th[:, 1], pts))
        thq = np.stack(thq, axis=-1)
        df = np.einsum("tqij,tqj->tqi", gf, thq) + divth[:, None, None] * fv
        force = np.einsum("tqi,tqi->tq", df, vval)
    else:
        force = 0.0
    integrand = (-alpha * np.einsum("tij,tqcj,tqci->tq", amat, gu, gv)
                 + divth[:, None] * p * divv - p * tr_th_v + force
                 + divth[:, None] * qb * divu - qb * tr_th_u)
    total = np.sum(wq * integrand)
    ui2 = np.sum(uval.imag ** 2, axis=-1) + p.imag ** 2
    mass_term = 0.5 * np.sum(wq * divth[:, None] * ui2)

    # Robin coupling on Sigma, with D theta from the owning triangle
    geo = boundary_geometry(mesh, SIGMA)
    s, w = segment_rule(6)
    u_s, _, _, _ = _sigma_traces(spaces, state, s)
    v_s, _, _, _ = _sigma_traces(spaces, adjoint, s)
    v_s = np.conj(v_s)
    nn = geo.node_normals
    nq = (1 - s)[None, :, None] * nn[:, None, :] + s[None, :, None] * np.roll(nn, -1, 0)[:, None, :]
    d_e = dth[spaces.sigma_triangles]
    dn = np.einsum("eij,eqj->eqi", d_e, nq)
    un = np.einsum("eqi,eqi->eq", u_s, nq)
    vn = np.einsum("eqi,eqi->eq", v_s, nq)
    dnn = np.einsum("eqi,eqi->eq", dn, nq)
    du_n = np.einsum("eij,eqj,eqi->eq", d_e, u_s, nq)
    dv_n = np.einsum("eij,eqj,eqi->eq", d_e, v_s, nq)
    robin = (divth[spaces.sigma_triangles][:, None] + dnn) * un * vn - du_n * vn - un * dv_n
    total = total - 1j * np.sum(geo.edge_lengths[:, None] * w[None] * robin)
    return float(mass_term + total.imag)


# ---------------------------------------------------------------------------
# Sobolev gradient


def h1_matrix(mesh):
    k, m = _p1_matrices(mesh)
    return (k + m).tocsr()


def riesz_h1(mesh, rhs) -> DisplacementField:
    """Solve ``(theta, phi)_H1 = rhs(phi)`` for P1 vectors vanishing on Gamma."""
    h = h1_matrix(mesh)
    n = mesh.n_nodes
    fixed = np.zeros(n, bool)
    fixed[mesh.loop(GAMMA)] = True
    free = np.flatnonzero(~fixed)
    hf = h[free][:, free].tocsc()
    out = np.zeros((n, 2))
    from .fem.linsolve import factorize
    lu = factorize(hf)
    for c in range(2):
        out[free, c] = solve_sparse(hf, rhs[free, c], factor=lu)
    norm_sq = float(sum(out[:, c] @ (h @ out[:, c]) for c in range(2)))
    return DisplacementField(out, float(np.sqrt(max(norm_sq, 0.0))))


def sobolev_gradient(mesh, spaces, state, adjoint, curv, case=None, functional=None):
    """H1 Riesz representative of ``-dJ`` (a descent direction)."""
    if functional is None:
        functional = shape_derivative_boundary(mesh, state, adjoint, curv, case=case)
    return riesz_h1(mesh, -functional.gradient_vector(mesh.n_nodes))


# ---------------------------------------------------------------------------
# finite differences


def cost_on(mesh, case):
    from .state import cost_J, solve_state
    spaces = build_spaces(mesh)
    return cost_J(mesh, solve_state(mesh, spaces, case))


def fd_gradient_check(mesh, case, theta, t_ladder=(1e-2, 1e-3, 1e-4), c_N=C_N_DEFAULT):
    """Compare central differences of ``J`` with both derivative forms."""
    from .state import solve_adjoint, solve_state
    th = np.asarray(getattr(theta, "values", theta), float)
    spaces = build_spaces(mesh)
    state = solve_state(mesh, spaces, case)
    adj = solve_adjoint(mesh, spaces, case, state)
    curv = curvature(mesh, spaces, c_N)
    db = shape_derivative_boundary(mesh, state, adj, curv, th, case=case)
    dd = shape_derivative_distributed(mesh, state, adj, th, case=case)
    report = ShapeDerivativeReport(db, dd)
    for t in t_ladder:
        if not np.any(th):
            q = 0.0
        else:
            jp = cost_on(deform(mesh, th, t), case)
            jm = cost_on(deform(mesh, th, -t), case)
            q = (jp - jm) / (2 * t)
        report.t.append(float(t))
        report.fd_quotients.append(float(q))
    return report


def bump_field(mesh, weight, inner=0.4, width=None):
    """``bump(r) * weight(x, y)`` with the bump vanishing on the inner circle."""
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    width = width if width is not None else 0.3
    z = np.clip((r - inner) / width, 0.0, None)
    bump = np.where(z > 0, z * z / (1 + z * z), 0.0)
    vals = np.asarray(weight(mesh.nodes[:, 0], mesh.nodes[:, 1]), float).T * bump[:, None]
    vals[mesh.loop(GAMMA)] = 0.0
    return vals
