import numpy as np
import pytest

from ccbm_stokes.errors import ValidationError
from ccbm_stokes.expressions import VectorField
from ccbm_stokes.fem.assembly import assemble_adjoint, load_vector, stokes_operator, reduce_system
from ccbm_stokes.fem.cache import matrices
from ccbm_stokes.fem.fields import ComplexStokesField
from ccbm_stokes.fem.linsolve import solve, solve_sparse
from ccbm_stokes.fem.spaces import build_spaces
from ccbm_stokes.mesh import GAMMA, SIGMA, Circle, boundary_geometry, refine, signed_areas
from ccbm_stokes.state import (PhysicsCase, classical_costs, cost_J, diagnostics, solve_adjoint,
                               solve_auxiliary_states, solve_state)


def project(mesh):
    return refine(mesh, {GAMMA: Circle(0.4).project, SIGMA: Circle(1.0).project})


def annulus_errors(mesh, case):
    s = build_spaces(mesh)
    st = solve_state(mesh, s, case)
    r2 = (mesh.nodes ** 2).sum(axis=1)
    return (np.abs(st.u).max(), np.abs(st.u_i).max(), np.abs(st.p_i).max(),
            np.abs(st.p_r - 5 * (1 - r2)).max(), cost_J(mesh, st))


def test_alpha_must_be_positive():
    with pytest.raises(ValidationError):
        PhysicsCase(-1.0, VectorField.zero(), VectorField.zero())


def test_exact_annulus_converges(circle_mesh, gravity_case):
    coarse = annulus_errors(circle_mesh, gravity_case)
    fine = annulus_errors(project(circle_mesh), gravity_case)
    for c, f in zip(coarse, fine):
        assert f < c
    assert coarse[3] < 0.05 and coarse[2] < 1e-3
    # J sits at the discretisation floor and drops at least like h^4
    assert fine[4] <= coarse[4] / 16


def test_zero_data_zero_field(circle_mesh, zero_case):
    s = build_spaces(circle_mesh)
    st = solve_state(circle_mesh, s, zero_case)
    assert not np.any(st.u) and not np.any(st.p)
    ad = solve_adjoint(circle_mesh, s, zero_case, st)
    assert not np.any(ad.u) and not np.any(ad.p)
    u_d, u_n = solve_auxiliary_states(circle_mesh, s, zero_case)
    assert not np.any(u_d.u) and not np.any(u_n.u) and not np.any(u_d.p)
    d = diagnostics(circle_mesh, zero_case, st, ad, u_d, u_n)
    assert all(v == 0 for v in d.as_dict().values())


def test_ellipse_state_nonzero(ellipse_solution):
    mesh, s, st, ad, _ = ellipse_solution
    J = cost_J(mesh, st)
    assert np.isfinite(J) and J > 0.1
    assert np.all(np.isfinite(st.u)) and np.abs(st.p_i).max() > 0
    assert np.abs(ad.u).max() > 0
    assert not np.any(ad.u[s.constrained])


def test_adjoint_linear_in_sources(ellipse_solution):
    mesh, s, st, _, _ = ellipse_solution
    a1 = solve(assemble_adjoint(mesh, s, st.u_i, st.p_i, 0.01))
    a2 = solve(assemble_adjoint(mesh, s, 2 * st.u_i, 2 * st.p_i, 0.01))
    assert np.linalg.norm(a2 - 2 * a1) <= 1e-9 * np.linalg.norm(a2)


def test_cost_constant_field(ellipse_mesh):
    s = build_spaces(ellipse_mesh)
    u = np.zeros(s.n_velocity, complex)
    u[:s.n_p2] = 1j
    fld = ComplexStokesField(s, u, np.zeros(s.n_pressure))
    area = signed_areas(ellipse_mesh.nodes, ellipse_mesh.triangles).sum()
    assert cost_J(ellipse_mesh, fld) == pytest.approx(area / 2, rel=1e-12)
    assert cost_J(ellipse_mesh, ComplexStokesField.zeros(s)) == 0


def test_field_length_check(ellipse_mesh):
    s = build_spaces(ellipse_mesh)
    with pytest.raises(ValueError):
        ComplexStokesField(s, np.zeros(3), np.zeros(s.n_pressure))


def test_real_part_resolve(ellipse_solution, gravity_case):
    """Re-solving the real Stokes problem with traction data (u_i . n) n gives (u_r, p_r)."""
    mesh, s, st, _, _ = ellipse_solution
    mats = matrices(s)
    k = stokes_operator(s, mats, gravity_case.alpha, 0.0).real
    rhs = np.zeros(s.n_total)
    rhs[:s.n_velocity] = load_vector(s, gravity_case.forcing).real + mats.robin @ st.u_i
    sys_ = reduce_system(s, k, rhs, np.zeros(len(s.constrained)))
    full = sys_.expand(solve_sparse(sys_.matrix, sys_.rhs.real)).real
    np.testing.assert_allclose(full[:s.n_velocity], st.u_r, atol=1e-8)
    np.testing.assert_allclose(full[s.n_velocity:], st.p_r, atol=1e-8)


def test_equivalence_oracle(circle_mesh, gravity_case):
    """Where the imaginary parts are small, the two free-boundary conditions nearly hold."""
    for mesh in (circle_mesh, project(circle_mesh)):
        s = build_spaces(mesh)
        st = solve_state(mesh, s, gravity_case)
        eps = max(np.abs(st.u_i).max(), np.abs(st.p_i).max())
        geo = boundary_geometry(mesh)
        h = geo.edge_lengths.max()
        loop = geo.loop_nodes
        un = np.einsum("ki,ki->k", st.nodal_velocity()[loop].real, geo.node_normals)
        assert np.abs(un).max() <= 10 * (eps + h ** 2)
        u_d, u_n = solve_auxiliary_states(mesh, s, gravity_case)
        assert np.abs(st.u_r - u_n.u).max() <= 10 * (eps + h ** 2)


def test_auxiliary_optimal_annulus(circle_mesh, gravity_case):
    s = build_spaces(circle_mesh)
    u_d, u_n = solve_auxiliary_states(circle_mesh, s, gravity_case)
    assert np.abs(u_d.u).max() < 1e-2 and np.abs(u_n.u).max() < 1e-2
    assert np.std(u_d.p - u_n.p) < 1e-3
    # zero-mean pressure gauge of u_D
    assert np.ones(s.n_pressure) @ matrices(s).mass_p1 @ u_d.p == pytest.approx(0, abs=1e-12)
    # u_D . n vanishes at the Sigma vertices
    geo = boundary_geometry(circle_mesh)
    un = np.einsum("ki,ki->k", u_d.nodal_velocity()[geo.loop_nodes], geo.node_normals)
    assert np.abs(un).max() < 1e-13


def test_ellipse_classical_costs_positive(ellipse_solution, gravity_case):
    mesh, s, st, ad, _ = ellipse_solution
    u_d, u_n = solve_auxiliary_states(mesh, s, gravity_case)
    d = diagnostics(mesh, gravity_case, st, ad, u_d, u_n)
    assert d.J_KV > 0 and d.J_D > 0 and d.J_N > 0
    assert all(np.isfinite(v) and v >= 0 for v in d.as_dict().values())


def test_optimal_annulus_costs_decrease(circle_mesh, gravity_case):
    vals = []
    for mesh in (circle_mesh, project(circle_mesh)):
        s = build_spaces(mesh)
        u_d, u_n = solve_auxiliary_states(mesh, s, gravity_case)
        vals.append(classical_costs(mesh, s, gravity_case, u_d, u_n))
    for c, f in zip(*vals):
        assert f < c
    assert max(vals[1]) < 1e-4


def test_rotation_invariance(ellipse_mesh, gravity_case):
    angle = 0.7
    q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    rotated = ellipse_mesh.with_nodes(ellipse_mesh.nodes @ q.T)
    out = []
    for mesh, case in ((ellipse_mesh, gravity_case), (rotated, gravity_case.rotated(angle))):
        s = build_spaces(mesh)
        st = solve_state(mesh, s, case)
        u_d, u_n = solve_auxiliary_states(mesh, s, case)
        out.append((cost_J(mesh, st),) + classical_costs(mesh, s, case, u_d, u_n))
    np.testing.assert_allclose(out[1], out[0], rtol=1e-9)
