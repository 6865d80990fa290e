import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccbm_stokes.errors import GeometryError, InvertedElementError
from ccbm_stokes.mesh import (GAMMA, SIGMA, Circle, Ellipse, PolarSeries, boundary_geometry,
                              deform, generate_annulus, make_mesh, quality, refine,
                              signed_areas, validate_mesh)


def polygon_area(p):
    return 0.5 * (np.dot(p[:, 0], np.roll(p[:, 1], -1)) - np.dot(np.roll(p[:, 0], -1), p[:, 1]))


def test_reference_ellipse_mesh(ellipse_mesh):
    m = ellipse_mesh
    validate_mesh(m)
    assert len(m.loop(GAMMA)) == 30 and len(m.loop(SIGMA)) == 70
    g = m.nodes[m.loop(GAMMA)]
    np.testing.assert_allclose(np.hypot(g[:, 0], g[:, 1]), 0.4, rtol=1e-14)
    s = m.nodes[m.loop(SIGMA)]
    np.testing.assert_allclose(s[:, 0] ** 2 + s[:, 1] ** 2 / 1.1 ** 2, 1.0, atol=1e-6)
    assert np.all(signed_areas(m.nodes, m.triangles) > 0)


def test_concentric_circles(circle_mesh):
    s = circle_mesh.nodes[circle_mesh.loop(SIGMA)]
    np.testing.assert_allclose(np.hypot(s[:, 0], s[:, 1]), 1.0, rtol=1e-12)


def test_inner_not_enclosed():
    with pytest.raises(GeometryError):
        generate_annulus(1.0, Circle(0.5), 30, 70)


def test_too_few_nodes():
    with pytest.raises(GeometryError):
        generate_annulus(0.4, Circle(1.0), 4, 70)


def test_each_boundary_edge_in_one_triangle(circle_mesh):
    m = circle_mesh
    count = {}
    for t in m.triangles:
        for k in range(3):
            e = tuple(sorted((int(t[k]), int(t[(k + 1) % 3]))))
            count[e] = count.get(e, 0) + 1
    for a, b in m.boundary_edges:
        assert count[tuple(sorted((int(a), int(b))))] == 1


def test_area_identity(ellipse_mesh):
    m = ellipse_mesh
    total = signed_areas(m.nodes, m.triangles).sum()
    outer = polygon_area(m.nodes[m.loop(SIGMA)])
    inner = -polygon_area(m.nodes[m.loop(GAMMA)])  # Gamma loop runs clockwise
    assert total == pytest.approx(outer - inner, rel=1e-12)


def test_deform_identity_bitwise(circle_mesh):
    out = deform(circle_mesh, np.zeros_like(circle_mesh.nodes), 1.0)
    assert np.array_equal(out.nodes, circle_mesh.nodes)
    out0 = deform(circle_mesh, np.ones_like(circle_mesh.nodes) * (circle_mesh.nodes[:, :1] > 0.5), 0)
    assert np.array_equal(out0.nodes, circle_mesh.nodes)


def radial_bump(mesh):
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    bump = np.clip((r - 0.4) / 0.6, 0, 1) ** 2
    th = mesh.nodes * bump[:, None]
    th[mesh.loop(GAMMA)] = 0.0
    return th


def test_deform_radial_increase(circle_mesh):
    th = radial_bump(circle_mesh)
    out = deform(circle_mesh, th, 0.01)
    s = circle_mesh.loop(SIGMA)
    np.testing.assert_allclose(np.hypot(*out.nodes[s].T), 1.0 + 0.01 * np.hypot(*th[s].T),
                               rtol=1e-14)
    assert np.array_equal(out.triangles, circle_mesh.triangles)


def test_deform_affine_in_t(circle_mesh):
    th = radial_bump(circle_mesh)
    for t in (0.003, -0.02, 0.05):
        out = deform(circle_mesh, th, t)
        assert np.array_equal(out.nodes, circle_mesh.nodes + t * th)


def test_deform_inversion(circle_mesh):
    m = circle_mesh
    k = int(m.loop(SIGMA)[0])
    nbrs = {int(v) for t in m.triangles if k in t for v in t} - {k} - set(m.loop(SIGMA).tolist())
    j = sorted(nbrs)[0]
    th = np.zeros_like(m.nodes)
    th[k] = 1.5 * (m.nodes[j] - m.nodes[k])
    with pytest.raises(InvertedElementError):
        deform(m, th, 1.0)


def test_deform_rejects_gamma_motion(circle_mesh):
    th = np.zeros_like(circle_mesh.nodes)
    th[circle_mesh.loop(GAMMA)[0]] = 1.0
    with pytest.raises(ValueError):
        deform(circle_mesh, th, 0.1)


def test_boundary_geometry_invariants(ellipse_mesh):
    geo = boundary_geometry(ellipse_mesh)
    np.testing.assert_allclose(np.hypot(*geo.node_normals.T), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.hypot(*geo.edge_normals.T), 1.0, atol=1e-12)
    centroid = ellipse_mesh.nodes.mean(axis=0)
    mids = 0.5 * (ellipse_mesh.nodes[geo.edges[:, 0]] + ellipse_mesh.nodes[geo.edges[:, 1]])
    assert np.all(np.einsum("ei,ei->e", geo.edge_normals, mids - centroid) > 0)
    assert geo.node_weights.sum() == pytest.approx(geo.perimeter, rel=1e-12)


def test_circle_normals_and_perimeter(circle_mesh):
    geo = boundary_geometry(circle_mesh)
    p = circle_mesh.nodes[geo.loop_nodes]
    h = geo.edge_lengths.max()
    assert np.max(np.abs(geo.node_normals - p)) <= h ** 2
    assert abs(geo.node_weights.sum() - 2 * np.pi) <= h ** 2


def test_square_edge_normals(square_mesh):
    geo = boundary_geometry(square_mesh)
    axes = {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert {tuple(np.round(n).astype(int)) for n in geo.edge_normals} == axes
    np.testing.assert_allclose(np.abs(geo.edge_normals).max(axis=1), 1.0, atol=1e-15)


def test_normals_flip_under_reflection(ellipse_mesh):
    m = ellipse_mesh
    nodes = m.nodes * np.array([-1.0, 1.0])
    r = make_mesh(nodes, m.triangles, m.boundary_edges, m.edge_labels)
    g0 = boundary_geometry(m)
    g1 = boundary_geometry(r)
    n0 = dict(zip(g0.loop_nodes.tolist(), g0.node_normals))
    for k, n in zip(g1.loop_nodes.tolist(), g1.node_normals):
        np.testing.assert_allclose(n, n0[k] * np.array([-1.0, 1.0]), atol=1e-14)


def test_quality_report(circle_mesh):
    q = quality(circle_mesh)
    assert q.min_area > 0 and 0 < q.min_radius_ratio <= q.max_radius_ratio <= 0.5 + 1e-12
    assert quality(deform(circle_mesh, np.zeros_like(circle_mesh.nodes), 0.0)) == q


def test_quality_equilateral():
    nodes = np.array([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    m = make_mesh(nodes, [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]], [int(SIGMA)] * 3)
    assert quality(m).min_radius_ratio == pytest.approx(0.5, rel=1e-12)


def test_quality_degenerate():
    nodes = np.array([[0, 0], [1, 0], [0.5, 1e-9]])
    m = make_mesh(nodes, [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]], [int(SIGMA)] * 3)
    assert 0 < quality(m).min_area < 1e-9


def test_refine_projects_boundary(circle_mesh):
    r = refine(circle_mesh, {GAMMA: Circle(0.4).project, SIGMA: Circle(1.0).project})
    validate_mesh(r)
    assert r.n_triangles == 4 * circle_mesh.n_triangles
    np.testing.assert_allclose(np.hypot(*r.nodes[r.loop(SIGMA)].T), 1.0, rtol=1e-14)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.7, 1.4), b=st.floats(0.7, 1.4), c1=st.floats(-0.1, 0.1), s2=st.floats(-0.1, 0.1))
def test_generated_meshes_valid(a, b, c1, s2):
    curve = PolarSeries(0.5 * (a + b), (c1,), (0.0, s2))
    m = generate_annulus(0.4, curve, 16, 40)
    validate_mesh(m)
    assert quality(m).min_area > 0


def test_polar_and_ellipse_curves_are_closed():
    for c in (Ellipse(1.0, 1.1), PolarSeries(1.0, (0.1,), (0.05,))):
        np.testing.assert_allclose(c(0.0), c(2 * np.pi), atol=1e-14)
