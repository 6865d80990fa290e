"""Annular triangulations with a fixed inner boundary and a free outer boundary.

A :class:`Mesh` is an immutable value: node coordinates, counterclockwise
triangles and two labelled boundary loops.  Boundary edges are stored in
loop order with the domain on their left, so the outward normal of an edge
``(a, b)`` is the tangent rotated clockwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .errors import GeometryError, InvertedElementError, MeshingError

__all__ = [
    "BoundaryLabel",
    "GAMMA",
    "SIGMA",
    "Mesh",
    "BoundaryGeometry",
    "QualityReport",
    "Circle",
    "Ellipse",
    "PolarSeries",
    "make_mesh",
    "validate_mesh",
    "generate_annulus",
    "deform",
    "boundary_geometry",
    "quality",
    "refine",
    "unique_edges",
    "signed_areas",
]


class BoundaryLabel(enum.IntEnum):
    GAMMA_FIXED = 1
    SIGMA_FREE = 2


GAMMA = BoundaryLabel.GAMMA_FIXED
SIGMA = BoundaryLabel.SIGMA_FREE


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of an annulus.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (T, 3) int array, counterclockwise
    boundary_edges : (E, 2) int array, each loop stored contiguously and in order
    edge_labels : (E,) int array of :class:`BoundaryLabel` values
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_labels: np.ndarray
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes, float))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64))
        object.__setattr__(self, "boundary_edges", _frozen(self.boundary_edges, np.int64))
        object.__setattr__(self, "edge_labels", _frozen(self.edge_labels, np.int64))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges_of(self, label) -> np.ndarray:
        return self.boundary_edges[self.edge_labels == int(label)]

    def loop(self, label) -> np.ndarray:
        """Ordered node indices of one boundary loop."""
        return self.edges_of(label)[:, 0]

    def with_nodes(self, nodes) -> "Mesh":
        return Mesh(nodes, self.triangles, self.boundary_edges, self.edge_labels)


@dataclass(frozen=True)
class BoundaryGeometry:
    """Normals, tangents and arclength data of one boundary loop."""

    label: int
    loop_nodes: np.ndarray  # (n,) ordered node indices
    edges: np.ndarray  # (n, 2) node indices, edge k = (loop[k], loop[k+1])
    edge_lengths: np.ndarray
    edge_tangents: np.ndarray
    edge_normals: np.ndarray
    node_normals: np.ndarray  # (n, 2), row k belongs to loop_nodes[k]
    node_weights: np.ndarray  # lumped arclength per node

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())


@dataclass(frozen=True)
class QualityReport:
    min_radius_ratio: float
    max_radius_ratio: float
    min_area: float
    min_sigma_edge: float
    max_sigma_edge: float


# ---------------------------------------------------------------------------
# closed curves


class ClosedCurve:
    """Counterclockwise closed curve parametrised over ``[0, 2*pi)``.

    Subclasses implement ``__call__``; the parameter should be close to the
    polar angle so that blending with a concentric circle stays simple.
    """

    def __call__(self, t):  # pragma: no cover - abstract
        raise NotImplementedError

    def derivative(self, t, eps=1e-6):
        return (self(t + eps) - self(t - eps)) / (2 * eps)

    def project(self, points, iterations=8):
        """Closest points on the curve (local Newton from a dense sample)."""
        points = np.atleast_2d(np.asarray(points, float))
        ts = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        dense = self(ts)
        d2 = ((points[:, None, :] - dense[None, :, :]) ** 2).sum(-1)
        t = ts[np.argmin(d2, axis=1)]
        eps = 1e-5
        for _ in range(iterations):
            c = self(t)
            d1 = self.derivative(t, eps)
            d2c = (self(t + eps) - 2 * c + self(t - eps)) / eps**2
            r = c - points
            g = (r * d1).sum(-1)
            h = (d1 * d1).sum(-1) + (r * d2c).sum(-1)
            h = np.where(np.abs(h) > 1e-14, h, 1.0)
            t = t - g / h
        return self(t)


@dataclass(frozen=True)
class Circle(ClosedCurve):
    radius: float
    center: tuple = (0.0, 0.0)

    def __call__(self, t):
        t = np.asarray(t, float)
        return np.stack([self.center[0] + self.radius * np.cos(t),
                         self.center[1] + self.radius * np.sin(t)], axis=-1)

    def project(self, points, iterations=0):
        p = np.atleast_2d(np.asarray(points, float)) - np.asarray(self.center)
        r = np.hypot(p[:, 0], p[:, 1])
        return np.asarray(self.center) + p * (self.radius / r)[:, None]


@dataclass(frozen=True)
class Ellipse(ClosedCurve):
    """``x**2/a**2 + y**2/b**2 = 1``."""

    a: float
    b: float

    def __call__(self, t):
        t = np.asarray(t, float)
        return np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)


@dataclass(frozen=True)
class PolarSeries(ClosedCurve):
    """Star-shaped curve ``r(phi) = a0 + sum_k a_k cos(k phi) + b_k sin(k phi)``."""

    a0: float
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def radius(self, t):
        t = np.asarray(t, float)
        r = np.full_like(t, self.a0)
        for k, c in enumerate(self.cos_coeffs, start=1):
            r = r + c * np.cos(k * t)
        for k, s in enumerate(self.sin_coeffs, start=1):
            r = r + s * np.sin(k * t)
        return r

    def __call__(self, t):
        t = np.asarray(t, float)
        r = self.radius(t)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


# ---------------------------------------------------------------------------
# helpers


def signed_areas(nodes, triangles) -> np.ndarray:
    p0, p1, p2 = (nodes[triangles[:, k]] for k in range(3))
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def unique_edges(triangles):
    """Unique undirected edges and the per-triangle edge map.

    Local edge ``k`` of a triangle joins local vertices ``k`` and ``(k+1) % 3``.
    Returns ``(edges, tri_edges)`` with ``edges`` sorted row-wise.
    """
    triangles = np.asarray(triangles)
    local = np.stack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1)
    flat = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(flat, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


def _polygon_area(poly) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _points_in_polygon(points, poly) -> np.ndarray:
    x, y = points[:, 0][:, None], points[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return (crosses & (x < xint)).sum(axis=1) % 2 == 1


def _resample(curve, n, phase=0.0, samples=4096):
    """``n`` points equally spaced in arclength, starting at ``phase`` spacings."""
    ts = np.linspace(0.0, 2 * np.pi, samples + 1)
    pts = curve(ts)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = (np.arange(n) + phase) / n * s[-1]
    return curve(np.interp(targets, s, ts)), s[-1]


def _orient_and_order(nodes, triangles, boundary_edges, labels):
    triangles = np.array(triangles, dtype=np.int64)
    flip = signed_areas(nodes, triangles) < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    directed = {}
    for tri in triangles:
        for k in range(3):
            directed[(int(tri[k]), int(tri[(k + 1) % 3]))] = True
    oriented = []
    for (a, b) in np.asarray(boundary_edges, dtype=np.int64):
        a, b = int(a), int(b)
        oriented.append((a, b) if (a, b) in directed else (b, a))
    oriented = np.array(oriented, dtype=np.int64).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.int64)
    out_edges, out_labels = [], []
    for lab in sorted(set(labels.tolist())):
        sub = oriented[labels == lab]
        succ = {int(a): int(b) for a, b in sub}
        start = int(sub[0, 0])
        order = [start]
        while len(order) < len(sub):
            nxt = succ.get(order[-1])
            if nxt is None or nxt == start:
                break
            order.append(nxt)
        if len(order) != len(sub) or succ.get(order[-1]) != start:
            raise MeshingError(f"boundary label {lab} does not form a single closed loop")
        loop = np.array(order)
        out_edges.append(np.stack([loop, np.roll(loop, -1)], axis=1))
        out_labels.append(np.full(len(loop), lab))
    if not out_edges:
        return triangles, np.zeros((0, 2), np.int64), np.zeros(0, np.int64)
    return triangles, np.concatenate(out_edges), np.concatenate(out_labels)


def make_mesh(nodes, triangles, boundary_edges, labels) -> Mesh:
    """Build a mesh from raw arrays, fixing orientation and loop order."""
    nodes = np.asarray(nodes, float)
    triangles, edges, labels = _orient_and_order(nodes, triangles, boundary_edges, labels)
    return Mesh(nodes, triangles, edges, labels)


def validate_mesh(mesh: Mesh) -> None:
    """Raise :class:`MeshingError` unless all mesh invariants hold."""
    areas = signed_areas(mesh.nodes, mesh.triangles)
    if np.any(areas <= 0):
        raise MeshingError(f"{int(np.sum(areas <= 0))} triangles with non-positive area")
    edges, tri_edges = unique_edges(mesh.triangles)
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    free = {tuple(e) for e in edges[counts == 1].tolist()}
    listed = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    if free != listed:
        raise MeshingError("boundary edges do not match the triangulation boundary")
    if np.any(counts > 2):
        raise MeshingError("non-manifold edge")
    labels = set(mesh.edge_labels.tolist())
    if labels != {int(GAMMA), int(SIGMA)}:
        raise MeshingError(f"expected both boundary labels, found {sorted(labels)}")
    gamma = mesh.nodes[mesh.loop(GAMMA)]
    sigma = mesh.nodes[mesh.loop(SIGMA)]
    if not np.all(_points_in_polygon(gamma, sigma)):
        raise MeshingError("fixed boundary is not inside the free boundary")


# ---------------------------------------------------------------------------
# generation


def generate_annulus(inner_radius, outer_curve, n_inner, n_outer, target_h=None,
                     smoothing=2) -> Mesh:
    """Triangulate the region between a circle and an enclosing curve.

    The inner circle (centred at the origin) carries ``n_inner`` equally
    spaced nodes labelled :data:`GAMMA`; ``outer_curve`` carries ``n_outer``
    nodes equally spaced in arclength labelled :data:`SIGMA`.  The interior
    is filled with staggered layers of points obtained by blending the two
    curves, triangulated by Delaunay and cleaned by a few Laplacian passes.

    Parameters
    ----------
    inner_radius : float
    outer_curve : ClosedCurve or callable
        Maps an array of parameters in ``[0, 2*pi)`` to ``(n, 2)`` points,
        counterclockwise.
    n_inner, n_outer : int
        Boundary node counts, at least 8 each.
    target_h : float, optional
        Interior spacing.  Defaults to the mean of the two boundary spacings.
    """
    if inner_radius <= 0:
        raise GeometryError("inner radius must be positive")
    if n_inner < 8 or n_outer < 8:
        raise GeometryError("boundary loops need at least 8 nodes each")
    ts = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    dense = np.asarray(outer_curve(ts), float)
    if _polygon_area(dense) <= 0:
        raise GeometryError("outer curve must be counterclockwise")
    if not _points_in_polygon(np.zeros((1, 2)), dense)[0]:
        raise GeometryError("outer curve does not enclose the inner circle")
    if np.min(np.hypot(dense[:, 0], dense[:, 1])) <= inner_radius:
        raise GeometryError("outer curve intersects or lies inside the inner circle")

    inner = Circle(inner_radius)
    gamma_pts = inner(2 * np.pi * np.arange(n_inner) / n_inner)
    sigma_pts, perim_out = _resample(outer_curve, n_outer)
    h_in = 2 * np.pi * inner_radius / n_inner
    h_out = perim_out / n_outer
    gap = float(np.mean(np.hypot(*(dense - inner(ts)).T)))
    h_mid = target_h if target_h is not None else 0.5 * (h_in + h_out)
    if h_mid <= 0:
        raise GeometryError("target_h must be positive")
    n_layers = max(1, int(round(gap / (h_mid * np.sqrt(3) / 2))))

    interior = []
    for j in range(1, n_layers):
        s = j / n_layers
        layer = (lambda t, s=s: (1 - s) * inner(t) + s * np.asarray(outer_curve(t)))
        _, perim = _resample(layer, 8, samples=1024)
        h_j = target_h if target_h is not None else h_in + s * (h_out - h_in)
        n_j = max(8, int(round(perim / h_j)))
        pts, _ = _resample(layer, n_j, phase=0.5 * (j % 2), samples=2048)
        interior.append(pts)
    interior = np.concatenate(interior) if interior else np.zeros((0, 2))

    nodes = np.concatenate([gamma_pts, sigma_pts, interior])
    n_fixed = n_inner + n_outer
    gamma_loop = np.arange(n_inner)
    sigma_loop = n_inner + np.arange(n_outer)

    triangles = _triangulate(nodes, gamma_pts, sigma_pts)
    for _ in range(smoothing):
        if len(nodes) == n_fixed:
            break
        nodes = _laplace_smooth(nodes, triangles, n_fixed)
        triangles = _triangulate(nodes, gamma_pts, sigma_pts)

    # Gamma is traversed clockwise (domain to its left), Sigma counterclockwise.
    g_edges = np.stack([gamma_loop[::-1], np.roll(gamma_loop[::-1], -1)], axis=1)
    s_edges = np.stack([sigma_loop, np.roll(sigma_loop, -1)], axis=1)
    edges = np.concatenate([g_edges, s_edges])
    labels = np.concatenate([np.full(n_inner, int(GAMMA)), np.full(n_outer, int(SIGMA))])
    try:
        mesh = make_mesh(nodes, triangles, edges, labels)
    except MeshingError:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        raise MeshingError(str(exc)) from exc
    used = np.zeros(len(nodes), bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise MeshingError(f"{int((~used).sum())} nodes are not attached to any triangle")
    validate_mesh(mesh)
    return mesh


def _triangulate(nodes, gamma_poly, sigma_poly):
    try:
        tri = Delaunay(nodes)
    except Exception as exc:
        raise MeshingError(f"Delaunay triangulation failed: {exc}") from exc
    simplices = tri.simplices
    centroids = nodes[simplices].mean(axis=1)
    keep = _points_in_polygon(centroids, sigma_poly) & ~_points_in_polygon(centroids, gamma_poly)
    simplices = simplices[keep]
    areas = signed_areas(nodes, simplices)
    simplices[areas < 0] = simplices[areas < 0][:, [0, 2, 1]]
    if np.any(np.abs(areas) < 1e-14):
        simplices = simplices[np.abs(areas) >= 1e-14]
    return simplices


def _laplace_smooth(nodes, triangles, n_fixed):
    n = len(nodes)
    rows = np.concatenate([triangles[:, [0, 1, 2]].ravel(), triangles[:, [1, 2, 0]].ravel()])
    cols = np.concatenate([triangles[:, [1, 2, 0]].ravel(), triangles[:, [0, 1, 2]].ravel()])
    pairs = np.unique(np.stack([rows, cols], axis=1), axis=0)
    deg = np.bincount(pairs[:, 0], minlength=n).astype(float)
    acc = np.zeros_like(nodes)
    np.add.at(acc, pairs[:, 0], nodes[pairs[:, 1]])
    out = nodes.copy()
    movable = np.arange(n) >= n_fixed
    movable &= deg > 0
    out[movable] = acc[movable] / deg[movable, None]
    return out


# ---------------------------------------------------------------------------
# operations


def deform(mesh: Mesh, theta, t: float) -> Mesh:
    """Move every node ``x`` to ``x + t * theta(x)`` keeping connectivity.

    ``theta`` is an ``(N, 2)`` array (or an object with a ``values`` array)
    that vanishes on the fixed boundary.
    """
    values = np.asarray(getattr(theta, "values", theta), float)
    if values.shape != mesh.nodes.shape:
        raise ValueError(f"displacement shape {values.shape} != nodes shape {mesh.nodes.shape}")
    if np.any(values[mesh.loop(GAMMA)] != 0.0):
        raise ValueError("displacement must vanish on the fixed boundary")
    if t == 0:
        return mesh.with_nodes(mesh.nodes)
    nodes = mesh.nodes + t * values
    areas = signed_areas(nodes, mesh.triangles)
    if not np.all(areas > 0):
        raise InvertedElementError(
            f"{int(np.sum(areas <= 0))} triangles inverted at step t={t:g}")
    return mesh.with_nodes(nodes)


def boundary_geometry(mesh: Mesh, label=SIGMA) -> BoundaryGeometry:
    edges = mesh.edges_of(label)
    if len(edges) == 0:
        raise MeshingError(f"mesh has no boundary edges labelled {int(label)}")
    d = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
    lengths = np.hypot(d[:, 0], d[:, 1])
    tangents = d / lengths[:, None]
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    # node k sits between edge k-1 (incoming) and edge k (outgoing); with two
    # edges per node the angle-weighted average is the bisector
    summed = normals + np.roll(normals, 1, axis=0)
    node_normals = summed / np.hypot(summed[:, 0], summed[:, 1])[:, None]
    weights = 0.5 * (lengths + np.roll(lengths, 1))
    return BoundaryGeometry(int(label), edges[:, 0].copy(), edges, lengths, tangents,
                            normals, node_normals, weights)


def quality(mesh: Mesh) -> QualityReport:
    p = mesh.nodes[mesh.triangles]
    a = np.hypot(*(p[:, 1] - p[:, 2]).T)
    b = np.hypot(*(p[:, 2] - p[:, 0]).T)
    c = np.hypot(*(p[:, 0] - p[:, 1]).T)
    area = signed_areas(mesh.nodes, mesh.triangles)
    pos = np.maximum(area, 0.0)
    inr = 2 * pos / (a + b + c)
    with np.errstate(divide="ignore", invalid="ignore"):
        circ = a * b * c / (4 * pos)
        ratio = np.where(pos > 0, inr / circ, 0.0)
    s = mesh.edges_of(SIGMA)
    lengths = np.hypot(*(mesh.nodes[s[:, 1]] - mesh.nodes[s[:, 0]]).T) if len(s) else np.zeros(1)
    return QualityReport(float(ratio.min()), float(ratio.max()), float(area.min()),
                         float(lengths.min()), float(lengths.max()))


def refine(mesh: Mesh, projectors=None) -> Mesh:
    """Uniform red refinement (each triangle split into four).

    ``projectors`` maps boundary labels to callables that snap new boundary
    midpoints onto the exact curve.
    """
    projectors = projectors or {}
    edges, tri_edges = unique_edges(mesh.triangles)
    n = mesh.n_nodes
    mid = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    lookup = {tuple(e): k for k, e in enumerate(edges.tolist())}
    new_edges, new_labels = [], []
    for (a, b), lab in zip(mesh.boundary_edges.tolist(), mesh.edge_labels.tolist()):
        k = lookup[(min(a, b), max(a, b))]
        new_edges += [(a, n + k), (n + k, b)]
        new_labels += [lab, lab]
    for lab, proj in projectors.items():
        ks = [lookup[(min(a, b), max(a, b))]
              for (a, b), l in zip(mesh.boundary_edges.tolist(), mesh.edge_labels.tolist())
              if l == int(lab)]
        if ks:
            mid[ks] = proj(mid[ks])
    nodes = np.concatenate([mesh.nodes, mid])
    t = mesh.triangles
    m = n + tri_edges  # m[:, 0] on edge (v0, v1), m[:, 1] on (v1, v2), m[:, 2] on (v2, v0)
    tris = np.concatenate([
        np.stack([t[:, 0], m[:, 0], m[:, 2]], axis=1),
        np.stack([m[:, 0], t[:, 1], m[:, 1]], axis=1),
        np.stack([m[:, 2], m[:, 1], t[:, 2]], axis=1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
    ])
    out = Mesh(nodes, tris, np.array(new_edges), np.array(new_labels))
    if np.any(signed_areas(out.nodes, out.triangles) <= 0):
        raise MeshingError("refinement produced inverted triangles")
    return out
