"""Degree-of-freedom maps for the Taylor-Hood pair (P2 velocity, P1 pressure)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import GAMMA, SIGMA, Mesh, unique_edges


@dataclass(frozen=True, eq=False)
class FeSpacePair:
    """Continuous P2 vector velocity and continuous P1 scalar pressure.

    Scalar P2 indices are the mesh vertices followed by the edge midpoints.
    Velocity DOFs are blocked by component: ``c * n_p2 + i``.  In a full
    coefficient vector the pressure DOFs follow the velocity DOFs.
    """

    mesh: Mesh
    edges: np.ndarray
    tri_edges: np.ndarray
    cells_p2: np.ndarray
    constrained: np.ndarray
    sigma_midpoints: np.ndarray
    gamma_midpoints: np.ndarray
    sigma_triangles: np.ndarray  # triangle owning each Sigma edge, loop order

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_p2(self) -> int:
        return self.n_vertices + self.n_edges

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_p2

    @property
    def n_pressure(self) -> int:
        return self.n_vertices

    @property
    def n_total(self) -> int:
        return self.n_velocity + self.n_pressure

    def p2_points(self) -> np.ndarray:
        nodes = self.mesh.nodes
        mids = 0.5 * (nodes[self.edges[:, 0]] + nodes[self.edges[:, 1]])
        return np.concatenate([nodes, mids])

    def boundary_p2_nodes(self, label) -> np.ndarray:
        """Scalar P2 indices on one boundary (vertices and midpoints)."""
        mids = self.sigma_midpoints if int(label) == int(SIGMA) else self.gamma_midpoints
        return np.concatenate([self.mesh.loop(label), mids])


def _edge_lookup(edges, pairs):
    """Index into ``edges`` of each (unsorted) node pair."""
    key = edges[:, 0] * (edges.max() + 1) + edges[:, 1]
    order = np.argsort(key)
    s = np.sort(pairs, axis=1)
    q = s[:, 0] * (edges.max() + 1) + s[:, 1]
    pos = np.searchsorted(key[order], q)
    return order[pos]


def build_spaces(mesh: Mesh) -> FeSpacePair:
    edges, tri_edges = unique_edges(mesh.triangles)
    n = mesh.n_nodes
    cells = np.concatenate([mesh.triangles, n + tri_edges], axis=1)
    n_p2 = n + len(edges)
    sig = mesh.edges_of(SIGMA)
    gam = mesh.edges_of(GAMMA)
    sigma_mid = n + _edge_lookup(edges, sig) if len(sig) else np.zeros(0, np.int64)
    gamma_mid = n + _edge_lookup(edges, gam) if len(gam) else np.zeros(0, np.int64)
    gamma_nodes = np.concatenate([mesh.loop(GAMMA), gamma_mid]) if len(gam) else np.zeros(0, np.int64)
    constrained = np.sort(np.concatenate([gamma_nodes, gamma_nodes + n_p2])).astype(np.int64)
    owner = np.full(len(edges), -1, np.int64)
    owner[tri_edges.ravel()] = np.repeat(np.arange(len(tri_edges)), 3)
    sigma_tri = owner[sigma_mid - n]
    return FeSpacePair(mesh, edges, tri_edges, cells, constrained, sigma_mid, gamma_mid, sigma_tri)
