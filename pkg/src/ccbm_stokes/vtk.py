"""Legacy ASCII VTK (version 3.0) output."""

from __future__ import annotations

import numpy as np

from .errors import IoError
from .mesh import Mesh

_FMT = "%.17g"


def _num(v) -> str:
    return _FMT % float(v)


def standard_fields(state=None, adjoint=None, density=None):
    """Ordered point data for a solved configuration (vertex values)."""
    fields = {}
    if state is not None:
        nv = state.spaces.n_vertices
        vel = state.nodal_velocity()[:nv]
        fields["u_r"] = vel.real
        fields["u_i"] = vel.imag
        fields["p_r"] = state.p_r
        fields["p_i"] = state.p_i
    if adjoint is not None:
        nv = adjoint.spaces.n_vertices
        vel = adjoint.nodal_velocity()[:nv]
        fields["v_r"] = vel.real
        fields["v_i"] = vel.imag
        fields["q_r"] = adjoint.p_r
        fields["q_i"] = adjoint.p_i
    if density is not None:
        fields["g_sigma"] = density
    return fields


def sigma_density(mesh, functional):
    """Scatter the lumped Sigma density to a vertex array (zero off Sigma)."""
    g = np.zeros(mesh.n_nodes)
    g[functional.loop_nodes] = functional.density
    return g


def export_vtk(mesh: Mesh, fields, path, title="ccbm_stokes"):
    """Write ``mesh`` and vertex ``fields`` (name -> (N,) or (N, 2) array)."""
    n = mesh.n_nodes
    tris, edges = mesh.triangles, mesh.boundary_edges
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{_num(x)} {_num(y)} 0" for x, y in mesh.nodes]
    nc = len(tris) + len(edges)
    lines.append(f"CELLS {nc} {4 * len(tris) + 3 * len(edges)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines += [f"2 {a} {b}" for a, b in edges]
    lines.append(f"CELL_TYPES {nc}")
    lines += ["5"] * len(tris) + ["3"] * len(edges)
    lines += [f"CELL_DATA {nc}", "SCALARS boundary_label int 1", "LOOKUP_TABLE default"]
    lines += ["0"] * len(tris) + [str(int(l)) for l in mesh.edge_labels]
    if fields:
        lines.append(f"POINT_DATA {n}")
    for name, values in fields.items():
        arr = np.asarray(values, float)
        if arr.shape == (n,):
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_num(v) for v in arr]
        elif arr.shape == (n, 2):
            lines.append(f"VECTORS {name} double")
            lines += [f"{_num(a)} {_num(b)} 0" for a, b in arr]
        else:
            raise IoError(f"field {name!r} has shape {arr.shape}, expected ({n},) or ({n}, 2)")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_vtk(path):
    """Minimal reader for files written by :func:`export_vtk`.

    Returns ``(points_text, points, point_data)`` where ``points_text`` keeps
    the coordinate lines verbatim.
    """
    try:
        with open(path) as fh:
            tokens = fh.read().split("\n")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    i = 0
    data = {}
    text, pts = [], None
    n = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            text = tokens[i + 1:i + 1 + n]
            pts = np.array([[float(v) for v in t.split()] for t in text])
            i += n
        elif line.startswith("SCALARS") and not line.startswith("SCALARS boundary_label"):
            name = line.split()[1]
            data[name] = np.array([float(v) for v in tokens[i + 2:i + 2 + n]])
            i += 1 + n
        elif line.startswith("VECTORS"):
            name = line.split()[1]
            data[name] = np.array([[float(v) for v in t.split()] for t in tokens[i + 1:i + 1 + n]])
            i += n
        i += 1
    return text, pts, data
