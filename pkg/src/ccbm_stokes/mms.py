"""Manufactured solutions for the complex Robin-coupled Stokes system.

The velocity is the curl of ``psi = a x + b y + (r^2 - R^2)^3 chi`` on an
annulus whose free boundary is the circle of radius ``R``.  The cubic
factor makes ``u = (b, -a)`` and ``grad u = 0`` on that circle, so the
pressure ``p = i (b x - a y) / R + (r^2 - R^2) s`` satisfies the Robin
condition ``-p n + alpha du/dn + i (u . n) n = 0`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy

from .expressions import X, Y, VectorField
from .fem.fields import p1_eval, p2_eval, p2_grad, physical_points
from .fem.quadrature import triangle_rule
from .fem.spaces import build_spaces
from .mesh import GAMMA, SIGMA, Circle, generate_annulus, refine
from .state import PhysicsCase, solve_state


@dataclass(frozen=True)
class ManufacturedSolution:
    velocity: tuple  # sympy expressions
    pressure: object
    case: PhysicsCase
    inner_radius: float
    outer_radius: float


def manufactured_solution(alpha=0.5, inner_radius=0.4, outer_radius=1.0) -> ManufacturedSolution:
    R = sympy.Float(outer_radius)
    a = sympy.Float(0.3) + sympy.Float(0.2) * sympy.I
    b = sympy.Float(-0.1) + sympy.Float(0.4) * sympy.I
    r2 = X ** 2 + Y ** 2
    chi = (1 + sympy.I / 2) * (sympy.cos(X) + Y ** 2)
    s = sympy.sin(X) * sympy.cos(Y) - sympy.I * X * Y
    psi = a * X + b * Y + (r2 - R ** 2) ** 3 * chi
    u = (sympy.diff(psi, Y), -sympy.diff(psi, X))
    p = sympy.I * (b * X - a * Y) / R + (r2 - R ** 2) * s
    al = sympy.Float(alpha)
    f = tuple(-al * (sympy.diff(c, X, 2) + sympy.diff(c, Y, 2)) + sympy.diff(p, v)
              for c, v in zip(u, (X, Y)))
    case = PhysicsCase(alpha, VectorField(f), VectorField(u), "manufactured")
    return ManufacturedSolution(u, p, case, inner_radius, outer_radius)


def errors(mesh, spaces, state, sol: ManufacturedSolution):
    """Velocity H1 and pressure L2 errors against the manufactured solution."""
    pts, qw = triangle_rule(6)
    xq = physical_points(mesh, pts)
    x, y = xq[..., 0], xq[..., 1]
    uex = VectorField(sol.velocity)
    ue = uex(x, y)
    ge = uex.gradient(x, y)
    pe = sympy.lambdify((X, Y), sol.pressure, "numpy")(x, y)
    n2 = spaces.n_p2
    det = np.abs(_dets(mesh))
    w = det[:, None] * qw[None]
    e_l2 = e_h1 = 0.0
    for c in range(2):
        coeff = state.u[c * n2:(c + 1) * n2]
        e_l2 += np.sum(w * np.abs(p2_eval(spaces, coeff, pts) - ue[c]) ** 2)
        g = p2_grad(spaces, coeff, pts)
        e_h1 += np.sum(w * (np.abs(g[..., 0] - ge[c, 0]) ** 2 + np.abs(g[..., 1] - ge[c, 1]) ** 2))
    ep = np.sum(w * np.abs(p1_eval(spaces, state.p, pts) - pe) ** 2)
    return float(np.sqrt(e_l2 + e_h1)), float(np.sqrt(ep))


def _dets(mesh):
    p = mesh.nodes[mesh.triangles]
    return ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))


@dataclass
class ConvergenceTable:
    h: list
    velocity_h1: list
    pressure_l2: list

    def rates(self, values):
        h, e = np.asarray(self.h), np.asarray(values)
        return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))

    @property
    def velocity_rates(self):
        return self.rates(self.velocity_h1)

    @property
    def pressure_rates(self):
        return self.rates(self.pressure_l2)

    def lines(self):
        out = ["level,h,velocity_h1,pressure_l2,rate_u,rate_p"]
        ru = [float("nan")] + self.velocity_rates
        rp = [float("nan")] + self.pressure_rates
        for k, (h, eu, ep) in enumerate(zip(self.h, self.velocity_h1, self.pressure_l2)):
            out.append(f"{k},{h:.6g},{eu:.6e},{ep:.6e},{ru[k]:.3f},{rp[k]:.3f}")
        return out


def convergence_study(levels=3, n_inner=16, n_outer=40, alpha=0.5) -> ConvergenceTable:
    """Solve on a coarse annulus and ``levels`` uniform refinements of it."""
    sol = manufactured_solution(alpha)
    mesh = generate_annulus(sol.inner_radius, Circle(sol.outer_radius), n_inner, n_outer)
    proj = {GAMMA: Circle(sol.inner_radius).project, SIGMA: Circle(sol.outer_radius).project}
    table = ConvergenceTable([], [], [])
    for level in range(levels + 1):
        if level:
            mesh = refine(mesh, proj)
        spaces = build_spaces(mesh)
        state = solve_state(mesh, spaces, sol.case)
        eu, ep = errors(mesh, spaces, state, sol)
        s = mesh.edges_of(SIGMA)
        table.h.append(float(np.max(np.hypot(*(mesh.nodes[s[:, 1]] - mesh.nodes[s[:, 0]]).T))))
        table.velocity_h1.append(eu)
        table.pressure_l2.append(ep)
    return table
