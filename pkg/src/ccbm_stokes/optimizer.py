"""Sobolev-gradient descent on the free boundary.

Each iteration solves the state and adjoint systems, forms the H1
gradient ``theta``, proposes the step ``t0 = mu * J / |theta|^2`` and
backtracks until the deformed mesh is valid and the cost decreases.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CCBMError, DegenerateGradientError, InvertedElementError, StallError
from .fem.spaces import build_spaces
from .mesh import Mesh, QualityReport, deform, quality
from .shape import (C_N_DEFAULT, curvature, shape_derivative_boundary, sobolev_gradient)
from .state import (Diagnostics, PhysicsCase, cost_J, diagnostics, solve_adjoint,
                    solve_auxiliary_states, solve_state)

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ["iter", "J", "grad_h1_norm", "step", "backtracks", "J_KV", "J_D", "J_N",
                   "max_u_i", "max_p_i", "min_tri_area"]


@dataclass
class OptConfig:
    """Descent parameters.

    ``geometry`` is any object with a ``build() -> Mesh`` method; it is
    only used when :func:`run` is not given a starting mesh.
    """

    case: Optional[PhysicsCase] = None
    geometry: object = None
    mu: float = 1.0
    max_iters: int = 50
    backtrack_factor: float = 0.5
    max_backtracks: int = 15
    gradient_norm_floor: Optional[float] = None
    c_N: float = C_N_DEFAULT
    compute_diagnostics: bool = True

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_iters < 0 or self.max_backtracks < 0:
            raise ValueError("iteration counts must be non-negative")


@dataclass
class IterationRecord:
    k: int
    J: float
    grad_h1_norm: float
    step: float
    backtracks: int
    diagnostics: Optional[Diagnostics]
    quality: QualityReport
    descent_residual: float

    def row(self):
        d = self.diagnostics
        nan = float("nan")
        return [self.k, self.J, self.grad_h1_norm, self.step, self.backtracks,
                d.J_KV if d else nan, d.J_D if d else nan, d.J_N if d else nan,
                d.max_abs_u_i if d else nan, d.max_abs_p_i if d else nan,
                self.quality.min_area]


@dataclass
class RunHistory:
    records: list = field(default_factory=list)
    final_mesh: Optional[Mesh] = None
    stop_reason: str = ""
    final_state: object = None
    final_adjoint: object = None
    final_gradient: object = None
    final_functional: object = None

    @property
    def costs(self):
        return np.array([r.J for r in self.records])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_COLUMNS)
            for r in self.records:
                w.writerow([v if isinstance(v, int) else repr(float(v)) for v in r.row()])


def propose_step(J, theta_h1_norm_sq, mu) -> float:
    """Initial step ``mu * J / |theta|^2``; zero when ``J`` is zero."""
    if J == 0:
        return 0.0
    if not theta_h1_norm_sq > 1e-300 or not math.isfinite(mu * J / theta_h1_norm_sq):
        raise DegenerateGradientError(
            f"gradient norm squared {theta_h1_norm_sq:g} is degenerate while J = {J:g}")
    return mu * J / theta_h1_norm_sq


def _cost(mesh, case):
    spaces = build_spaces(mesh)
    return cost_J(mesh, solve_state(mesh, spaces, case))


def line_search(mesh, theta, t0, config: OptConfig, J_old=None, cost=None):
    """Backtrack from ``t0`` until the deformed mesh is valid and ``J`` drops.

    Returns ``(t, new_mesh, new_J, backtracks)``.
    """
    case = config.case
    cost = cost or (lambda m: _cost(m, case))
    if J_old is None:
        J_old = cost(mesh)
    values = np.asarray(getattr(theta, "values", theta), float)
    if t0 <= 0 or not np.any(values):
        raise StallError("no descent possible: zero step or zero direction")
    t = t0
    for i in range(config.max_backtracks + 1):
        try:
            trial = deform(mesh, values, t)
        except InvertedElementError:
            t *= config.backtrack_factor
            continue
        J_new = cost(trial)
        if J_new < J_old:
            return t, trial, J_new, i
        t *= config.backtrack_factor
    raise StallError(f"line search failed after {config.max_backtracks} backtracks")


@dataclass
class _Evaluation:
    spaces: object
    state: object
    adjoint: object
    functional: object
    theta: object
    J: float
    diagnostics: Optional[Diagnostics]
    descent_residual: float


def evaluate(mesh, config: OptConfig) -> _Evaluation:
    """State, adjoint, gradient and diagnostics on one mesh."""
    case = config.case
    spaces = build_spaces(mesh)
    state = solve_state(mesh, spaces, case)
    adjoint = solve_adjoint(mesh, spaces, case, state)
    curv = curvature(mesh, spaces, config.c_N)
    functional = shape_derivative_boundary(mesh, state, adjoint, curv, case=case)
    theta = sobolev_gradient(mesh, spaces, state, adjoint, curv, functional=functional)
    J = cost_J(mesh, state)
    nsq = theta.h1_norm_sq
    dj = functional(theta)
    resid = abs(dj + nsq) / nsq if nsq > 0 else abs(dj)
    diag = None
    if config.compute_diagnostics:
        u_d, u_n = solve_auxiliary_states(mesh, spaces, case)
        diag = diagnostics(mesh, case, state, adjoint, u_d, u_n)
    return _Evaluation(spaces, state, adjoint, functional, theta, J, diag, resid)


def run(config: OptConfig, mesh: Optional[Mesh] = None,
        callback: Optional[Callable] = None) -> RunHistory:
    """Run the descent loop; ``callback(k, mesh, evaluation)`` sees every iterate."""
    if config.case is None:
        raise ValueError("config.case is required")
    if mesh is None:
        if config.geometry is None:
            raise ValueError("either a mesh or config.geometry is required")
        mesh = config.geometry.build()
    history = RunHistory()
    step, backtracks = 0.0, 0
    k = 0
    while True:
        try:
            ev = evaluate(mesh, config)
        except CCBMError as exc:
            exc.iteration = k
            raise
        history.records.append(IterationRecord(
            k, ev.J, ev.theta.h1_norm, step, backtracks, ev.diagnostics, quality(mesh),
            ev.descent_residual))
        history.final_mesh, history.final_state = mesh, ev.state
        history.final_adjoint, history.final_gradient = ev.adjoint, ev.theta
        history.final_functional = ev.functional
        if callback is not None:
            callback(k, mesh, ev)
        log.info("iter %d J=%.6e |theta|=%.3e t=%.3e", k, ev.J, ev.theta.h1_norm, step)
        if k >= config.max_iters:
            history.stop_reason = "max_iters"
            break
        floor = config.gradient_norm_floor
        if floor is not None and ev.theta.h1_norm <= floor:
            history.stop_reason = "gradient_norm_floor"
            break
        if ev.J == 0:
            history.stop_reason = "zero_cost"
            break
        try:
            t0 = propose_step(ev.J, ev.theta.h1_norm_sq, config.mu)
            step, mesh, _, backtracks = line_search(mesh, ev.theta, t0, config, J_old=ev.J)
        except (StallError, DegenerateGradientError) as exc:
            history.stop_reason = f"stall: {exc}"
            break
        k += 1
    return history
