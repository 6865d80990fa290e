import numpy as np
import pytest

from ccbm_stokes.errors import DegenerateGradientError, InvertedElementError, StallError
from ccbm_stokes.mesh import GAMMA, deform
from ccbm_stokes.optimizer import (HISTORY_COLUMNS, OptConfig, evaluate, line_search, propose_step,
                                   run)


def test_propose_step_examples():
    assert propose_step(0.5, 2.0, 1.0) == 0.25
    assert propose_step(1.0, 4.0, 0.5) == 0.125
    assert propose_step(0.0, 0.0, 1.0) == 0.0
    with pytest.raises(DegenerateGradientError):
        propose_step(1.0, 0.0, 1.0)


def test_config_validation(gravity_case):
    with pytest.raises(ValueError):
        OptConfig(case=gravity_case, mu=0.0)
    with pytest.raises(ValueError):
        OptConfig(case=gravity_case, backtrack_factor=1.0)


def test_line_search_zero_direction_stalls(ellipse_mesh, gravity_case):
    cfg = OptConfig(case=gravity_case)
    with pytest.raises(StallError):
        line_search(ellipse_mesh, np.zeros((ellipse_mesh.n_nodes, 2)), 1.0, cfg, J_old=1.0)


def test_line_search_accepts_first_step(ellipse_mesh, gravity_case):
    cfg = OptConfig(case=gravity_case)
    ev = evaluate(ellipse_mesh, cfg)
    t0 = propose_step(ev.J, ev.theta.h1_norm_sq, 1.0)
    t, mesh, J, nb = line_search(ellipse_mesh, ev.theta, t0, cfg, J_old=ev.J)
    assert nb == 0 and t == t0 and J < ev.J


def test_line_search_backtracks_on_inversion(ellipse_mesh, gravity_case):
    cfg = OptConfig(case=gravity_case, compute_diagnostics=False)
    theta = evaluate(ellipse_mesh, cfg).theta.values

    def valid(t):
        try:
            deform(ellipse_mesh, theta, t)
            return True
        except InvertedElementError:
            return False

    lo, hi = 0.0, 1.0
    while valid(hi):
        hi *= 2
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if valid(mid) else (lo, mid)
    t0 = 1.2 * hi
    t, _, _, nb = line_search(ellipse_mesh, theta, t0, cfg, J_old=1.0, cost=lambda m: 0.0)
    assert nb == 1 and t == 0.5 * t0


def test_line_search_exhausts(ellipse_mesh, gravity_case):
    cfg = OptConfig(case=gravity_case, max_backtracks=3)
    theta = np.ones((ellipse_mesh.n_nodes, 2))
    theta[ellipse_mesh.loop(GAMMA)] = 0.0
    with pytest.raises(StallError):
        line_search(ellipse_mesh, theta, 1e-6, cfg, J_old=1.0, cost=lambda m: 2.0)


def test_run_zero_iterations(ellipse_mesh, gravity_case):
    h = run(OptConfig(case=gravity_case, max_iters=0), ellipse_mesh)
    assert len(h.records) == 1 and h.stop_reason == "max_iters"
    assert h.final_mesh is ellipse_mesh


def test_run_monotone_and_deterministic(ellipse_mesh, gravity_case, tmp_path):
    cfg = OptConfig(case=gravity_case, max_iters=3)
    a = run(cfg, ellipse_mesh)
    b = run(cfg, ellipse_mesh)
    assert np.all(np.diff(a.costs) < 0)
    assert np.array_equal(a.costs, b.costs)
    assert np.array_equal(a.final_mesh.nodes, b.final_mesh.nodes)
    for r in a.records:
        assert r.descent_residual < 1e-10
        assert r.quality.min_area > 0
    a.to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0].split(",") == HISTORY_COLUMNS and len(lines) == 5


def test_run_smaller_mu_still_descends(ellipse_mesh, gravity_case):
    h = run(OptConfig(case=gravity_case, max_iters=2, mu=0.5, compute_diagnostics=False),
            ellipse_mesh)
    assert np.all(np.diff(h.costs) < 0)


def test_run_stops_at_gradient_floor(circle_mesh, gravity_case):
    h = run(OptConfig(case=gravity_case, max_iters=10, gradient_norm_floor=1e-2,
                      compute_diagnostics=False), circle_mesh)
    assert len(h.records) <= 2 and h.stop_reason == "gradient_norm_floor"


def test_run_zero_cost(circle_mesh, zero_case):
    h = run(OptConfig(case=zero_case, max_iters=5), circle_mesh)
    assert h.stop_reason == "zero_cost" and h.records[0].J == 0


def test_callback_sees_every_iterate(ellipse_mesh, gravity_case):
    seen = []
    run(OptConfig(case=gravity_case, max_iters=1, compute_diagnostics=False), ellipse_mesh,
        callback=lambda k, m, ev: seen.append((k, ev.J)))
    assert [k for k, _ in seen] == [0, 1]
