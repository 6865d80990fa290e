"""Command-line entry point ``ccbm-stokes``.

Errors are reported on stderr as a single line ``error[<category>]: <message>``
and mapped to exit codes 2 (parse), 3 (solver), 4 (mesh) and 5 (stall).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import casefile
from .errors import CCBMError, IoError
from .fem.spaces import build_spaces
from .optimizer import run
from .shape import bump_field, curvature, fd_gradient_check, shape_derivative_boundary
from .state import (diagnostics, solve_adjoint, solve_auxiliary_states, solve_state)
from .vtk import export_vtk, sigma_density, standard_fields

DEFAULT_T_LADDER = (1e-2, 1e-3, 1e-4)


def _outdir(args, cf):
    out = Path(args.out if args.out else cf.output.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _print_pairs(pairs):
    for k, v in pairs:
        print(f"{k}={v:.6e}" if isinstance(v, float) else f"{k}={v}")


def cmd_solve(args):
    cf = casefile.load(args.config)
    mesh = cf.geometry.build()
    spaces = build_spaces(mesh)
    state = solve_state(mesh, spaces, cf.case)
    adjoint = solve_adjoint(mesh, spaces, cf.case, state)
    curv = curvature(mesh, spaces, cf.config.c_N)
    functional = shape_derivative_boundary(mesh, state, adjoint, curv, case=cf.case)
    u_d, u_n = solve_auxiliary_states(mesh, spaces, cf.case)
    d = diagnostics(mesh, cf.case, state, adjoint, u_d, u_n)
    out = _outdir(args, cf)
    export_vtk(mesh, standard_fields(state, adjoint, sigma_density(mesh, functional)),
               out / "solution.vtk")
    _print_pairs(d.as_dict().items())
    return 0


def cmd_diagnostics(args):
    cf = casefile.load(args.config)
    mesh = cf.geometry.build()
    spaces = build_spaces(mesh)
    state = solve_state(mesh, spaces, cf.case)
    adjoint = solve_adjoint(mesh, spaces, cf.case, state)
    u_d, u_n = solve_auxiliary_states(mesh, spaces, cf.case)
    d = diagnostics(mesh, cf.case, state, adjoint, u_d, u_n)
    _print_pairs([("J", d.J), ("J_KV", d.J_KV), ("J_D", d.J_D), ("J_N", d.J_N)])
    return 0


def cmd_optimize(args):
    cf = casefile.load(args.config)
    config = cf.config
    if args.max_iters is not None:
        config.max_iters = args.max_iters
    out = _outdir(args, cf)
    stride = args.snapshots if args.snapshots is not None else cf.output.snapshot_stride

    def snapshot(k, mesh, ev):
        if stride and k % stride == 0:
            export_vtk(mesh, standard_fields(ev.state, ev.adjoint,
                                             sigma_density(mesh, ev.functional)),
                       out / f"snapshot_{k:04d}.vtk")

    history = run(config, cf.geometry.build(), callback=snapshot)
    history.to_csv(out / "history.csv")
    if cf.output.vtk:
        m = history.final_mesh
        export_vtk(m, standard_fields(history.final_state, history.final_adjoint,
                                      sigma_density(m, history.final_functional)),
                   out / "final.vtk")
    last = history.records[-1]
    _print_pairs([("iterations", last.k), ("J_initial", history.records[0].J), ("J_final", last.J),
                  ("grad_h1_norm", last.grad_h1_norm), ("stop", history.stop_reason)])
    return 0


def cmd_check_gradient(args):
    cf = casefile.load(args.config)
    mesh = cf.geometry.build()
    theta = bump_field(mesh, lambda x, y: np.stack([x * x + 0.5 * y, y + x * y]),
                       inner=cf.geometry.inner_radius)
    report = fd_gradient_check(mesh, cf.case, theta, DEFAULT_T_LADDER, cf.config.c_N)
    out = _outdir(args, cf)
    report.to_csv(out / "gradient_check.csv")
    print(f"dJ_boundary={report.dJ_boundary:.10e}")
    print(f"dJ_distributed={report.dJ_distributed:.10e}")
    for t, q, eb, ed in zip(report.t, report.fd_quotients, report.err_boundary,
                            report.err_distributed):
        print(f"t={t:g} fd={q:.10e} err_boundary={eb:.3e} err_distributed={ed:.3e}")
    return 0


def cmd_mms(args):
    from .mms import convergence_study
    table = convergence_study(levels=args.levels)
    lines = table.lines()
    print("\n".join(lines))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "mms.csv").write_text("\n".join(lines) + "\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ccbm-stokes",
                                description="Stokes free-boundary solver (coupled complex boundary method)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="case file path or bundled case name (e.g. paper_2d.json)")
        sp.add_argument("--out", help="output directory (default: from the case file)")
        sp.add_argument("--max-iters", type=int, dest="max_iters", help="override max_iters")
        sp.add_argument("--seed", type=int, help="accepted for compatibility; runs are deterministic")
        sp.add_argument("--snapshots", type=int, help="write a VTK snapshot every N iterations")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("solve", help="one state and adjoint solve with export"))
    common(sub.add_parser("optimize", help="run the shape descent"))
    common(sub.add_parser("check-gradient", help="finite-difference check of the shape gradient"))
    mms = sub.add_parser("mms", help="manufactured-solution convergence table")
    common(mms, config_required=False)
    mms.add_argument("--levels", type=int, default=3)
    common(sub.add_parser("diagnostics", help="classical costs J_KV, J_D, J_N"))
    return p


COMMANDS = {
    "solve": cmd_solve,
    "optimize": cmd_optimize,
    "check-gradient": cmd_check_gradient,
    "mms": cmd_mms,
    "diagnostics": cmd_diagnostics,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except CCBMError as exc:
        msg = " ".join(str(exc).split())
        print(f"error[{exc.category}]: {msg}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
