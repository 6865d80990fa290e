"""Compare the compiled and NumPy element kernels.

Run with ``python benchmarks/bench_kernels.py``.  Also times a complete
state solve to show how the kernels compare with the sparse LU.
"""

import time

import numpy as np

from ccbm_stokes.fem import kernels
from ccbm_stokes.fem.quadrature import triangle_rule
from ccbm_stokes.fem.reference import p1_values, p2_gradients, p2_values
from ccbm_stokes.fem.spaces import build_spaces
from ccbm_stokes.expressions import VectorField
from ccbm_stokes.mesh import GAMMA, SIGMA, Circle, generate_annulus, refine
from ccbm_stokes.state import PhysicsCase, solve_state


def best_of(fn, repeat=5):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    pts, qw = triangle_rule(4)
    refs = (p2_gradients(pts), p2_values(pts), p1_values(pts), qw)
    mesh = generate_annulus(0.4, Circle(1.0), 30, 70)
    proj = {GAMMA: Circle(0.4).project, SIGMA: Circle(1.0).project}
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])
    case = PhysicsCase(0.01, VectorField.parse(["-10*x", "-10*y"]), VectorField.zero())
    print(f"{'triangles':>10} " + " ".join(f"{b + ' [ms]':>14}" for b in backends)
          + f" {'speedup':>8} {'state solve [ms]':>17}")
    for level in range(4):
        if level:
            mesh = refine(mesh, proj)
        times = [best_of(lambda b=b: kernels.p2p1_element_matrices(
            mesh.nodes, mesh.triangles, *refs, backend=b)) for b in backends]
        speed = times[0] / times[-1] if len(times) > 1 else float("nan")
        solve_t = best_of(lambda: solve_state(mesh, build_spaces(mesh), case), repeat=1)
        print(f"{mesh.n_triangles:>10} " + " ".join(f"{1e3 * t:>14.2f}" for t in times)
              + f" {speed:>8.2f} {1e3 * solve_t:>17.1f}")
    if len(backends) > 1:
        a = kernels.p2p1_element_matrices(mesh.nodes, mesh.triangles, *refs, backend="python")
        b = kernels.p2p1_element_matrices(mesh.nodes, mesh.triangles, *refs, backend="compiled")
        print("max abs difference:", max(float(np.max(np.abs(x - y))) for x, y in zip(a, b)))


if __name__ == "__main__":
    main()
