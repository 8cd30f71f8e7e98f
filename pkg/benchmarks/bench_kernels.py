"""Timing of the compiled kernels against the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py`` after installing the
package.  Each kernel is evaluated on the operator data of a real
discretization and the two backends are checked to agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nlgc import kernels
from nlgc.constraint_solver import Discretization, SolveConfig
from nlgc.convex_geometry import ConvexBody
from nlgc.domain_obstacles import Domain, ExteriorData
from nlgc.nonlocal_operators import KernelSpec


def _best(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def setups(h2: float):
    yield "1D h=1/256", SolveConfig(Domain.interval(), ConvexBody.interval(), ExteriorData.radial_quadratic(1, 0.4),
                                    KernelSpec(s=0.7), 1 / 256, check_exterior=False)
    yield f"2D h={h2:g}", SolveConfig(Domain.disk(), ConvexBody.square(), ExteriorData.radial_quadratic(2, 0.25),
                                      KernelSpec(s=0.5), h2, check_exterior=False)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--h2", type=float, default=1 / 16)
    args = ap.parse_args(argv)
    try:
        cy = kernels.get_backend("cython")
    except RuntimeError:
        print("compiled kernels not built; nothing to compare")
        return 1
    py = kernels.get_backend("python")
    print(f"{'case':<14}{'kernel':<22}{'python [s]':>12}{'cython [s]':>12}{'speedup':>9}{'max diff':>11}")
    for name, cfg in setups(args.h2):
        d = Discretization(cfg)
        U = d.ext(0.5 * (d.rho - d.rho_bar))
        w = d.stencil.weights
        calls = {
            "apply_nodes": lambda be: kernels.apply_nodes(U, d.flat, d.offs, w, d.lp, d.ln, be=be),
            "jacobian_nodes": lambda be: kernels.jacobian_nodes(U, d.flat, d.offs, w, d.lp, d.ln, d.unk, d.N, be=be),
            "hamiltonian": lambda be: kernels.upwind_hamiltonian(U, d.flat, d.grad_nbr, d.grad_coef, d.h, be=be),
        }
        for kname, f in calls.items():
            diff = float(np.abs(f(py) - f(cy)).max())
            tp = _best(lambda: f(py), args.repeat)
            tc = _best(lambda: f(cy), args.repeat)
            print(f"{name:<14}{kname:<22}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}{diff:>11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
