"""Benchmark the element assembly kernels: compiled extension vs NumPy.

Assembles the Poisson stiffness matrix and load vector for the smooth
quarter-annulus benchmark with both kernel implementations, reports the
median wall time of each, and cross-checks that they produce the same
system.

Usage: python3 benchmarks/bench_assembly.py [--level N] [--degree P]
       [--regularity R] [--repeats K]
"""

import argparse
import statistics
import time

import numpy as np

from sparseiga._kernels import _fallback, kernel_backend
from sparseiga.analysis import regular_annulus_problem
from sparseiga.assembly import DiscreteSpace, assemble_poisson

try:
    from sparseiga._kernels import _compiled
except ImportError:
    _compiled = None


def time_assembly(space, patch, forcing, kernel, repeats):
    times = []
    system = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        system = assemble_poisson(space, patch, forcing, kernel=kernel.local_poisson_systems)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), system


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--level", type=int, default=5, help="dyadic level per direction")
    parser.add_argument("--degree", type=int, default=3)
    parser.add_argument("--regularity", type=int, default=2)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    problem = regular_annulus_problem(2, args.degree, args.regularity)
    space = DiscreteSpace.from_levels(
        (args.level, args.level), args.degree, args.regularity
    )
    print(
        f"assembly benchmark: level {args.level}, degree {args.degree}, "
        f"regularity {args.regularity}, {space.n_dofs} dofs "
        f"(active backend: {kernel_backend()})"
    )

    t_fallback, sys_fb = time_assembly(
        space, problem.patch, problem.forcing, _fallback, args.repeats
    )
    print(f"  numpy fallback : {t_fallback * 1e3:9.1f} ms")

    if _compiled is None:
        print("  compiled       : not built (pip install -e . rebuilds it)")
        return

    t_compiled, sys_c = time_assembly(
        space, problem.patch, problem.forcing, _compiled, args.repeats
    )
    print(f"  compiled       : {t_compiled * 1e3:9.1f} ms")
    print(f"  speedup        : {t_fallback / t_compiled:9.2f}x")

    gap_a = np.max(np.abs((sys_fb.matrix - sys_c.matrix).toarray()))
    gap_b = np.max(np.abs(sys_fb.rhs - sys_c.rhs))
    print(f"  agreement      : matrix {gap_a:.2e}, rhs {gap_b:.2e}")
    if max(gap_a, gap_b) > 1e-12:
        raise SystemExit("kernel implementations disagree")


if __name__ == "__main__":
    main()
