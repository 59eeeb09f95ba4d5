"""Benchmark problems, error norms, and convergence studies.

The built-in problems cover the mapped quarter annulus with a manufactured
polynomial solution (full elliptic regularity), the same domains driven by
a constant forcing (limited regularity from the boundary data, where mesh
grading pays off), and a polynomial problem on the unit cube that any
degree >= 2 space reproduces exactly.

Forcing and solution callables are module-level functions so problems can
cross process boundaries when component solves run on a worker pool.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from sparseiga.assembly import QuadGrid
from sparseiga.combination import (
    CombinationPlan,
    combination_coefficients,
    evaluate_combined,
    solve_component,
)
from sparseiga.geometry import NurbsPatch, quarter_annulus, unit_hypercube
from sparseiga.scheduler import run_plan

__all__ = [
    "BenchmarkProblem",
    "ConvergenceRecord",
    "regular_annulus_problem",
    "constant_forcing_problem",
    "polynomial_cube_problem",
    "analytic_evaluator",
    "spline_evaluator",
    "combined_evaluator",
    "error_norms",
    "fit_rate",
    "convergence_study",
    "write_convergence_csv",
    "read_convergence_csv",
    "gamma_sweep",
    "GammaSweepRow",
    "write_gamma_csv",
]


@dataclass(frozen=True)
class BenchmarkProblem:
    """Poisson benchmark: geometry, forcing, discretization parameters.

    solution/solution_gradient are the analytic solution and its physical
    gradient when known, else None (errors then need an overkill
    reference).  Homogeneous Dirichlet conditions are implied throughout.
    """

    name: str
    patch: NurbsPatch
    forcing: Callable
    degree: int
    regularity: int
    grading: float = 1.0
    solution: Callable | None = None
    solution_gradient: Callable | None = None

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if not -1 <= self.regularity <= self.degree - 1:
            raise ValueError(
                f"regularity {self.regularity} invalid for degree {self.degree}"
            )
        if self.grading < 1.0:
            raise ValueError(f"grading must be >= 1, got {self.grading}")


# ---------------------------------------------------------------------------
# closed-form data for the annulus benchmark (all module level, picklable)

def annulus_solution_2d(x):
    """Manufactured solution vanishing on the quarter annulus boundary."""
    xx, yy = x[..., 0], x[..., 1]
    r2 = xx**2 + yy**2
    return -(r2 - 1.0) * (r2 - 4.0) * xx * yy**2


def annulus_gradient_2d(x):
    xx, yy = x[..., 0], x[..., 1]
    gx = (
        -5.0 * xx**4 * yy**2
        - 6.0 * xx**2 * yy**4
        + 15.0 * xx**2 * yy**2
        - yy**6
        + 5.0 * yy**4
        - 4.0 * yy**2
    )
    gy = (
        -2.0 * xx**5 * yy
        - 8.0 * xx**3 * yy**3
        + 10.0 * xx**3 * yy
        - 6.0 * xx * yy**5
        + 20.0 * xx * yy**3
        - 8.0 * xx * yy
    )
    return np.stack([gx, gy], axis=-1)


def annulus_forcing_2d(x):
    """Negative Laplacian of the manufactured annulus solution."""
    xx, yy = x[..., 0], x[..., 1]
    return 2.0 * xx * (
        xx**4 + 22.0 * xx**2 * yy**2 - 5.0 * xx**2 + 21.0 * yy**4 - 45.0 * yy**2 + 4.0
    )


def annulus_solution_3d(x):
    return annulus_solution_2d(x) * np.sin(np.pi * x[..., 2])


def annulus_gradient_3d(x):
    s = np.sin(np.pi * x[..., 2])
    c = np.cos(np.pi * x[..., 2])
    g2 = annulus_gradient_2d(x)
    return np.stack(
        [
            g2[..., 0] * s,
            g2[..., 1] * s,
            annulus_solution_2d(x) * np.pi * c,
        ],
        axis=-1,
    )


def annulus_forcing_3d(x):
    s = np.sin(np.pi * x[..., 2])
    return (annulus_forcing_2d(x) + np.pi**2 * annulus_solution_2d(x)) * s


def constant_one(x):
    return np.ones(x.shape[0])


def cube_solution(x):
    """Product bubble vanishing on the boundary of the unit cube."""
    return np.prod(x * (1.0 - x), axis=-1)


def cube_gradient(x):
    bub = x * (1.0 - x)
    out = np.empty_like(x)
    d = x.shape[-1]
    for m in range(d):
        others = np.prod(np.delete(bub, m, axis=-1), axis=-1)
        out[..., m] = (1.0 - 2.0 * x[..., m]) * others
    return out


def cube_forcing(x):
    bub = x * (1.0 - x)
    d = x.shape[-1]
    total = np.zeros(x.shape[:-1])
    for m in range(d):
        total += 2.0 * np.prod(np.delete(bub, m, axis=-1), axis=-1)
    return total


def regular_annulus_problem(d, degree=2, regularity=None, grading=1.0) -> BenchmarkProblem:
    """Quarter annulus with the manufactured smooth solution."""
    if regularity is None:
        regularity = degree - 1
    if d == 2:
        sol, grad, forc = annulus_solution_2d, annulus_gradient_2d, annulus_forcing_2d
    elif d == 3:
        sol, grad, forc = annulus_solution_3d, annulus_gradient_3d, annulus_forcing_3d
    else:
        raise ValueError(f"regular annulus problem needs d in (2, 3), got {d}")
    return BenchmarkProblem(
        name=f"regular_annulus_{d}d",
        patch=quarter_annulus(d),
        forcing=forc,
        degree=degree,
        regularity=regularity,
        grading=grading,
        solution=sol,
        solution_gradient=grad,
    )


def constant_forcing_problem(d, grading=1.0, degree=3, regularity=None) -> BenchmarkProblem:
    """Quarter annulus with unit forcing; no closed-form solution."""
    if regularity is None:
        regularity = degree - 1
    if d not in (2, 3):
        raise ValueError(f"constant forcing problem needs d in (2, 3), got {d}")
    return BenchmarkProblem(
        name=f"constant_forcing_{d}d",
        patch=quarter_annulus(d),
        forcing=constant_one,
        degree=degree,
        regularity=regularity,
        grading=grading,
    )


def polynomial_cube_problem(d, degree=2, regularity=None) -> BenchmarkProblem:
    """Unit cube with a degree-2 product solution; exact for degree >= 2."""
    if regularity is None:
        regularity = degree - 1
    return BenchmarkProblem(
        name=f"polynomial_cube_{d}d",
        patch=unit_hypercube(d),
        forcing=cube_forcing,
        degree=degree,
        regularity=regularity,
        solution=cube_solution,
        solution_gradient=cube_gradient,
    )


# ---------------------------------------------------------------------------
# evaluation and error measurement

def analytic_evaluator(solution, gradient):
    """Evaluator of a closed-form solution on a QuadGrid."""

    def evaluate(grid: QuadGrid):
        return solution(grid.x), gradient(grid.x)

    return evaluate


def _push_gradient(grid: QuadGrid, param_grad):
    g = param_grad.reshape(-1, grid.x.shape[1])
    return np.einsum("nij,nj->ni", grid.jinv_t, g)


def spline_evaluator(space, coeffs):
    """Evaluator of a single spline field on a QuadGrid."""

    def evaluate(grid: QuadGrid):
        vals, grads = space.eval_grid(coeffs, grid.points_per_dir, gradient=True)
        return np.ravel(vals), _push_gradient(grid, grads)

    return evaluate


def combined_evaluator(plan: CombinationPlan, components):
    """Evaluator of a combined sparse-grid solution on a QuadGrid."""

    def evaluate(grid: QuadGrid):
        vals, grads = evaluate_combined(
            plan, components, grid.points_per_dir, gradient=True
        )
        return np.ravel(vals), _push_gradient(grid, grads)

    return evaluate


def error_norms(solution_eval, reference_eval, grid: QuadGrid):
    """(L2 error, H1 seminorm error) between two evaluators on a grid."""
    va, ga = solution_eval(grid)
    vb, gb = reference_eval(grid)
    dv = va - vb
    dg = ga - gb
    l2 = np.sqrt(grid.integrate(dv * dv))
    h1 = np.sqrt(grid.integrate(np.sum(dg * dg, axis=-1)))
    return float(l2), float(h1)


def fit_rate(levels, errors):
    """Least-squares convergence rate of errors ~ C * 2**(-rate * level).

    Returns (rate, per-step rates); needs at least three positive errors.
    """
    levels = np.asarray(levels, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if levels.shape != errors.shape or levels.ndim != 1:
        raise ValueError("levels and errors must be matching 1D sequences")
    if levels.size < 3:
        raise ValueError("rate fit needs at least three levels")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be positive for a log fit")
    slope = np.polyfit(levels, np.log2(errors), 1)[0]
    steps = np.log2(errors[:-1] / errors[1:])
    return float(-slope), steps


# ---------------------------------------------------------------------------
# convergence studies

@dataclass(frozen=True)
class ConvergenceRecord:
    """One (method, level) row of a convergence study."""

    method: str
    d: int
    degree: int
    regularity: int
    grading: float
    level: int
    n_components: int
    dofs_total: int
    dofs_max_component: int
    l2_error: float
    h1_semi_error: float
    time_serial_s: float
    times_cores: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return 2.0 ** (-self.level)


def _plan_for(method: str, d: int, level: int) -> CombinationPlan:
    if method == "tensor":
        return CombinationPlan(d, (((level,) * d, 1),), level=level)
    if method == "sparse":
        return combination_coefficients(d, level)
    raise ValueError(f"method must be 'tensor' or 'sparse', got {method!r}")


def convergence_study(
    problem: BenchmarkProblem,
    method: str,
    levels,
    cores=(),
    workers=1,
    quad_points=None,
    reference_margin=2,
):
    """Run a method over a level range and measure errors against the
    analytic solution, or against an overkill tensor reference when the
    problem has none.

    The overkill reference lives reference_margin levels above the finest
    requested level, shares the problem's degree, regularity and grading,
    and its solve time stays out of the timing columns.

    Returns a list of ConvergenceRecord.
    """
    levels = [int(j) for j in levels]
    if not levels:
        raise ValueError("no levels requested")
    if any(j < 0 for j in levels):
        raise ValueError("levels must be >= 0")
    d = problem.patch.dim
    q = quad_points if quad_points is not None else problem.degree + 1

    if problem.solution is not None:
        reference = analytic_evaluator(problem.solution, problem.solution_gradient)
        shared_grid = None
    else:
        ref_level = max(levels) + int(reference_margin)
        ref_component = solve_component(problem, (ref_level,) * d, quad_points)
        reference = spline_evaluator(ref_component.space, ref_component.coefficients)
        shared_grid = QuadGrid(problem.patch, (ref_level,) * d, q, problem.grading)

    records = []
    for level in levels:
        plan = _plan_for(method, d, level)
        solutions, report = run_plan(plan, problem, workers, quad_points)
        grid = shared_grid
        if grid is None:
            grid = QuadGrid(problem.patch, (level,) * d, q, problem.grading)
        l2, h1 = error_norms(combined_evaluator(plan, solutions), reference, grid)
        records.append(
            ConvergenceRecord(
                method=method,
                d=d,
                degree=problem.degree,
                regularity=problem.regularity,
                grading=problem.grading,
                level=level,
                n_components=len(plan),
                dofs_total=report.total_dofs,
                dofs_max_component=report.max_component_dofs,
                l2_error=l2,
                h1_semi_error=h1,
                time_serial_s=report.serial_time,
                times_cores={int(c): report.optimized_time(int(c)) for c in cores},
            )
        )
    return records


def write_convergence_csv(path, records, cores=()) -> None:
    """Write study records with the fixed column layout.

    Columns: method, d, p, r, gamma, J, h, n_components, dofs_total,
    dofs_max_component, l2_error, h1_semi_error, time_serial_s, then one
    time_cores_<C>_s column per requested core count.
    """
    cores = [int(c) for c in cores]
    header = [
        "method",
        "d",
        "p",
        "r",
        "gamma",
        "J",
        "h",
        "n_components",
        "dofs_total",
        "dofs_max_component",
        "l2_error",
        "h1_semi_error",
        "time_serial_s",
    ] + [f"time_cores_{c}_s" for c in cores]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in records:
            row = [
                rec.method,
                rec.d,
                rec.degree,
                rec.regularity,
                repr(rec.grading),
                rec.level,
                repr(rec.h),
                rec.n_components,
                rec.dofs_total,
                rec.dofs_max_component,
                repr(rec.l2_error),
                repr(rec.h1_semi_error),
                repr(rec.time_serial_s),
            ] + [repr(rec.times_cores[c]) for c in cores]
            writer.writerow(row)


def read_convergence_csv(path):
    """Read back a file written by write_convergence_csv."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cores = [
            int(name.removeprefix("time_cores_").removesuffix("_s"))
            for name in header
            if name.startswith("time_cores_")
        ]
        records = []
        for row in reader:
            data = dict(zip(header, row))
            records.append(
                ConvergenceRecord(
                    method=data["method"],
                    d=int(data["d"]),
                    degree=int(data["p"]),
                    regularity=int(data["r"]),
                    grading=float(data["gamma"]),
                    level=int(data["J"]),
                    n_components=int(data["n_components"]),
                    dofs_total=int(data["dofs_total"]),
                    dofs_max_component=int(data["dofs_max_component"]),
                    l2_error=float(data["l2_error"]),
                    h1_semi_error=float(data["h1_semi_error"]),
                    time_serial_s=float(data["time_serial_s"]),
                    times_cores={
                        c: float(data[f"time_cores_{c}_s"]) for c in cores
                    },
                )
            )
    return records, cores


# ---------------------------------------------------------------------------
# grading sweep for the low-regularity problem

@dataclass(frozen=True)
class GammaSweepRow:
    """Fitted rates for one (grading, method) pair."""

    gamma: float
    method: str
    d: int
    degree: int
    regularity: int
    l2_rate: float
    h1_semi_rate: float


def gamma_sweep(
    d,
    gammas,
    levels,
    methods=("sparse", "tensor"),
    degree=3,
    regularity=None,
    workers=1,
    fit_from=None,
):
    """Convergence rates of the constant-forcing problem across gradings.

    Returns (rows, records) with one GammaSweepRow per (gamma, method) and
    the underlying ConvergenceRecord list.  fit_from restricts the rate
    fit to levels >= fit_from.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValueError("no gradings requested")
    rows = []
    all_records = []
    for gamma in gammas:
        problem = constant_forcing_problem(d, gamma, degree, regularity)
        for method in methods:
            records = convergence_study(problem, method, levels, workers=workers)
            all_records.extend(records)
            recs = records
            if fit_from is not None:
                recs = [r for r in records if r.level >= fit_from]
            lv = [r.level for r in recs]
            l2_rate, _ = fit_rate(lv, [r.l2_error for r in recs])
            h1_rate, _ = fit_rate(lv, [r.h1_semi_error for r in recs])
            rows.append(
                GammaSweepRow(
                    gamma=gamma,
                    method=method,
                    d=d,
                    degree=problem.degree,
                    regularity=problem.regularity,
                    l2_rate=l2_rate,
                    h1_semi_rate=h1_rate,
                )
            )
    return rows, all_records


def write_gamma_csv(path, rows) -> None:
    """Rate table: gamma, method, d, p, r, l2_rate, h1_semi_rate."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gamma", "method", "d", "p", "r", "l2_rate", "h1_semi_rate"])
        for row in rows:
            writer.writerow(
                [
                    repr(row.gamma),
                    row.method,
                    row.d,
                    row.degree,
                    row.regularity,
                    repr(row.l2_rate),
                    repr(row.h1_semi_rate),
                ]
            )
