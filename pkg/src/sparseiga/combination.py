"""Combination technique over anisotropic tensor-product components.

A sparse-grid solution at level J is a signed sum of cheap anisotropic
Galerkin solves indexed by per-direction level vectors beta.  This module
builds the classical simplex coefficient plans and their generalization to
arbitrary downward-closed index sets, solves individual components,
evaluates combined solutions, and computes hierarchical-surplus profits
with a greedy knapsack selector.
"""

from __future__ import annotations

import csv
import itertools
import time
from dataclasses import dataclass
from math import comb
from typing import TYPE_CHECKING

import numpy as np

from sparseiga.assembly import (
    DiscreteSpace,
    QuadGrid,
    assemble_poisson,
)
from sparseiga.linsolve import solve_spd

if TYPE_CHECKING:
    from sparseiga.analysis import BenchmarkProblem

__all__ = [
    "CombinationPlan",
    "ComponentSolution",
    "ProfitRow",
    "simplex_set",
    "combination_coefficients",
    "general_coefficients",
    "solve_component",
    "evaluate_combined",
    "surplus_norm",
    "profit_table",
    "dantzig_select",
    "write_profit_csv",
]


@dataclass(frozen=True)
class CombinationPlan:
    """Signed component plan: lexicographically sorted (beta, coefficient).

    Coefficients are integers summing to 1, so combining the components
    reproduces constants exactly.
    """

    d: int
    terms: tuple
    level: int | None = None

    def __post_init__(self):
        terms = tuple((tuple(int(b) for b in beta), int(c)) for beta, c in self.terms)
        if not terms:
            raise ValueError("a combination plan needs at least one term")
        betas = [beta for beta, _ in terms]
        for beta, c in terms:
            if len(beta) != self.d:
                raise ValueError(f"index {beta} does not have {self.d} entries")
            if any(b < 0 for b in beta):
                raise ValueError(f"negative level in index {beta}")
            if c == 0:
                raise ValueError(f"zero coefficient stored for {beta}")
        if len(set(betas)) != len(betas):
            raise ValueError("duplicate indices in plan")
        if sorted(betas) != betas:
            terms = tuple(sorted(terms))
        total = sum(c for _, c in terms)
        if total != 1:
            raise ValueError(f"plan coefficients sum to {total}, expected 1")
        object.__setattr__(self, "terms", terms)

    @property
    def betas(self) -> list:
        return [beta for beta, _ in self.terms]

    @property
    def coefficients(self) -> dict:
        return dict(self.terms)

    def __len__(self) -> int:
        return len(self.terms)


def simplex_set(d: int, level: int) -> list:
    """All multi-indices beta >= 0 with |beta| <= level, in lex order."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    out = [
        beta
        for beta in itertools.product(range(level + 1), repeat=d)
        if sum(beta) <= level
    ]
    return sorted(out)


def combination_coefficients(d: int, level: int) -> CombinationPlan:
    """Classical combination plan for the simplex of total level `level`.

    Nonzero coefficients sit on the top d layers:
    (-1)**(level - |beta|) * C(d - 1, level - |beta|).
    """
    terms = []
    for beta in simplex_set(d, level):
        t = level - sum(beta)
        if 0 <= t <= d - 1:
            terms.append((beta, (-1) ** t * comb(d - 1, t)))
    return CombinationPlan(d, tuple(terms), level=level)


def is_downward_closed(index_set) -> bool:
    """True if the set contains every componentwise-smaller neighbor."""
    betas = {tuple(b) for b in index_set}
    for beta in betas:
        for axis, b in enumerate(beta):
            if b > 0:
                lower = beta[:axis] + (b - 1,) + beta[axis + 1 :]
                if lower not in betas:
                    return False
    return True


def general_coefficients(index_set) -> CombinationPlan:
    """Combination plan for an arbitrary downward-closed index set.

    The coefficient of beta is the signed count of binary shifts that stay
    inside the set: sum over k in {0,1}^d of (-1)**|k| [beta + k in set].
    Terms whose coefficient vanishes are dropped.
    """
    betas = sorted({tuple(int(b) for b in beta) for beta in index_set})
    if not betas:
        raise ValueError("index set is empty")
    d = len(betas[0])
    if any(len(b) != d for b in betas):
        raise ValueError("index set mixes dimensions")
    if any(b < 0 for beta in betas for b in beta):
        raise ValueError("index set contains negative levels")
    if not is_downward_closed(betas):
        raise ValueError("index set is not downward closed")
    members = set(betas)
    terms = []
    for beta in betas:
        c = 0
        for k in itertools.product((0, 1), repeat=d):
            if tuple(b + kk for b, kk in zip(beta, k)) in members:
                c += (-1) ** sum(k)
        if c != 0:
            terms.append((beta, c))
    return CombinationPlan(d, tuple(terms))


@dataclass
class ComponentSolution:
    """Galerkin solution on one anisotropic component space.

    Coefficients cover every degree of freedom (boundary entries zero);
    solve_time covers space construction, assembly, and the linear solve.
    """

    beta: tuple
    space: DiscreteSpace
    coefficients: np.ndarray
    solve_time: float

    @property
    def n_dofs(self) -> int:
        return self.space.n_dofs

    def eval_grid(self, points_per_dir, gradient=False):
        return self.space.eval_grid(self.coefficients, points_per_dir, gradient)


def solve_component(problem: "BenchmarkProblem", beta, quad_points=None) -> ComponentSolution:
    """Solve the Poisson problem on the component space of level vector beta.

    A component whose space has no interior degrees of freedom (degree 1 at
    level 0) yields the zero function rather than an error.
    """
    beta = tuple(int(b) for b in beta)
    t0 = time.perf_counter()
    space = DiscreteSpace.from_levels(
        beta, problem.degree, problem.regularity, problem.grading
    )
    if space.interior_dofs().size == 0:
        coeffs = np.zeros(space.n_dofs)
    else:
        system = assemble_poisson(space, problem.patch, problem.forcing, quad_points)
        coeffs = system.expand(solve_spd(system.matrix, system.rhs))
    elapsed = time.perf_counter() - t0
    return ComponentSolution(beta, space, coeffs, elapsed)


def _component_lookup(components) -> dict:
    if isinstance(components, dict):
        return {tuple(k): v for k, v in components.items()}
    return {tuple(c.beta): c for c in components}


def evaluate_combined(plan: CombinationPlan, components, points_per_dir, gradient=False):
    """Signed sum of component evaluations on a tensor parameter grid.

    Accumulation runs in the plan's lexicographic term order, so results
    are bitwise reproducible for a fixed plan regardless of how the
    components were produced.
    """
    lookup = _component_lookup(components)
    vals = None
    grads = None
    for beta, coeff in plan.terms:
        if beta not in lookup:
            raise KeyError(f"no component solution supplied for index {beta}")
        comp = lookup[beta]
        if gradient:
            v, g = comp.eval_grid(points_per_dir, gradient=True)
        else:
            v = comp.eval_grid(points_per_dir)
        if vals is None:
            vals = coeff * v
            grads = coeff * g if gradient else None
        else:
            vals += coeff * v
            if gradient:
                grads += coeff * g
    if gradient:
        return vals, grads
    return vals


def _binary_shifts(beta):
    d = len(beta)
    for k in itertools.product((0, 1), repeat=d):
        lower = tuple(b - kk for b, kk in zip(beta, k))
        if all(b >= 0 for b in lower):
            yield (-1) ** sum(k), lower


def surplus_norm(problem: "BenchmarkProblem", beta, cache=None, quad_points=None):
    """L2 norm of the hierarchical surplus at beta, plus the component cost.

    The surplus is the alternating sum of the solutions on beta and its
    componentwise-lower binary neighbors, with absent (negative) levels
    contributing zero.  Returns (norm, dofs of the beta component).

    A dict passed as `cache` collects component solutions keyed by index
    and is reused across calls.
    """
    beta = tuple(int(b) for b in beta)
    if cache is None:
        cache = {}
    q = quad_points if quad_points is not None else problem.degree + 1
    grid = QuadGrid(problem.patch, beta, q, problem.grading)
    total = None
    for sign, lower in _binary_shifts(beta):
        if lower not in cache:
            cache[lower] = solve_component(problem, lower, quad_points)
        vals = cache[lower].eval_grid(grid.points_per_dir)
        total = sign * vals if total is None else total + sign * vals
    norm = float(np.sqrt(grid.integrate(np.ravel(total) ** 2)))
    return norm, cache[beta].n_dofs


@dataclass(frozen=True)
class ProfitRow:
    """Surplus-to-cost record for one component index."""

    beta: tuple
    surplus_l2: float
    dofs: int

    @property
    def profit(self) -> float:
        return self.surplus_l2 / self.dofs


def profit_table(problem: "BenchmarkProblem", beta_max, quad_points=None) -> list:
    """Profit rows for every index in the box 0 <= beta <= beta_max.

    beta_max may be an int (same bound every direction) or a level vector.
    Component solutions are shared across the surplus evaluations.
    """
    d = problem.patch.dim
    if np.isscalar(beta_max):
        beta_max = (int(beta_max),) * d
    beta_max = tuple(int(b) for b in beta_max)
    if len(beta_max) != d or any(b < 0 for b in beta_max):
        raise ValueError(f"invalid profit box bound {beta_max}")
    cache = {}
    rows = []
    for beta in itertools.product(*(range(b + 1) for b in beta_max)):
        norm, dofs = surplus_norm(problem, beta, cache, quad_points)
        rows.append(ProfitRow(beta, norm, dofs))
    return rows


def dantzig_select(rows, budget):
    """Greedy knapsack selection of profit rows under a cost budget.

    Rows are ranked by profit (descending, ties by lexicographic index)
    and taken in order; selection stops at the first row that no longer
    fits the remaining budget.  Returns (selected rows in pick order,
    total surplus, total dofs).
    """
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    ranked = sorted(rows, key=lambda r: (-r.profit, r.beta))
    picked = []
    revenue = 0.0
    cost = 0
    for row in ranked:
        if cost + row.dofs > budget:
            break
        picked.append(row)
        revenue += row.surplus_l2
        cost += row.dofs
    return picked, revenue, cost


def write_profit_csv(path, rows) -> None:
    """Write profit rows as CSV: beta_1..beta_d, surplus_l2, dofs, profit."""
    rows = list(rows)
    if not rows:
        raise ValueError("no profit rows to write")
    d = len(rows[0].beta)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [f"beta_{i + 1}" for i in range(d)] + ["surplus_l2", "dofs", "profit"]
        )
        for row in rows:
            writer.writerow(
                [*row.beta, repr(row.surplus_l2), row.dofs, repr(row.profit)]
            )
