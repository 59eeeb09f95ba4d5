"""Execution of combination plans, serially or on a worker pool.

Component solves are independent, so a plan parallelizes trivially; the
report also predicts the makespan a given core count would achieve under
longest-processing-time list scheduling of the measured solve times.
"""

from __future__ import annotations

import csv
import heapq
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import TYPE_CHECKING

from sparseiga.combination import CombinationPlan, solve_component

if TYPE_CHECKING:
    from sparseiga.analysis import BenchmarkProblem

__all__ = ["RunReport", "optimized_makespan", "run_plan", "write_timing_csv"]


def _lpt_makespan(ordered_times, cores: int) -> float:
    """Makespan of list scheduling with jobs assigned in the given order."""
    if cores < 1:
        raise ValueError(f"core count must be >= 1, got {cores}")
    free = [0.0] * cores
    heapq.heapify(free)
    for t in ordered_times:
        if t < 0.0:
            raise ValueError("job times must be nonnegative")
        heapq.heappush(free, heapq.heappop(free) + float(t))
    return max(free)


def optimized_makespan(times, cores: int) -> float:
    """LPT schedule estimate: longest jobs first onto the earliest-free core."""
    ordered = sorted(times, key=lambda t: -float(t))
    return _lpt_makespan(ordered, cores)


@dataclass(frozen=True)
class RunReport:
    """Timing summary of one plan execution.

    components holds (beta, dofs, solve seconds) in plan order; wall_time
    is the elapsed time of the whole run as observed by the caller.
    """

    components: tuple
    wall_time: float

    @property
    def serial_time(self) -> float:
        return float(sum(t for _, _, t in self.components))

    @property
    def total_dofs(self) -> int:
        return int(sum(n for _, n, _ in self.components))

    @property
    def max_component_dofs(self) -> int:
        return int(max(n for _, n, _ in self.components))

    def optimized_time(self, cores: int) -> float:
        """LPT makespan of the measured times; ties broken by lex index."""
        ordered = sorted(self.components, key=lambda item: (-item[2], item[0]))
        return _lpt_makespan([t for _, _, t in ordered], cores)


def run_plan(plan: CombinationPlan, problem: "BenchmarkProblem", workers=1, quad_points=None):
    """Solve every component of a plan; returns (solutions, RunReport).

    Solutions come back in plan term order.  workers > 1 distributes the
    solves over a process pool; per-component times are measured inside
    the workers, so the report's serial_time is pool-size independent.
    """
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    betas = plan.betas
    t0 = time.perf_counter()
    if workers == 1 or len(betas) <= 1:
        solutions = [solve_component(problem, beta, quad_points) for beta in betas]
    else:
        task = partial(solve_component, problem, quad_points=quad_points)
        with ProcessPoolExecutor(max_workers=min(workers, len(betas))) as pool:
            solutions = list(pool.map(task, betas))
    wall = time.perf_counter() - t0
    report = RunReport(
        tuple((s.beta, s.n_dofs, s.solve_time) for s in solutions), wall
    )
    return solutions, report


def write_timing_csv(path, report: RunReport, cores=()) -> None:
    """Per-component timing rows plus serial/optimized summary rows.

    Summary rows reuse the first index column as a label ("serial",
    "cores_<C>") and carry the total dofs.
    """
    if not report.components:
        raise ValueError("report has no components")
    d = len(report.components[0][0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"beta_{i + 1}" for i in range(d)] + ["dofs", "time_s"])
        for beta, dofs, t in report.components:
            writer.writerow([*beta, dofs, repr(t)])
        filler = [""] * (d - 1)
        writer.writerow(
            ["serial", *filler, report.total_dofs, repr(report.serial_time)]
        )
        for c in cores:
            writer.writerow(
                [
                    f"cores_{int(c)}",
                    *filler,
                    report.total_dofs,
                    repr(report.optimized_time(int(c))),
                ]
            )
