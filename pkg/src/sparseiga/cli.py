"""Batch front-end: run solves, convergence studies, profit tables and
grading sweeps from a JSON config, writing CSV tables and JSON summaries.

Exit codes: 0 on success, 1 on solver failure, 2 on a config problem.
Progress goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import (
    _plan_for,
    analytic_evaluator,
    combined_evaluator,
    constant_forcing_problem,
    convergence_study,
    error_norms,
    gamma_sweep,
    polynomial_cube_problem,
    regular_annulus_problem,
    write_convergence_csv,
    write_gamma_csv,
)
from .assembly import QuadGrid
from .combination import dantzig_select, profit_table, write_profit_csv
from .scheduler import run_plan


class ConfigError(ValueError):
    """Raised for any malformed, inconsistent or incomplete config."""


_FIELDS = (
    "geometry",
    "d",
    "r_in",
    "r_out",
    "height",
    "p",
    "regularity",
    "gamma",
    "method",
    "J",
    "J_range",
    "problem",
    "cores",
    "budget_K",
    "output_dir",
    "beta_max",
    "workers",
)

_GEOMETRIES = ("annulus", "cube")
_PROBLEMS = ("regular", "constant", "polynomial")
_METHODS = ("sparse", "tensor")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def load_config(path) -> dict:
    """Read and validate a config file; raises ConfigError on any problem."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
    _validate_fields(raw)
    return raw


def _validate_fields(cfg: dict) -> None:
    if "geometry" in cfg and cfg["geometry"] not in _GEOMETRIES:
        raise ConfigError(f"geometry must be one of {_GEOMETRIES}, got {cfg['geometry']!r}")
    if "problem" in cfg and cfg["problem"] not in _PROBLEMS:
        raise ConfigError(f"problem must be one of {_PROBLEMS}, got {cfg['problem']!r}")
    if "method" in cfg and cfg["method"] not in _METHODS:
        raise ConfigError(f"method must be one of {_METHODS}, got {cfg['method']!r}")
    if "d" in cfg and (not _is_int(cfg["d"]) or cfg["d"] < 1):
        raise ConfigError(f"d must be a positive integer, got {cfg['d']!r}")
    if "p" in cfg and (not _is_int(cfg["p"]) or cfg["p"] < 1):
        raise ConfigError(f"p must be a positive integer, got {cfg['p']!r}")
    if "regularity" in cfg and not _is_int(cfg["regularity"]):
        raise ConfigError(f"regularity must be an integer, got {cfg['regularity']!r}")
    if "p" in cfg and "regularity" in cfg:
        if not -1 <= cfg["regularity"] <= cfg["p"] - 1:
            raise ConfigError(
                f"regularity must lie in [-1, p-1] = [-1, {cfg['p'] - 1}], "
                f"got {cfg['regularity']}"
            )
    if "gamma" in cfg:
        gamma = cfg["gamma"]
        values = gamma if isinstance(gamma, list) else [gamma]
        if not values:
            raise ConfigError("gamma list is empty")
        for g in values:
            if not _is_number(g) or g < 1:
                raise ConfigError(f"gamma values must be numbers >= 1, got {g!r}")
    if "J" in cfg and (not _is_int(cfg["J"]) or cfg["J"] < 0):
        raise ConfigError(f"J must be a non-negative integer, got {cfg['J']!r}")
    if "J_range" in cfg:
        rng = cfg["J_range"]
        ok = (
            isinstance(rng, list)
            and len(rng) == 2
            and all(_is_int(j) for j in rng)
            and 0 <= rng[0] <= rng[1]
        )
        if not ok:
            raise ConfigError(f"J_range must be [lo, hi] with 0 <= lo <= hi, got {rng!r}")
    if "J" in cfg and "J_range" in cfg:
        raise ConfigError("give either J or J_range, not both")
    if "cores" in cfg:
        cores = cfg["cores"]
        if not isinstance(cores, list) or any(not _is_int(c) or c < 1 for c in cores):
            raise ConfigError(f"cores must be a list of positive integers, got {cores!r}")
    if "budget_K" in cfg and (not _is_number(cfg["budget_K"]) or cfg["budget_K"] <= 0):
        raise ConfigError(f"budget_K must be a positive number, got {cfg['budget_K']!r}")
    if "beta_max" in cfg and (not _is_int(cfg["beta_max"]) or cfg["beta_max"] < 0):
        raise ConfigError(f"beta_max must be a non-negative integer, got {cfg['beta_max']!r}")
    if "workers" in cfg and (not _is_int(cfg["workers"]) or cfg["workers"] < 1):
        raise ConfigError(f"workers must be a positive integer, got {cfg['workers']!r}")
    if "output_dir" in cfg and not isinstance(cfg["output_dir"], str):
        raise ConfigError(f"output_dir must be a string, got {cfg['output_dir']!r}")
    for name, default in (("r_in", 1.0), ("r_out", 2.0), ("height", 1.0)):
        if name in cfg:
            if not _is_number(cfg[name]):
                raise ConfigError(f"{name} must be a number, got {cfg[name]!r}")
            if float(cfg[name]) != default:
                raise ConfigError(
                    f"the benchmark problems ship with {name}={default}; "
                    f"got {cfg[name]}"
                )


def _require(cfg: dict, name: str):
    if name not in cfg:
        raise ConfigError(f"missing required config field: {name}")
    return cfg[name]


def _scalar_gamma(cfg: dict) -> float:
    gamma = cfg.get("gamma", 1.0)
    if isinstance(gamma, list):
        raise ConfigError("gamma must be a single number for this command")
    return float(gamma)


def _gamma_list(cfg: dict) -> list:
    gamma = _require(cfg, "gamma")
    return [float(g) for g in (gamma if isinstance(gamma, list) else [gamma])]


def _build_problem(cfg: dict):
    kind = _require(cfg, "problem")
    geometry = _require(cfg, "geometry")
    wants = "cube" if kind == "polynomial" else "annulus"
    if geometry != wants:
        raise ConfigError(f"problem {kind!r} runs on geometry {wants!r}, got {geometry!r}")
    d = _require(cfg, "d")
    kwargs = {}
    if "p" in cfg:
        kwargs["degree"] = cfg["p"]
    if "regularity" in cfg:
        kwargs["regularity"] = cfg["regularity"]
    gamma = _scalar_gamma(cfg)
    if kind == "polynomial":
        if gamma != 1.0:
            raise ConfigError("grading is not supported on the cube benchmark")
        return polynomial_cube_problem(d, **kwargs)
    if kind == "regular":
        return regular_annulus_problem(d, grading=gamma, **kwargs)
    return constant_forcing_problem(d, grading=gamma, **kwargs)


def _levels(cfg: dict) -> list:
    if "J_range" in cfg:
        lo, hi = cfg["J_range"]
        return list(range(lo, hi + 1))
    if "J" in cfg:
        return [cfg["J"]]
    raise ConfigError("missing required config field: J or J_range")


def _cmd_solve(cfg: dict, out_dir: Path, workers: int) -> int:
    problem = _build_problem(cfg)
    method = _require(cfg, "method")
    if "J" not in cfg:
        raise ConfigError("solve needs a single level J")
    level = cfg["J"]
    d = problem.patch.dim
    plan = _plan_for(method, d, level)
    print(f"solve: {problem.name} method={method} J={level} components={len(plan)}")
    solutions, report = run_plan(plan, problem, workers)
    summary = {
        "dofs_total": report.total_dofs,
        "dofs_max_component": report.max_component_dofs,
        "n_components": len(plan),
    }
    if problem.solution is not None:
        grid = QuadGrid(problem.patch, (level + 2,) * d, problem.degree + 1, problem.grading)
        reference = analytic_evaluator(problem.solution, problem.solution_gradient)
        l2, h1 = error_norms(combined_evaluator(plan, solutions), reference, grid)
        summary["l2_error"] = l2
        summary["h1_semi_error"] = h1
        print(f"solve: l2_error={l2:.6e} h1_semi_error={h1:.6e}")
    summary["time_serial_s"] = report.serial_time
    target = out_dir / "solve_summary.json"
    target.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"solve: wrote {target}")
    return 0


def _cmd_convergence(cfg: dict, out_dir: Path, workers: int) -> int:
    problem = _build_problem(cfg)
    method = _require(cfg, "method")
    levels = _levels(cfg)
    cores = tuple(cfg.get("cores", ()))
    print(f"convergence: {problem.name} method={method} J={levels[0]}..{levels[-1]}")
    records = convergence_study(problem, method, levels, cores=cores, workers=workers)
    target = out_dir / "convergence.csv"
    write_convergence_csv(target, records, cores=cores)
    last = records[-1]
    print(f"convergence: J={last.level} l2_error={last.l2_error:.6e}")
    print(f"convergence: wrote {target}")
    return 0


def _cmd_profits(cfg: dict, out_dir: Path, workers: int) -> int:
    problem = _build_problem(cfg)
    bound = _require(cfg, "beta_max")
    budget = _require(cfg, "budget_K")
    print(f"profits: {problem.name} box bound={bound} budget={budget}")
    rows = profit_table(problem, bound)
    table = out_dir / "profits.csv"
    write_profit_csv(table, rows)
    picked, revenue, cost = dantzig_select(rows, budget)
    selection = {
        "budget": budget,
        "selected": [list(row.beta) for row in picked],
        "revenue": revenue,
        "cost": cost,
    }
    target = out_dir / "selection.json"
    target.write_text(json.dumps(selection, indent=2) + "\n")
    print(f"profits: selected {len(picked)} of {len(rows)} components, cost={cost}")
    print(f"profits: wrote {table} and {target}")
    return 0


def _cmd_gamma_sweep(cfg: dict, out_dir: Path, workers: int) -> int:
    if cfg.get("problem", "constant") != "constant":
        raise ConfigError("gamma-sweep runs the constant-forcing benchmark only")
    if cfg.get("geometry", "annulus") != "annulus":
        raise ConfigError("gamma-sweep runs on the annulus geometry only")
    d = _require(cfg, "d")
    gammas = _gamma_list(cfg)
    levels = _levels(cfg)
    if len(levels) < 3:
        raise ConfigError(
            "gamma-sweep fits rates and needs a J_range with at least three levels"
        )
    methods = (cfg["method"],) if "method" in cfg else _METHODS
    kwargs = {}
    if "p" in cfg:
        kwargs["degree"] = cfg["p"]
    if "regularity" in cfg:
        kwargs["regularity"] = cfg["regularity"]
    print(f"gamma-sweep: d={d} gammas={gammas} J={levels[0]}..{levels[-1]}")
    rows, _ = gamma_sweep(d, gammas, levels, methods=methods, workers=workers, **kwargs)
    target = out_dir / "gamma_sweep.csv"
    write_gamma_csv(target, rows)
    for row in rows:
        print(
            f"gamma-sweep: gamma={row.gamma} method={row.method} "
            f"l2_rate={row.l2_rate:.3f} h1_semi_rate={row.h1_semi_rate:.3f}"
        )
    print(f"gamma-sweep: wrote {target}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "convergence": _cmd_convergence,
    "profits": _cmd_profits,
    "gamma-sweep": _cmd_gamma_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseiga",
        description="Sparse-grid isogeometric Poisson benchmark runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in _COMMANDS.items():
        cmd = sub.add_parser(name, help=handler.__doc__)
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--workers", type=int, help="worker processes (overrides config)")
        cmd.add_argument("--output", help="output directory (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        workers = args.workers if args.workers is not None else cfg.get("workers", 1)
        if workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {workers}")
        out_dir = Path(args.output) if args.output else Path(cfg.get("output_dir", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir, workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver-side failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
