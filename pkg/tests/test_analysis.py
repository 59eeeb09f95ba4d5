"""Benchmark problems, error measurement, convergence studies, sweeps."""

import csv

import numpy as np
import pytest

from sparseiga.analysis import (
    BenchmarkProblem,
    ConvergenceRecord,
    analytic_evaluator,
    annulus_forcing_2d,
    annulus_forcing_3d,
    annulus_gradient_2d,
    annulus_gradient_3d,
    annulus_solution_2d,
    annulus_solution_3d,
    constant_forcing_problem,
    convergence_study,
    cube_forcing,
    cube_gradient,
    cube_solution,
    error_norms,
    fit_rate,
    gamma_sweep,
    polynomial_cube_problem,
    read_convergence_csv,
    regular_annulus_problem,
    write_convergence_csv,
    write_gamma_csv,
)
from sparseiga.assembly import QuadGrid
from sparseiga.geometry import quarter_annulus

# ---------------------------------------------------------------------------
# manufactured solutions


def test_annulus_solution_values():
    x = np.array([[1.5, 0.0], [1.5 / np.sqrt(2.0), 1.5 / np.sqrt(2.0)]])
    u = annulus_solution_2d(x)
    assert u[0] == 0.0
    assert abs(u[1] - 945.0 * np.sqrt(2.0) / 512.0) < 1e-12


def _random_annulus_points(rng, n, d):
    r = rng.uniform(1.1, 1.9, size=n)
    theta = rng.uniform(0.1, np.pi / 2 - 0.1, size=n)
    cols = [r * np.cos(theta), r * np.sin(theta)]
    if d == 3:
        cols.append(rng.uniform(0.1, 0.9, size=n))
    return np.stack(cols, axis=1)


def test_annulus_forcing_is_negative_laplacian():
    rng = np.random.default_rng(127)
    h = 1e-4
    for d, sol, forc in (
        (2, annulus_solution_2d, annulus_forcing_2d),
        (3, annulus_solution_3d, annulus_forcing_3d),
    ):
        x = _random_annulus_points(rng, 100, d)
        lap = np.zeros(x.shape[0])
        for m in range(d):
            e = np.zeros(d)
            e[m] = h
            lap += (sol(x + e) - 2.0 * sol(x) + sol(x - e)) / h**2
        np.testing.assert_allclose(forc(x), -lap, atol=1e-4)


def test_cube_forcing_is_negative_laplacian():
    rng = np.random.default_rng(131)
    h = 1e-4
    for d in (2, 3):
        x = rng.uniform(0.1, 0.9, size=(100, d))
        lap = np.zeros(x.shape[0])
        for m in range(d):
            e = np.zeros(d)
            e[m] = h
            lap += (cube_solution(x + e) - 2.0 * cube_solution(x) + cube_solution(x - e)) / h**2
        np.testing.assert_allclose(cube_forcing(x), -lap, atol=1e-6)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(137)
    h = 1e-6
    cases = (
        (2, annulus_solution_2d, annulus_gradient_2d, _random_annulus_points),
        (3, annulus_solution_3d, annulus_gradient_3d, _random_annulus_points),
    )
    for d, sol, grad, sampler in cases:
        x = sampler(rng, 50, d)
        g = grad(x)
        for m in range(d):
            e = np.zeros(d)
            e[m] = h
            fd = (sol(x + e) - sol(x - e)) / (2.0 * h)
            np.testing.assert_allclose(g[:, m], fd, atol=1e-5)
    x = rng.uniform(0.05, 0.95, size=(50, 3))
    g = cube_gradient(x)
    for m in range(3):
        e = np.zeros(3)
        e[m] = h
        fd = (cube_solution(x + e) - cube_solution(x - e)) / (2.0 * h)
        np.testing.assert_allclose(g[:, m], fd, atol=1e-6)


def test_annulus_solution_vanishes_on_boundary():
    t = np.linspace(0.0, 1.0, 50)
    theta = t * np.pi / 2
    pieces = [
        np.stack([np.cos(theta), np.sin(theta)], axis=1),  # inner arc
        2.0 * np.stack([np.cos(theta), np.sin(theta)], axis=1),  # outer arc
        np.stack([1.0 + t, np.zeros_like(t)], axis=1),  # y = 0 edge
        np.stack([np.zeros_like(t), 1.0 + t], axis=1),  # x = 0 edge
    ]
    x = np.concatenate(pieces)
    assert x.shape[0] == 200
    assert np.max(np.abs(annulus_solution_2d(x))) < 1e-10
    # 3D: same traces at mid-height plus the flat top and bottom
    x3 = np.concatenate([x, np.full((200, 1), 0.5)], axis=1)
    assert np.max(np.abs(annulus_solution_3d(x3))) < 1e-10
    interior = _random_annulus_points(np.random.default_rng(139), 50, 2)
    for z in (0.0, 1.0):
        x3 = np.concatenate([interior, np.full((50, 1), z)], axis=1)
        assert np.max(np.abs(annulus_solution_3d(x3))) < 1e-10


def test_cube_solution_center_values():
    assert cube_solution(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.0625)
    assert cube_forcing(np.array([[0.5, 0.5]]))[0] == pytest.approx(1.0)
    assert cube_forcing(np.array([[0.5, 0.5, 0.5]]))[0] == pytest.approx(0.375)


# ---------------------------------------------------------------------------
# problem factories


def test_regular_annulus_factory():
    problem = regular_annulus_problem(2)
    assert problem.degree == 2 and problem.regularity == 1
    assert problem.solution is annulus_solution_2d
    assert problem.patch.dim == 2
    assert regular_annulus_problem(3).forcing is annulus_forcing_3d
    with pytest.raises(ValueError):
        regular_annulus_problem(4)


def test_constant_forcing_factory():
    problem = constant_forcing_problem(2, grading=3.0)
    assert problem.solution is None and problem.solution_gradient is None
    assert problem.degree == 3 and problem.regularity == 2
    assert problem.grading == 3.0
    x = np.array([[1.2, 0.3], [0.5, 1.4]])
    assert np.array_equal(problem.forcing(x), np.ones(2))
    with pytest.raises(ValueError):
        constant_forcing_problem(1)


def test_polynomial_cube_factory():
    problem = polynomial_cube_problem(3)
    assert problem.patch.dim == 3
    assert problem.solution is cube_solution
    assert problem.grading == 1.0


def test_problem_validation():
    patch = quarter_annulus(2)
    with pytest.raises(ValueError):
        BenchmarkProblem("x", patch, annulus_forcing_2d, degree=0, regularity=-1)
    with pytest.raises(ValueError):
        BenchmarkProblem("x", patch, annulus_forcing_2d, degree=2, regularity=2)
    with pytest.raises(ValueError):
        BenchmarkProblem("x", patch, annulus_forcing_2d, degree=2, regularity=1, grading=0.5)


# ---------------------------------------------------------------------------
# error norms and rate fits


def _zero_evaluator(grid):
    return np.zeros(grid.x.shape[0]), np.zeros_like(grid.x)


def test_error_norms_identity():
    problem = regular_annulus_problem(2)
    grid = QuadGrid(problem.patch, (3, 3), 4)
    ev = analytic_evaluator(problem.solution, problem.solution_gradient)
    l2, h1 = error_norms(ev, ev, grid)
    assert l2 <= 1e-14 and h1 <= 1e-14


def test_error_norms_against_zero_are_function_norms():
    problem = regular_annulus_problem(2)
    grid = QuadGrid(problem.patch, (4, 4), 4)
    ev = analytic_evaluator(problem.solution, problem.solution_gradient)
    l2, h1 = error_norms(ev, _zero_evaluator, grid)
    vals = problem.solution(grid.x)
    grads = problem.solution_gradient(grid.x)
    assert l2 == pytest.approx(float(np.sqrt(grid.integrate(vals**2))), rel=1e-13)
    assert h1 == pytest.approx(
        float(np.sqrt(grid.integrate(np.sum(grads**2, axis=-1)))), rel=1e-13
    )


def test_fit_rate_exact_decay():
    levels = np.arange(6)
    rate, steps = fit_rate(levels, 7.0 * 2.0 ** (-2.0 * levels))
    assert rate == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(steps, 2.0, atol=1e-12)


def test_fit_rate_constant_sequence():
    rate, steps = fit_rate([1, 2, 3, 4], [0.25] * 4)
    assert rate == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(steps, 0.0, atol=1e-14)


def test_fit_rate_with_slow_log_factor():
    levels = np.arange(1, 9)
    errors = 2.0 ** (-3.0 * levels) * np.sqrt(levels)
    rate, _ = fit_rate(levels, errors)
    assert abs(rate - 2.805) < 0.01


def test_fit_rate_validation():
    with pytest.raises(ValueError):
        fit_rate([1, 2], [1.0, 0.5])
    with pytest.raises(ValueError):
        fit_rate([1, 2, 3], [1.0, 0.0, 0.5])
    with pytest.raises(ValueError):
        fit_rate([1, 2, 3], [1.0, -0.5, 0.25])
    with pytest.raises(ValueError):
        fit_rate([1, 2, 3], [1.0, 0.5])


def test_record_mesh_size():
    kwargs = dict(
        method="sparse", d=2, degree=2, regularity=1, grading=1.0,
        n_components=5, dofs_total=10, dofs_max_component=5,
        l2_error=1.0, h1_semi_error=1.0, time_serial_s=0.1,
    )
    assert ConvergenceRecord(level=3, **kwargs).h == pytest.approx(0.125)
    assert ConvergenceRecord(level=0, **kwargs).h == 1.0


# ---------------------------------------------------------------------------
# convergence studies (small but real runs)


@pytest.fixture(scope="module")
def annulus_studies():
    problem = regular_annulus_problem(2)
    levels = [2, 3, 4, 5]
    sparse = convergence_study(problem, "sparse", levels, cores=(2, 4))
    tensor = convergence_study(problem, "tensor", levels, cores=(2, 4))
    return levels, sparse, tensor


def test_study_component_counts(annulus_studies):
    levels, sparse, tensor = annulus_studies
    for level, rec in zip(levels, sparse):
        assert rec.level == level
        assert rec.n_components == 2 * level + 1
        assert rec.method == "sparse"
    for level, rec in zip(levels, tensor):
        assert rec.n_components == 1
        assert rec.dofs_total == (2**level + 2) ** 2
        assert rec.dofs_max_component == rec.dofs_total


def test_study_sparse_dof_totals(annulus_studies):
    levels, sparse, _ = annulus_studies
    from sparseiga.combination import combination_coefficients

    for level, rec in zip(levels, sparse):
        plan = combination_coefficients(2, level)
        expected = sum(
            (2**a + 2) * (2**b + 2) for a, b in plan.betas
        )
        assert rec.dofs_total == expected
        assert rec.dofs_max_component == max(
            (2**a + 2) * (2**b + 2) for a, b in plan.betas
        )


def test_study_dof_ratio_shrinks(annulus_studies):
    levels, sparse, tensor = annulus_studies
    ratios = [
        s.dofs_total / t.dofs_total
        for s, t in zip(sparse, tensor)
        if s.level >= 3
    ]
    assert len(ratios) == 3
    assert ratios[0] > ratios[1] > ratios[2]


def test_study_errors_decrease(annulus_studies):
    _, sparse, tensor = annulus_studies
    for records in (sparse, tensor):
        l2 = [r.l2_error for r in records]
        h1 = [r.h1_semi_error for r in records]
        assert all(a > b > 0.0 for a, b in zip(l2, l2[1:]))
        assert all(a > b > 0.0 for a, b in zip(h1, h1[1:]))


def test_study_timing_columns(annulus_studies):
    _, sparse, tensor = annulus_studies
    for rec in sparse:
        assert set(rec.times_cores) == {2, 4}
        assert 0.0 < rec.times_cores[4] <= rec.times_cores[2] <= rec.time_serial_s + 1e-12
    for rec in tensor:
        # one job: any schedule equals the serial run
        assert rec.times_cores[2] == rec.time_serial_s
        assert rec.times_cores[4] == rec.time_serial_s


def test_study_input_validation():
    problem = regular_annulus_problem(2)
    with pytest.raises(ValueError):
        convergence_study(problem, "sparse", [])
    with pytest.raises(ValueError):
        convergence_study(problem, "sparse", [-1])
    with pytest.raises(ValueError):
        convergence_study(problem, "dense", [2])


def test_overkill_reference_margin_stability():
    problem = constant_forcing_problem(2)
    a = convergence_study(problem, "sparse", [1, 2, 3], reference_margin=2)
    b = convergence_study(problem, "sparse", [1, 2, 3], reference_margin=3)
    for ra, rb in zip(a, b):
        assert abs(ra.l2_error - rb.l2_error) < 0.01 * ra.l2_error
        assert abs(ra.h1_semi_error - rb.h1_semi_error) < 0.01 * ra.h1_semi_error


def test_convergence_csv_round_trip(tmp_path, annulus_studies):
    _, sparse, tensor = annulus_studies
    records = sparse + tensor
    path = tmp_path / "convergence.csv"
    write_convergence_csv(path, records, cores=(2, 4))
    raw = path.read_bytes()
    assert b"\r" not in raw
    back, cores = read_convergence_csv(path)
    assert cores == [2, 4]
    assert back == records


# ---------------------------------------------------------------------------
# grading sweep


@pytest.fixture(scope="module")
def small_sweep():
    rows, records = gamma_sweep(
        2, [1.0, 2.0], [1, 2, 3], methods=("sparse",), degree=2
    )
    return rows, records


def test_gamma_sweep_shape(small_sweep):
    rows, records = small_sweep
    assert [(r.gamma, r.method) for r in rows] == [(1.0, "sparse"), (2.0, "sparse")]
    assert all(r.d == 2 and r.degree == 2 and r.regularity == 1 for r in rows)
    assert len(records) == 6
    assert [r.grading for r in records] == [1.0, 1.0, 1.0, 2.0, 2.0, 2.0]


def test_gamma_sweep_matches_direct_study(small_sweep):
    rows, records = small_sweep
    own = [r for r in records if r.grading == 1.0]
    l2_rate, _ = fit_rate([r.level for r in own], [r.l2_error for r in own])
    assert rows[0].l2_rate == pytest.approx(l2_rate, abs=1e-12)


def test_gamma_sweep_fit_window():
    rows, records = gamma_sweep(
        2, [1.0], [1, 2, 3, 4], methods=("sparse",), degree=2, fit_from=2
    )
    kept = [r for r in records if r.level >= 2]
    l2_rate, _ = fit_rate([r.level for r in kept], [r.l2_error for r in kept])
    assert rows[0].l2_rate == pytest.approx(l2_rate, abs=1e-12)


def test_gamma_sweep_validation():
    with pytest.raises(ValueError):
        gamma_sweep(2, [], [1, 2, 3])


def test_write_gamma_csv(tmp_path, small_sweep):
    rows, _ = small_sweep
    path = tmp_path / "gamma.csv"
    write_gamma_csv(path, rows)
    raw = path.read_bytes()
    assert b"\r" not in raw
    with open(path, newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["gamma", "method", "d", "p", "r", "l2_rate", "h1_semi_rate"]
    assert len(table) == 3
    assert float(table[1][0]) == 1.0
    assert float(table[1][5]) == rows[0].l2_rate
