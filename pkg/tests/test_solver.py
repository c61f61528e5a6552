import math

import numpy as np
import pytest
from scipy.optimize import linprog

from popcone.models.conic import ConicProgram, LinearRow, PsdBlock
from popcone.models.enums import Relation, Sense, SolveStatus
from popcone.models.reports import SolveReport, SolverConfig
from popcone.services.solver import (
    REDUCED_ACCURACY,
    ConeVector,
    _certify_unbounded,
    _classify_stalled,
    _Iterate,
    find_improving_ray,
    lp_solve,
    program_residuals,
    solve,
)


def nonneg(n):
    return tuple({k: 1.0} for k in range(n))


def symmetric_block(size):
    """PSD block over the upper triangle of a size x size matrix; returns (block, variable of (i, j))."""
    var = {}
    entries = []
    for i in range(size):
        for j in range(i, size):
            k = len(var)
            var[(i, j)] = k
            entries.append((k, i, j, 1.0))
            if i != j:
                entries.append((k, j, i, 1.0))
    return PsdBlock(size=size, entries=tuple(entries), label='X'), var


def test_small_lp():
    prog = ConicProgram(
        num_vars=2,
        objective={0: 1.0, 1: 1.0},
        rows=(LinearRow({0: -1.0, 1: -2.0}, Relation.le, -2.0),),
        nonneg=nonneg(2),
    )
    report = solve(prog)
    assert report.status is SolveStatus.optimal
    assert report.primal_value == pytest.approx(1.0, abs=1e-6)
    assert report.dual_value == pytest.approx(1.0, abs=1e-6)
    assert report.primal_solution[1] == pytest.approx(1.0, abs=1e-5)
    assert report.residuals['row_violation'] <= 1e-6


def test_maximization_with_equality():
    prog = ConicProgram(
        num_vars=2,
        objective={0: 1.0},
        sense=Sense.max,
        rows=(LinearRow({0: 1.0, 1: 1.0}, Relation.le, 3.0), LinearRow({1: 1.0}, Relation.eq, 1.0)),
        nonneg=nonneg(2),
    )
    report = lp_solve(prog)
    assert report.status is SolveStatus.optimal
    assert report.bound == pytest.approx(2.0, abs=1e-6)
    assert len(report.multipliers) == 2


def test_infeasible_lp():
    prog = ConicProgram(
        num_vars=1,
        objective={0: 1.0},
        rows=(LinearRow({0: 1.0}, Relation.le, -1.0),),
        nonneg=nonneg(1),
    )
    report = solve(prog)
    assert report.status is SolveStatus.infeasible
    assert math.isnan(report.bound)


def test_inconsistent_equalities_are_infeasible():
    prog = ConicProgram(
        num_vars=1,
        objective={0: 1.0},
        rows=(LinearRow({0: 1.0}, Relation.eq, 1.0), LinearRow({0: 2.0}, Relation.eq, 4.0)),
    )
    report = solve(prog)
    assert report.status is SolveStatus.infeasible
    assert report.certified


def test_dependent_equalities_are_dropped():
    prog = ConicProgram(
        num_vars=2,
        objective={0: 1.0, 1: 2.0},
        rows=(LinearRow({0: 1.0, 1: 1.0}, Relation.eq, 1.0), LinearRow({0: 2.0, 1: 2.0}, Relation.eq, 2.0)),
        nonneg=nonneg(2),
    )
    report = solve(prog)
    assert report.status is SolveStatus.optimal
    assert report.primal_value == pytest.approx(1.0, abs=1e-6)


def test_unbounded_lp_has_certified_ray():
    prog = ConicProgram(
        num_vars=2,
        objective={0: -1.0},
        rows=(LinearRow({0: 1.0, 1: -1.0}, Relation.le, 1.0),),
        nonneg=nonneg(2),
    )
    report = solve(prog)
    assert report.status is SolveStatus.unbounded
    assert report.bound == -math.inf
    assert report.certified
    assert report.ray is not None
    assert prog.objective_value(report.ray) < 0


def test_find_improving_ray():
    prog = ConicProgram(
        num_vars=2,
        objective={0: -1.0},
        rows=(LinearRow({0: 1.0, 1: -1.0}, Relation.le, 1.0),),
        nonneg=nonneg(2),
    )
    ray = find_improving_ray(prog)
    assert ray is not None
    assert prog.objective_value(ray) == pytest.approx(-1.0, abs=1e-6)
    assert ray[0] - ray[1] <= 1e-6
    assert np.all(ray >= -1e-6)


def test_no_improving_ray_for_bounded_program():
    prog = ConicProgram(
        num_vars=1,
        objective={0: 1.0},
        rows=(LinearRow({0: 1.0}, Relation.le, 5.0),),
        nonneg=nonneg(1),
    )
    assert find_improving_ray(prog) is None


def test_unconstrained_costed_variable_is_unbounded():
    prog = ConicProgram(
        num_vars=2,
        objective={0: 1.0, 1: 3.0},
        rows=(LinearRow({0: 1.0}, Relation.le, 1.0),),
        nonneg=nonneg(1),
    )
    report = solve(prog)
    assert report.status is SolveStatus.unbounded
    assert report.certified
    assert report.ray[1] < 0


def test_two_by_two_sdp():
    # [[1, t], [t, 1]] PSD: min t is -1
    block = PsdBlock(size=2, entries=((0, 0, 1, 1.0), (0, 1, 0, 1.0)), constant=((0, 0, 1.0), (1, 1, 1.0)))
    prog = ConicProgram(num_vars=1, objective={0: 1.0}, psd_blocks=(block,))
    report = solve(prog)
    assert report.status is SolveStatus.optimal
    assert report.primal_value == pytest.approx(-1.0, abs=1e-6)


def test_largest_eigenvalue():
    # t I - A PSD: min t is the largest eigenvalue of A
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    constant = tuple((i, j, -a[i, j]) for i in range(2) for j in range(2))
    block = PsdBlock(size=2, entries=((0, 0, 0, 1.0), (0, 1, 1, 1.0)), constant=constant)
    report = solve(ConicProgram(num_vars=1, objective={0: 1.0}, psd_blocks=(block,)))
    assert report.status is SolveStatus.optimal
    assert report.primal_value == pytest.approx(3.0, abs=1e-6)


def test_random_lps_match_reference(rng):
    for _ in range(20):
        n, m = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        c = rng.random(n) + 0.1
        a = rng.random((m, n)) + 0.1
        b = rng.random(m) + 0.5
        reference = linprog(c, A_ub=-a, b_ub=-b, bounds=[(0, None)] * n, method='highs')
        prog = ConicProgram(
            num_vars=n,
            objective={k: float(c[k]) for k in range(n)},
            rows=tuple(LinearRow({k: float(-a[i, k]) for k in range(n)}, Relation.le, float(-b[i]))
                       for i in range(m)),
            nonneg=nonneg(n),
        )
        report = solve(prog)
        assert report.status is SolveStatus.optimal
        assert report.primal_value == pytest.approx(reference.fun, rel=1e-6, abs=1e-6)


def test_random_sdps_match_smallest_eigenvalue(rng):
    # min <C, X> s.t. trace X = 1, X PSD is the smallest eigenvalue of C
    for _ in range(10):
        size = 3
        g = rng.normal(size=(size, size))
        c = (g + g.T) / 2
        block, var = symmetric_block(size)
        objective = {k: float(c[i, j] if i == j else 2 * c[i, j]) for (i, j), k in var.items()}
        trace = LinearRow({var[(i, i)]: 1.0 for i in range(size)}, Relation.eq, 1.0)
        prog = ConicProgram(num_vars=len(var), objective=objective, rows=(trace,), psd_blocks=(block,))
        report = solve(prog)
        assert report.status is SolveStatus.optimal
        assert report.primal_value == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-6)
        assert program_residuals(prog, report.primal_solution)['psd_violation'] <= 1e-6


def test_iteration_limit():
    block, var = symmetric_block(3)
    trace = LinearRow({var[(i, i)]: 1.0 for i in range(3)}, Relation.eq, 1.0)
    prog = ConicProgram(num_vars=len(var), objective={var[(0, 1)]: 1.0}, rows=(trace,), psd_blocks=(block,))
    report = solve(prog, SolverConfig(max_iter=1))
    assert report.status is SolveStatus.max_iter or report.has_bound
    assert report.iterations <= 1


def test_lp_solve_rejects_psd_blocks():
    block = PsdBlock(size=1, entries=((0, 0, 0, 1.0),))
    with pytest.raises(ValueError):
        lp_solve(ConicProgram(num_vars=1, objective={0: 1.0}, psd_blocks=(block,)))


def test_empty_program_raises():
    with pytest.raises(ValueError):
        solve(ConicProgram(num_vars=1, objective={0: 1.0}))


def test_undeclared_variable_raises():
    prog = ConicProgram(num_vars=1, objective={0: 1.0}, rows=(LinearRow({3: 1.0}, Relation.le, 1.0),))
    with pytest.raises(ValueError):
        solve(prog)


def test_non_symmetric_block_is_numerical_trouble():
    block = PsdBlock(size=2, entries=((0, 0, 1, 1.0),))
    report = solve(ConicProgram(num_vars=1, objective={0: 1.0}, psd_blocks=(block,)))
    assert report.status is SolveStatus.numerical_trouble
    assert 'symmetric' in report.message


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_feas=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(step_fraction=1.0)


def test_program_residuals():
    prog = ConicProgram(
        num_vars=2,
        objective={0: 1.0},
        rows=(LinearRow({0: 1.0, 1: 1.0}, Relation.eq, 1.0),),
        nonneg=nonneg(2),
    )
    residuals = program_residuals(prog, np.array([2.0, -0.5]))
    assert residuals['row_violation'] == pytest.approx(0.5)
    assert residuals['nonneg_violation'] == pytest.approx(0.5)
    assert residuals['psd_violation'] == 0.0


def trace_sdp(c):
    """min <C, X> s.t. trace X = 1, X PSD."""
    size = c.shape[0]
    block, var = symmetric_block(size)
    objective = {k: float(c[i, j] if i == j else 2 * c[i, j]) for (i, j), k in var.items()}
    trace = LinearRow({var[(i, i)]: 1.0 for i in range(size)}, Relation.eq, 1.0)
    return ConicProgram(num_vars=len(var), objective=objective, rows=(trace,), psd_blocks=(block,))


def test_solves_are_bit_identical(rng):
    g = rng.normal(size=(4, 4))
    prog = trace_sdp((g + g.T) / 2)
    first, second = solve(prog), solve(prog)
    assert first.status is SolveStatus.optimal
    assert second.status is first.status
    assert second.iterations == first.iterations
    assert second.primal_value == first.primal_value
    assert second.dual_value == first.dual_value
    assert np.array_equal(second.primal_solution, first.primal_solution)
    assert np.array_equal(second.multipliers, first.multipliers)


def test_weak_duality_and_residuals_at_optimum(rng, cfg):
    programs = []
    for _ in range(5):
        g = rng.normal(size=(3, 3))
        programs.append(trace_sdp((g + g.T) / 2))
    for _ in range(5):
        a = rng.random((2, 3)) + 0.1
        programs.append(ConicProgram(
            num_vars=3,
            objective={k: float(v) for k, v in enumerate(rng.random(3) + 0.1)},
            rows=tuple(LinearRow({k: float(-a[i, k]) for k in range(3)}, Relation.le, -1.0) for i in range(2)),
            nonneg=nonneg(3),
        ))
    for prog in programs:
        report = solve(prog, cfg)
        assert report.status is SolveStatus.optimal
        assert report.dual_value <= report.primal_value + cfg.tol_gap * (1.0 + abs(report.primal_value))
        assert report.residuals['pres'] <= cfg.tol_feas
        assert report.residuals['dres'] <= cfg.tol_feas
        assert report.residuals['row_violation'] <= 1e-6
        assert report.residuals['nonneg_violation'] <= 1e-6
        assert report.residuals['psd_violation'] <= 1e-6


def snapshot(merit, iteration=4):
    stats = {'pres': 1e-9 * merit, 'dres': 0.0, 'gap': 0.0, 'pcost': -0.25, 'dcost': -0.25, 'dinfres': math.inf}
    return _Iterate(np.zeros(1), np.zeros(0), ConeVector(np.zeros(1), []), 1.0, stats, iteration, merit)


def test_stalled_run_is_judged_on_its_best_iterate(cfg):
    diverged = {'pres': 1.0, 'dres': 1.0, 'gap': 1.0, 'pcost': 10.0, 'dcost': -10.0, 'dinfres': math.inf}

    status, message, reduced = _classify_stalled(snapshot(0.5), diverged, cfg, 9, 'Residuals grew')
    assert status is SolveStatus.optimal
    assert not reduced
    assert 'iterate 4' in message

    status, message, reduced = _classify_stalled(snapshot(3.7), diverged, cfg, 9, 'Residuals grew')
    assert status is SolveStatus.numerical_trouble
    assert reduced
    assert 'reduced accuracy' in message

    status, _, reduced = _classify_stalled(snapshot(10 * REDUCED_ACCURACY), diverged, cfg, cfg.max_iter, 'limit')
    assert status is SolveStatus.max_iter
    assert not reduced


def test_reduced_accuracy_report_keeps_its_value():
    report = SolveReport(SolveStatus.numerical_trouble, primal_value=-0.25, reduced_accuracy=True)
    assert report.has_bound
    assert report.bound == -0.25
    assert not report.is_finite
    assert report.summary()['reduced_accuracy'] is True
    assert math.isnan(SolveReport(SolveStatus.numerical_trouble, primal_value=-0.25).bound)


def bounded_below_lp():
    return ConicProgram(num_vars=1, objective={0: 1.0}, rows=(LinearRow({0: -1.0}, Relation.le, -1.0),),
                        nonneg=nonneg(1))


def test_unbounded_verdict_without_ray_is_dropped():
    report = SolveReport(SolveStatus.unbounded, primal_value=-math.inf, dual_value=-math.inf,
                         primal_solution=np.array([1.0]), message='unbounded suspected (limit)')
    _certify_unbounded(bounded_below_lp(), report, SolverConfig())
    assert report.status is SolveStatus.numerical_trouble
    assert math.isnan(report.primal_value)
    assert not report.certified
    assert not report.has_bound
    assert 'could not be certified' in report.message


def test_threshold_heuristic_stays_unbounded_but_uncertified():
    report = SolveReport(SolveStatus.unbounded, primal_value=-math.inf, dual_value=-math.inf,
                         primal_solution=np.array([1.0]), message='heuristic: objective passed the threshold')
    _certify_unbounded(bounded_below_lp(), report, SolverConfig())
    assert report.status is SolveStatus.unbounded
    assert not report.certified
    assert report.ray is None
