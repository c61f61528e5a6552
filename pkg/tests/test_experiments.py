import math
import time

import pytest

from popcone.models.enums import Approach, ConeKind, Domain, Relation, Sense, SolveStatus
from popcone.models.polynomial import Constraint, Polynomial, PopProblem
from popcone.models.reports import ComparisonRow, OracleReport
from popcone.services import experiments, instances
from popcone.services.oracle import sample_upper_bound, verify_bound
from popcone.services.problem_io import save_problem
from popcone.services.relax import linking_relaxation_applies
from popcone.services.tables import ERR, find_row, format_cell


def row(oracle, tp, qp, error=''):
    status = SolveStatus.optimal
    return ComparisonRow('x', oracle, tp, qp, status, status, error=error)


def test_ratio():
    assert row(-1.0, -2.0, -3.0).ratio == pytest.approx(0.5)
    assert row(-1.0, -3.0, -3.0).ratio == 0.0
    assert row(-1.0, -2.0, -1.0).ratio is None
    assert row(-1.0, -2.0, -math.inf).ratio is None
    assert row(math.inf, -2.0, -3.0).ratio is None


def test_summary():
    rows = [row(-1.0, -2.0, -3.0), row(-1.0, -1.5, -3.0), row(-1.0, -2.0, -math.inf),
            row(-1.0, math.nan, -3.0, error='TP-DNN NUMERICAL_TROUBLE')]
    rows[2].qp_status = SolveStatus.unbounded
    summary = experiments.summarize(rows)
    assert summary.rows == 4
    assert summary.defined_ratios == 2
    assert summary.mean_ratio == pytest.approx((0.5 + 0.75) / 2)
    assert summary.qp_unbounded == 1
    assert summary.tp_unbounded == 0
    assert summary.tp_at_least_qp == 3
    assert summary.errors == 1


def test_pool_keeps_item_order():
    def slow_identity(k):
        time.sleep(0.01 * (5 - k))
        return k

    assert experiments.run_pool(slow_identity, list(range(5)), threads=4) == list(range(5))
    assert experiments.run_pool(slow_identity, [3], threads=4) == [3]


def test_quadratic_relaxation_of_quadratic_problem_skips_lifting(example3):
    program = experiments.build_relaxation(example3, Approach.quadratic, ConeKind.dnn)
    assert program.meta['lifted_pairs'] == 0
    assert program.shape()['psd_sizes'] == [3]


def test_unknown_target():
    with pytest.raises(ValueError):
        experiments.reproduce('ex9')


def test_sum_power_table(cfg):
    table = experiments.reproduce_ex1(cfg)
    assert not table.failed
    assert find_row(table, 'TP-L')[2] == pytest.approx(1.0, abs=1e-6)
    qp_rows = [r for r in table.rows if r[0] == 'QP-L' and r[1] == 'fewest-variable lifting']
    assert qp_rows[0][2] == pytest.approx(0.0, abs=1e-6)


def test_bound_ordering_on_augmented_qcqp(cfg, example3_augmented):
    oracle = sample_upper_bound(example3_augmented, 20_000, seed=0)
    _, linear = experiments.solve_relaxation(example3_augmented, Approach.tensor, ConeKind.l, cfg)
    _, dnn = experiments.solve_relaxation(example3_augmented, Approach.tensor, ConeKind.dnn, cfg)
    assert dnn.has_bound
    assert linear.bound <= dnn.bound + 1e-6
    assert verify_bound(example3_augmented, dnn.bound, oracle)


def test_maximization_bounds_are_upper_bounds(cfg, univariate):
    oracle = sample_upper_bound(univariate, 20_000, seed=0)
    _, tp = experiments.solve_relaxation(univariate, Approach.tensor, ConeKind.dnn, cfg)
    _, qp = experiments.solve_relaxation(univariate, Approach.quadratic, ConeKind.dnn, cfg)
    assert tp.has_bound
    assert qp.has_bound
    assert tp.bound >= 5.0 - 1e-6
    assert verify_bound(univariate, tp.bound, oracle)
    assert verify_bound(univariate, qp.bound, oracle)


def test_relaxed_linking_never_tightens_a_maximization(cfg, univariate):
    _, equal = experiments.solve_relaxation(univariate, Approach.quadratic, ConeKind.dnn, cfg)
    _, relaxed = experiments.solve_relaxation(univariate, Approach.quadratic, ConeKind.dnn, cfg,
                                              relaxed_linking=True)
    assert equal.has_bound
    assert relaxed.has_bound
    assert relaxed.bound >= equal.bound - 1e-6


def test_bi_quadratic_smallest_cell_keeps_its_bound(cfg):
    _, report = experiments.solve_relaxation(instances.example2(2, 2), Approach.tensor, ConeKind.sdp, cfg)
    assert report.has_bound, report.message
    assert report.bound == pytest.approx(instances.example2_optimum(2, 2), abs=1e-3)


def box_quartic(rng, n=3):
    """
    max sum c_ab x_a^2 x_b^2 over 0 <= x <= u with nonnegative c

    Every objective monomial has its own bound x_a^2 x_b^2 <= u_a^2 u_b^2,
    so the optimum sum c_ab u_a^2 u_b^2 is attained at x = u.
    """
    upper = rng.uniform(0.5, 2.0, size=n)
    objective = Polynomial(n)
    constraints = []
    for i in range(n):
        xi = Polynomial.variable(n, i)
        constraints.append(Constraint(xi, Relation.le, float(upper[i])))
        constraints.append(Constraint(xi * xi, Relation.le, float(upper[i] ** 2)))
    optimum = 0.0
    for a in range(n):
        for b in range(a, n):
            exp = [0] * n
            exp[a] += 2
            exp[b] += 2
            coef = float(rng.integers(1, 6))
            cap = float(upper[a] ** 2 * upper[b] ** 2)
            objective = objective + Polynomial.monomial(exp, coef)
            constraints.append(Constraint(Polynomial.monomial(exp), Relation.le, cap))
            optimum += coef * cap
    pop = PopProblem(n=n, objective=objective, constraints=tuple(constraints),
                     sense=Sense.max, domain=Domain.orthant)
    return pop, optimum


def test_equality_and_relaxed_linking_agree_on_nonnegative_maximizations(cfg, rng):
    for _ in range(10):
        pop, optimum = box_quartic(rng)
        assert linking_relaxation_applies(pop)
        _, equal = experiments.solve_relaxation(pop, Approach.quadratic, ConeKind.dnn, cfg)
        _, relaxed = experiments.solve_relaxation(pop, Approach.quadratic, ConeKind.dnn, cfg,
                                                  relaxed_linking=True)
        assert equal.has_bound and relaxed.has_bound
        assert relaxed.bound == pytest.approx(equal.bound, rel=1e-6, abs=1e-6)
        assert equal.bound == pytest.approx(optimum, rel=1e-6, abs=1e-6)


def test_oracle_without_feasible_point_is_undefined(cfg, univariate, monkeypatch):
    def no_feasible_point(pop, budget, seed):
        return OracleReport(best_value=-math.inf, best_point=None, samples_tried=budget, feasible_found=False)

    monkeypatch.setattr(experiments, 'sample_upper_bound', no_feasible_point)
    table, rows = experiments.compare_problems([('u', univariate)], cfg, budget=10)
    assert rows[0].oracle_value is None
    assert rows[0].ratio is None
    assert format_cell(table.rows[0][1]) == 'undefined'
    assert not rows[0].error


def test_compare_files_reports_bad_files(tmp_path, cfg, univariate):
    good = tmp_path / 'good.json'
    bad = tmp_path / 'bad.json'
    save_problem(univariate, good)
    bad.write_text('{"n": 1, "objective": ', encoding='utf-8')
    table, rows = experiments.compare_files([str(good), str(bad)], cfg, budget=2000)
    assert [r.instance_id for r in rows] == ['good.json', 'bad.json']
    assert rows[1].error
    assert table.failed
    assert table.headers[-1] == 'Note'
    assert len(table.rows) == 2


@pytest.mark.slow
def test_bi_quadratic_grid(cfg):
    table = experiments.reproduce_ex2(cfg)
    assert not table.failed
    for n, m in experiments.ACCEPTANCE_GRID:
        cells = find_row(table, f'({n},{m})')
        assert cells[2] == pytest.approx(instances.example2_optimum(n, m), abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize('n,m', [(2, 2), (3, 3)])
def test_bi_quadratic_matrix_relaxation_is_unbounded(cfg, n, m):
    _, report = experiments.solve_relaxation(instances.example2(n, m), Approach.quadratic, ConeKind.sdp, cfg)
    assert report.status is SolveStatus.unbounded
    assert report.certified
    assert report.bound == -math.inf


@pytest.mark.slow
def test_qcqp_table(cfg):
    table = experiments.reproduce_ex3(cfg, budget=100_000)
    assert not table.failed
    _, sdp, dnn, qp_dnn, tp_dnn, oracle = table.rows[0]
    assert sdp == pytest.approx(-103.43, abs=0.5)
    assert dnn == pytest.approx(-26.67, abs=0.05)
    assert qp_dnn == pytest.approx(-26.67, abs=0.05)
    assert -12.90 <= tp_dnn <= -12.75
    assert oracle == pytest.approx(instances.EXAMPLE3_OPTIMUM, abs=1e-2)


@pytest.mark.slow
def test_random_quartics_over_shell(cfg):
    problems = instances.generate(4, 20, seed=experiments.DEFAULT_SEEDS[4])
    named = [(str(k + 1), pop) for k, pop in enumerate(problems)]
    table, rows = experiments.compare_problems(named, cfg, budget=100_000, threads=2)
    summary = experiments.summarize(rows)
    assert summary.errors == 0, [r.error for r in rows if r.error]
    assert summary.tp_unbounded == 0
    assert summary.tp_at_least_qp >= 18
    assert summary.mean_ratio is not None and summary.mean_ratio > 0.2
    assert ERR not in [cell for r in table.rows for cell in r]


@pytest.mark.slow
def test_random_quartics_with_random_constraints(cfg):
    problems = instances.generate(5, 10, seed=experiments.DEFAULT_SEEDS[5])
    rows = []
    for k, pop in enumerate(problems):
        oracle = sample_upper_bound(pop, 100_000, seed=k)
        cut = instances.linear_product_cuts(pop)
        _, tp = experiments.solve_relaxation(cut, Approach.tensor, ConeKind.dnn, cfg)
        _, qp = experiments.solve_relaxation(pop, Approach.quadratic, ConeKind.dnn, cfg)
        assert tp.status is SolveStatus.optimal, (k, tp.message)
        assert math.isfinite(tp.bound)
        assert verify_bound(pop, tp.bound, oracle)
        rows.append(qp.status)
    assert rows.count(SolveStatus.unbounded) >= 1
