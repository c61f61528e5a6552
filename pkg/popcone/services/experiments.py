"""
Reproduction and comparison harness

Every table cell is one build-and-solve; cells run in a thread pool and the
table is assembled in a fixed order whatever the completion order.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

from ..errors import ProblemFormatError
from ..models.conic import ConicProgram
from ..models.enums import Approach, ConeKind, SolveStatus
from ..models.polynomial import PopProblem
from ..models.reports import ComparisonRow, OracleReport, SolveReport, SolverConfig
from . import instances
from .oracle import sample_upper_bound, verify_bound
from .problem_io import load_problem
from .relax import build_qp_relaxation, build_tensor_relaxation, qcqp_reformulate
from .solver import solve
from .tables import ERR, Table

ACCEPTANCE_GRID = ((2, 2), (3, 3), (4, 4), (5, 5), (2, 10), (4, 8))
FULL_GRID = tuple((k, k) for k in range(2, 11)) + ((2, 10), (3, 9), (4, 8), (5, 7))
EXAMPLE2_TOL = 1e-3
# TP >= QP is checked with this slack
ORDER_TOL = 1e-6
DEFAULT_SEEDS = {4: 4, 5: 5}
DEFAULT_COUNTS = {4: 20, 5: 10}

T = TypeVar('T')
R = TypeVar('R')


def run_pool(func: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """Map func over items in a thread pool, results in item order."""
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def build_relaxation(pop: PopProblem, approach: Approach, cone: ConeKind, relaxed_linking: bool = False,
                     add_sign_rows: bool = False, principal_only: bool = False) -> ConicProgram:
    if approach is Approach.tensor:
        return build_tensor_relaxation(pop, cone, add_sign_rows=add_sign_rows, principal_only=principal_only)
    if pop.degree <= 2:
        return build_qp_relaxation(pop, None, cone, relaxed_linking=relaxed_linking)
    lifted, lmap = qcqp_reformulate(pop)
    return build_qp_relaxation(lifted, lmap, cone, relaxed_linking=relaxed_linking)


def solve_relaxation(pop: PopProblem, approach: Approach, cone: ConeKind, cfg: Optional[SolverConfig] = None,
                     **options) -> Tuple[ConicProgram, SolveReport]:
    program = build_relaxation(pop, approach, cone, **options)
    report = solve(program, cfg)
    logging.info(f"{approach.value}-{cone.value}: {report.status.value} {report.primal_value:.6g} "
                 f"({report.iterations} iterations)")
    return program, report


def _cell(report: SolveReport) -> object:
    if report.has_bound or report.status is SolveStatus.unbounded:
        return report.bound
    return ERR


def _failed(report: SolveReport) -> bool:
    return not (report.has_bound or report.status is SolveStatus.unbounded)


def _accuracy_note(label: str, report: SolveReport) -> Optional[str]:
    if report.reduced_accuracy:
        return f'{label}: reduced accuracy ({report.message})'
    return None


def _oracle_cell(oracle: OracleReport) -> Optional[float]:
    return oracle.best_value if oracle.feasible_found else None


def reproduce_ex1(cfg: Optional[SolverConfig] = None, n: int = 3) -> Table:
    """Tensor L-relaxation of the sum-power problem against the matrix L-relaxation of its small lifting."""
    cells = [
        ('TP-L', 'sum-power problem', instances.example1(n), Approach.tensor),
        ('QP-L', 'fewest-variable lifting', instances.example1_quadratic(n), Approach.quadratic),
        ('QP-L', 'pairwise lifting', instances.example1(n), Approach.quadratic),
    ]
    table = Table(title=f'Example 1 (n={n})', headers=('Relaxation', 'Problem', 'Bound', 'Status'))
    for name, label, pop, approach in cells:
        _, report = solve_relaxation(pop, approach, ConeKind.l, cfg)
        table.rows.append((name, label, _cell(report), report.status.value))
        table.failed |= _failed(report)
        note = _accuracy_note(f'{name} {label}', report)
        if note:
            table.notes.append(note)
    return table


def reproduce_ex2(cfg: Optional[SolverConfig] = None, full: bool = False, threads: int = 1) -> Table:
    """Tensor SDP bound of the bi-quadratic problem on a grid of (n, m)."""
    grid = FULL_GRID if full else ACCEPTANCE_GRID

    def cell(nm: Tuple[int, int]) -> SolveReport:
        return solve_relaxation(instances.example2(*nm), Approach.tensor, ConeKind.sdp, cfg)[1]

    reports = run_pool(cell, grid, threads)
    table = Table(title='Example 2', headers=('Dimension', 'Optimal', 'TP-SDP', 'Status'))
    for (n, m), report in zip(grid, reports):
        optimum = instances.example2_optimum(n, m)
        value = _cell(report)
        table.rows.append((f'({n},{m})', optimum, value, report.status.value))
        note = _accuracy_note(f'({n},{m})', report)
        if note:
            table.notes.append(note)
        if _failed(report) or abs(report.bound - optimum) > EXAMPLE2_TOL:
            logging.error(f"Example 2 ({n},{m}): bound {report.bound} differs from {optimum}")
            table.failed = True
    return table


def reproduce_ex3(cfg: Optional[SolverConfig] = None, budget: int = 100_000, seed: int = 0,
                  threads: int = 1) -> Table:
    """The four relaxations of the non-convex QCQP, without and with the quartic valid inequalities."""
    plain = instances.example3()
    augmented = instances.example3(augmented=True)
    cells = [
        (plain, Approach.quadratic, ConeKind.sdp),
        (plain, Approach.quadratic, ConeKind.dnn),
        (instances.example3_quadratic(), Approach.quadratic, ConeKind.dnn),
        (augmented, Approach.tensor, ConeKind.dnn),
    ]
    reports = run_pool(lambda c: solve_relaxation(*c, cfg)[1], cells, threads)
    oracle = sample_upper_bound(plain, budget, seed)
    table = Table(
        title='Example 3',
        headers=('', 'SDP', 'COP', 'QP-DNN', 'TP-DNN', 'Oracle'),
        notes=['SDP and COP: matrix relaxations without valid inequalities; '
               'QP-DNN and TP-DNN: with x2*f2 <= 0 and x1^2*f1 <= 0.'],
    )
    table.rows.append(('Bound',) + tuple(_cell(r) for r in reports) + (_oracle_cell(oracle),))
    for header, report in zip(table.headers[1:], reports):
        table.failed |= _failed(report)
        note = _accuracy_note(header, report)
        if note:
            table.notes.append(note)
        if report.has_bound and not verify_bound(plain, report.bound, oracle):
            logging.error(f"Example 3 bound {report.bound} exceeds the sampled value {oracle.best_value}")
            table.failed = True
    return table


def compare_instance(instance_id: str, pop: PopProblem, cfg: Optional[SolverConfig] = None,
                     budget: int = 100_000, seed: int = 0,
                     tensor_cuts: Optional[Callable[[PopProblem], PopProblem]] = None) -> ComparisonRow:
    """
    Oracle value, TP-DNN and QP-DNN bounds of one problem; errors end up in the row

    tensor_cuts, when given, adds valid inequalities to the problem TP-DNN
    relaxes; the oracle and QP-DNN see the problem as it is.
    """
    try:
        oracle = sample_upper_bound(pop, budget, seed)
        tensor_pop = tensor_cuts(pop) if tensor_cuts else pop
        _, tp = solve_relaxation(tensor_pop, Approach.tensor, ConeKind.dnn, cfg)
        _, qp = solve_relaxation(pop, Approach.quadratic, ConeKind.dnn, cfg)
    except ValueError as e:
        logging.warning(f"Instance {instance_id} failed: {e}")
        return ComparisonRow(instance_id, math.nan, math.nan, math.nan,
                             SolveStatus.numerical_trouble, SolveStatus.numerical_trouble, error=str(e))
    row = ComparisonRow(instance_id, _oracle_cell(oracle), tp.bound, qp.bound, tp.status, qp.status)
    problems, notes = [], []
    for name, report in (('TP-DNN', tp), ('QP-DNN', qp)):
        if report.reduced_accuracy:
            notes.append(f'{name} reduced accuracy')
        if _failed(report):
            problems.append(f'{name} {report.status.value}')
        elif not verify_bound(pop, report.bound, oracle):
            problems.append(f'{name} bound {report.bound:.6g} above sampled {oracle.best_value:.6g}')
    if problems:
        row.error = '; '.join(problems)
        logging.warning(f"Instance {instance_id}: {row.error}")
    row.note = '; '.join(notes)
    return row


@dataclass
class ComparisonSummary:
    rows: int
    defined_ratios: int
    mean_ratio: Optional[float]
    tp_unbounded: int
    qp_unbounded: int
    tp_at_least_qp: int
    errors: int


def summarize(rows: Sequence[ComparisonRow]) -> ComparisonSummary:
    ratios = [r.ratio for r in rows if r.ratio is not None and not r.error]
    ordered = sum(
        1 for r in rows
        if not r.error and not (math.isnan(r.tp_bound) or math.isnan(r.qp_bound))
        and r.tp_bound >= r.qp_bound - ORDER_TOL
    )
    return ComparisonSummary(
        rows=len(rows),
        defined_ratios=len(ratios),
        mean_ratio=sum(ratios) / len(ratios) if ratios else None,
        tp_unbounded=sum(1 for r in rows if r.tp_status is SolveStatus.unbounded),
        qp_unbounded=sum(1 for r in rows if r.qp_status is SolveStatus.unbounded),
        tp_at_least_qp=ordered,
        errors=sum(1 for r in rows if r.error),
    )


def _comparison_table(rows: Sequence[ComparisonRow], title: str) -> Table:
    table = Table(title=title,
                  headers=('Instance', 'Oracle', 'TP-DNN', 'QP-DNN', 'TP status', 'QP status', 'Ratio', 'Note'))
    for row in rows:
        table.rows.append(row.cells() + (row.error or row.note,))
    summary = summarize(rows)
    mean = 'undefined' if summary.mean_ratio is None else f'{100 * summary.mean_ratio:.2f}%'
    table.notes = [
        f'Mean ratio over {summary.defined_ratios} defined rows: {mean}',
        f'UNBOUNDED: TP-DNN {summary.tp_unbounded}, QP-DNN {summary.qp_unbounded}',
        f'TP-DNN >= QP-DNN on {summary.tp_at_least_qp} of {summary.rows}',
    ]
    table.failed = summary.errors > 0
    return table


def compare_problems(problems: Sequence[Tuple[str, PopProblem]], cfg: Optional[SolverConfig] = None,
                     budget: int = 100_000, seed: int = 0, threads: int = 1,
                     title: str = 'Comparison',
                     tensor_cuts: Optional[Callable[[PopProblem], PopProblem]] = None,
                     ) -> Tuple[Table, List[ComparisonRow]]:
    """
    Comparison table of TP-DNN against QP-DNN

    Args:
        problems: (instance id, problem) pairs, in output order
        cfg: Solver configuration
        budget: Oracle samples per instance
        seed: Oracle seed; instance k samples with seed + k
        threads: Pool size
        title: Table title
        tensor_cuts: Valid inequalities added for TP-DNN only

    Returns:
        (table with a summary in its notes, rows)
    """
    items = list(enumerate(problems))
    rows = run_pool(
        lambda kp: compare_instance(kp[1][0], kp[1][1], cfg, budget, seed + kp[0], tensor_cuts), items, threads,
    )
    return _comparison_table(rows, title), rows


def compare_files(paths: Sequence[str], cfg: Optional[SolverConfig] = None, budget: int = 100_000,
                  seed: int = 0, threads: int = 1) -> Tuple[Table, List[ComparisonRow]]:
    """compare_problems over problem files; a file that does not parse becomes an error row."""

    def row_for(kp: Tuple[int, str]) -> ComparisonRow:
        k, path = kp
        name = os.path.basename(path)
        try:
            pop = load_problem(path)
        except ProblemFormatError as e:
            logging.warning(f"Skipping {path}: {e}")
            return ComparisonRow(name, math.nan, math.nan, math.nan,
                                 SolveStatus.numerical_trouble, SolveStatus.numerical_trouble, error=str(e))
        return compare_instance(name, pop, cfg, budget, seed + k)

    rows = run_pool(row_for, list(enumerate(paths)), threads)
    return _comparison_table(rows, 'Comparison'), rows


def reproduce_random(example: int, cfg: Optional[SolverConfig] = None, count: Optional[int] = None,
                     seed: Optional[int] = None, budget: int = 100_000, threads: int = 1) -> Table:
    count = count or DEFAULT_COUNTS[example]
    seed = DEFAULT_SEEDS[example] if seed is None else seed
    problems = instances.generate(example, count, seed, screen_budget=budget)
    named = [(str(k + 1), pop) for k, pop in enumerate(problems)]
    # TP-DNN of a linear constraint alone leaves the top-degree moments free
    cuts = instances.linear_product_cuts if example == 5 else None
    table, _ = compare_problems(named, cfg, budget, seed, threads, title=f'Example {example} (seed {seed})',
                                tensor_cuts=cuts)
    if cuts:
        table.notes.append("TP-DNN also uses the valid products x^beta * (a'x - b) <= 0, 1 <= |beta| <= 3.")
    return table


def reproduce(target: str, cfg: Optional[SolverConfig] = None, full: bool = False, budget: int = 100_000,
              seed: Optional[int] = None, threads: int = 1) -> Table:
    """
    One of the reproduction tables

    Args:
        target: ex1 .. ex5
        cfg: Solver configuration
        full: For ex2, the whole grid instead of the acceptance cells
        budget: Oracle samples per instance (ex3 .. ex5)
        seed: Generator seed for ex4 / ex5, oracle seed for ex3
        threads: Pool size
    """
    if target == 'ex1':
        return reproduce_ex1(cfg)
    if target == 'ex2':
        return reproduce_ex2(cfg, full=full, threads=threads)
    if target == 'ex3':
        return reproduce_ex3(cfg, budget=budget, seed=seed or 0, threads=threads)
    if target in ('ex4', 'ex5'):
        return reproduce_random(int(target[-1]), cfg, seed=seed, budget=budget, threads=threads)
    raise ValueError(f'Unknown target {target!r}; expected one of {", ".join(TARGETS)}')


TARGETS = ('ex1', 'ex2', 'ex3', 'ex4', 'ex5')
