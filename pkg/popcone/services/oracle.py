"""
Sampling oracle

Finds good feasible points of a polynomial problem by uniform sampling over a
box, then polishes the best ones coordinate by coordinate and with a local
SLSQP solve. The best feasible value is an upper bound (for minimization) that
every relaxation bound must not exceed.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ..errors import OracleError
from ..models.enums import Domain, Relation, Sense
from ..models.polynomial import PopProblem
from ..models.reports import OracleReport
from .problem_io import problem_hash

FEAS_TOL = 1e-8
VERIFY_TOL = 1e-6
BATCH_SIZE = 10_000
POLISH_STARTS = 10
POLISH_ROUNDS = 50
# Penalty weight of constraint violation inside the coordinate line searches
PENALTY = 1e6
DEFAULT_BOX = {Domain.orthant: (0.0, 10.0), Domain.free: (-10.0, 10.0)}


def sampling_box(pop: PopProblem) -> Tuple[np.ndarray, np.ndarray]:
    """
    Box the sampler draws from

    Starts from the domain default and, on the orthant, tightens the upper
    ends with every linear <= constraint whose coefficients are nonnegative.
    """
    low, high = DEFAULT_BOX[pop.domain]
    lower = np.full(pop.n, low)
    upper = np.full(pop.n, high)
    if pop.domain is not Domain.orthant:
        return lower, upper
    for con in pop.constraints:
        if con.relation is not Relation.le or con.poly.degree != 1:
            continue
        linear = con.poly.part_of_degree(1)
        if any(c < 0 for c in linear.terms.values()):
            continue
        room = con.rhs - con.poly.part_of_degree(0).terms.get((0,) * pop.n, 0.0)
        if room < 0:
            continue
        for exp, coef in linear.terms.items():
            if coef > 0:
                i = exp.index(1)
                upper[i] = min(upper[i], room / coef)
    return lower, upper


def _sample_batch(pop: PopProblem, seed: int, batch: int, size: int,
                  lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, batch])
    points = lower + (upper - lower) * rng.random((size, pop.n))
    return points, pop.objective_values(points), pop.max_violation(points)


def _signed(pop: PopProblem) -> float:
    return -1.0 if pop.sense is Sense.max else 1.0


def _coordinate_polish(pop: PopProblem, x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per-coordinate bounded line searches; a move is kept only if it stays feasible and improves."""
    sign = _signed(pop)
    best = x.copy()
    best_value = sign * pop.objective(best)
    for _ in range(POLISH_ROUNDS):
        improved = False
        for i in range(pop.n):
            trial = best.copy()

            def merit(t: float) -> float:
                trial[i] = t
                point = trial[None, :]
                return sign * float(pop.objective_values(point)[0]) + PENALTY * float(pop.max_violation(point)[0])

            result = minimize_scalar(merit, bounds=(lower[i], upper[i]), method='bounded',
                                     options={'xatol': 1e-10})
            trial[i] = result.x
            value = sign * pop.objective(trial)
            if value < best_value - 1e-12 and pop.is_feasible(trial, FEAS_TOL):
                best, best_value, improved = trial, value, True
        if not improved:
            break
    return best


def _local_solve(pop: PopProblem, x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Optional[np.ndarray]:
    sign = _signed(pop)
    constraints = []
    for con in pop.constraints:
        poly, rhs = con.poly, con.rhs
        if con.relation is Relation.eq:
            constraints.append({'type': 'eq', 'fun': lambda z, p=poly, r=rhs: p(z) - r})
        else:
            constraints.append({'type': 'ineq', 'fun': lambda z, p=poly, r=rhs: r - p(z)})
    try:
        result = minimize(lambda z: sign * pop.objective(z), x, method='SLSQP',
                          bounds=list(zip(lower, upper)), constraints=constraints,
                          options={'maxiter': 300, 'ftol': 1e-12})
    except (ValueError, ArithmeticError) as e:
        logging.debug(f"Local solve failed: {e}")
        return None
    candidate = np.clip(result.x, lower, upper)
    if not np.all(np.isfinite(candidate)) or not pop.is_feasible(candidate, FEAS_TOL):
        return None
    return candidate


def sample_upper_bound(pop: PopProblem, budget: int, seed: int, polish: bool = True,
                       threads: int = 1) -> OracleReport:
    """
    Best feasible objective value found by sampling

    Args:
        pop: Problem to sample
        budget: Number of uniform samples
        seed: Seed of the sample streams; batch k uses the stream (seed, k)
        polish: Refine the best samples with coordinate searches and SLSQP
        threads: Number of batches drawn concurrently; the result does not depend on it

    Returns:
        OracleReport; feasible_found is False when no feasible point was met
    """
    if budget < 1:
        raise ValueError('budget must be at least 1')
    lower, upper = sampling_box(pop)
    sizes = [min(BATCH_SIZE, budget - start) for start in range(0, budget, BATCH_SIZE)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        batches = list(pool.map(lambda kb: _sample_batch(pop, seed, kb[0], kb[1], lower, upper),
                                enumerate(sizes)))

    sign = _signed(pop)
    points = np.vstack([b[0] for b in batches])
    values = sign * np.concatenate([b[1] for b in batches])
    violation = np.concatenate([b[2] for b in batches])
    feasible = violation <= FEAS_TOL

    best_point: Optional[np.ndarray] = None
    if np.any(feasible):
        k = int(np.argmin(np.where(feasible, values, np.inf)))
        best_point = points[k].copy()

    if polish:
        starts: List[np.ndarray] = []
        feasible_idx = np.flatnonzero(feasible)
        if len(feasible_idx):
            order = feasible_idx[np.argsort(values[feasible_idx], kind='stable')]
            starts.extend(points[k] for k in order[:POLISH_STARTS])
        if len(starts) < POLISH_STARTS:
            infeasible_idx = np.flatnonzero(~feasible)
            order = infeasible_idx[np.argsort(violation[infeasible_idx], kind='stable')]
            starts.extend(points[k] for k in order[:POLISH_STARTS - len(starts)])
        for start in starts:
            candidates = []
            if pop.is_feasible(start, FEAS_TOL):
                start = _coordinate_polish(pop, start, lower, upper)
                candidates.append(start)
            refined = _local_solve(pop, start, lower, upper)
            if refined is not None:
                candidates.append(refined)
            for cand in candidates:
                if best_point is None or sign * pop.objective(cand) < sign * pop.objective(best_point):
                    best_point = cand

    if best_point is None:
        logging.warning(f"Oracle found no feasible point in {budget} samples")
        best_value = math.inf * sign
    else:
        best_value = pop.objective(best_point)
    return OracleReport(
        best_value=float(best_value),
        best_point=best_point,
        samples_tried=budget,
        feasible_found=best_point is not None,
        problem_hash=problem_hash(pop),
    )


def verify_bound(pop: PopProblem, bound: float, report: OracleReport) -> bool:
    """
    Whether a relaxation bound is consistent with the best known feasible value

    Args:
        pop: Problem the bound and the report belong to
        bound: Relaxation bound (may be infinite)
        report: Oracle report for the same problem

    Returns:
        True for MIN when bound <= best_value + 1e-6, for MAX when bound >= best_value - 1e-6;
        True when the oracle found no feasible point
    """
    if report.problem_hash and report.problem_hash != problem_hash(pop):
        raise OracleError('The oracle report belongs to a different problem')
    if math.isnan(bound):
        return False
    if not report.feasible_found:
        return True
    if pop.sense is Sense.max:
        return bound >= report.best_value - VERIFY_TOL
    return bound <= report.best_value + VERIFY_TOL
