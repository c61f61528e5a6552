"""
Benchmark problems

The fixed examples (sum-power, bi-quadratic, non-convex QCQP, univariate
reformulation) and the generators of the random quartic families.
"""
import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from ..models.enums import Domain, Relation, Sense
from ..models.polynomial import Constraint, Polynomial, PopProblem, multiply_constraint
from ..models.symtensor import exponents_of_degree

# Oracle samples used to screen a generated random-constraint instance for feasibility
SCREEN_BUDGET = 100_000
SHELL_CENTER = 0.5
SHELL_RADII = (0.2, 0.6)


def _var(n: int, i: int) -> Polynomial:
    return Polynomial.variable(n, i)


def example1(n: int = 3) -> PopProblem:
    """min (sum x)^4  s.t.  x1^4 = 1, x >= 0; the optimum is 1 at x = e1."""
    total = sum((_var(n, i) for i in range(n)), Polynomial.constant(n, 0.0))
    return PopProblem(
        n=n,
        objective=total ** 4,
        constraints=(Constraint(_var(n, 0) ** 4, Relation.eq, 1.0),),
        sense=Sense.min,
        domain=Domain.orthant,
    )


def example1_quadratic(n: int = 3) -> PopProblem:
    """
    The same problem lifted with the fewest extra variables

    Variables are (x1..xn, y1, y2) with y1 = (sum x)^2 and y2 = x1^2:
    min y1^2  s.t.  y1 - (sum x)^2 = 0, y2 - x1^2 = 0, y2^2 = 1.
    """
    width = n + 2
    total = sum((_var(width, i) for i in range(n)), Polynomial.constant(width, 0.0))
    y1, y2 = _var(width, n), _var(width, n + 1)
    return PopProblem(
        n=width,
        objective=y1 * y1,
        constraints=(
            Constraint(y1 - total * total, Relation.eq, 0.0),
            Constraint(y2 - _var(width, 0) * _var(width, 0), Relation.eq, 0.0),
            Constraint(y2 * y2, Relation.eq, 1.0),
        ),
        sense=Sense.min,
        domain=Domain.orthant,
    )


def example2(n: int, m: int) -> PopProblem:
    """
    Bi-quadratic problem over two unit spheres

    min sum_{i<j, a<b} x_i x_j y_a y_b  s.t.  |x|^2 = 1, |y|^2 = 1, with x in R^n, y in R^m.
    The optimum is -(max(n, m) - 1) / 4.
    """
    if n < 2 or m < 2:
        raise ValueError('Both blocks need at least two variables')
    width = n + m
    terms: Dict[tuple, float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            for a in range(m):
                for b in range(a + 1, m):
                    exp = [0] * width
                    exp[i] += 1
                    exp[j] += 1
                    exp[n + a] += 1
                    exp[n + b] += 1
                    terms[tuple(exp)] = 1.0
    x_norm = sum((_var(width, i) ** 2 for i in range(n)), Polynomial.constant(width, 0.0))
    y_norm = sum((_var(width, n + a) ** 2 for a in range(m)), Polynomial.constant(width, 0.0))
    return PopProblem(
        n=width,
        objective=Polynomial(width, terms),
        constraints=(Constraint(x_norm, Relation.eq, 1.0), Constraint(y_norm, Relation.eq, 1.0)),
        sense=Sense.min,
        domain=Domain.free,
    )


def example2_optimum(n: int, m: int) -> float:
    return -(max(n, m) - 1) / 4.0


def _example3_polys():
    x1, x2 = _var(2, 0), _var(2, 1)
    f0 = -8 * x1 * x1 - x1 * x2 - 13 * x2 * x2 - 6 * x1 - x2
    f1 = x1 * x1 + x1 * x2 + 2 * x2 * x2 - 3 * x1 - 3 * x2 - 7
    f2 = 2 * x1 * x2 + 33 * x1 + 15 * x2 - 10
    f3 = x1 + 2 * x2 - 6
    return f0, f1, f2, f3


def example3(augmented: bool = False) -> PopProblem:
    """
    Non-convex QCQP in two variables, optimum -6.4444 at (0, 2/3)

    Args:
        augmented: Append the valid quartic inequalities x2*f2 <= 0 and x1^2*f1 <= 0
    """
    f0, f1, f2, f3 = _example3_polys()
    pop = PopProblem(
        n=2,
        objective=f0,
        constraints=tuple(Constraint(f, Relation.le, 0.0) for f in (f1, f2, f3)),
        sense=Sense.min,
        domain=Domain.orthant,
    )
    if augmented:
        pop = multiply_constraint(pop, 1, (0, 1))
        pop = multiply_constraint(pop, 0, (2, 0))
    return pop


def example3_quadratic() -> PopProblem:
    """
    Quadratic form of the augmented QCQP with slack-style extra variables

    Variables (x1, x2, y1, y2, y3) with y1 = -f1, y2 = -f2, y3 = x1^2, so the
    quartic cuts become the bilinear rows -x2*y2 <= 0 and -y1*y3 <= 0.
    """
    f0, f1, f2, f3 = _example3_polys()

    def widen(p: Polynomial) -> Polynomial:
        return Polynomial(5, {exp + (0, 0, 0): c for exp, c in p.terms.items()})

    x1, x2, y1, y2, y3 = (_var(5, i) for i in range(5))
    return PopProblem(
        n=5,
        objective=widen(f0),
        constraints=(
            Constraint(widen(f1) + y1, Relation.eq, 0.0),
            Constraint(widen(f2) + y2, Relation.eq, 0.0),
            Constraint(widen(f3), Relation.le, 0.0),
            Constraint(y3 - x1 * x1, Relation.eq, 0.0),
            Constraint(-(x2 * y2), Relation.le, 0.0),
            Constraint(-(y1 * y3), Relation.le, 0.0),
        ),
        sense=Sense.min,
        domain=Domain.orthant,
    )


EXAMPLE3_OPTIMUM = -58.0 / 9.0


def univariate_example() -> PopProblem:
    """sup x^4 + x^3 + x^2 + x + 1  s.t.  x^4 <= 1, x^2 - x - 0.5 <= 0, 0.3 - x <= 0; optimum 5 at x = 1."""
    x = _var(1, 0)
    return PopProblem(
        n=1,
        objective=x ** 4 + x ** 3 + x ** 2 + x + 1,
        constraints=(
            Constraint(x ** 4, Relation.le, 1.0),
            Constraint(x * x - x - 0.5, Relation.le, 0.0),
            Constraint(0.3 - x, Relation.le, 0.0),
        ),
        sense=Sense.max,
        domain=Domain.orthant,
    )


def _random_form(rng: np.random.Generator, n: int, degrees, low: int, high: int) -> Polynomial:
    terms = {}
    for d in degrees:
        for exp in exponents_of_degree(n, d):
            terms[exp] = float(rng.integers(low, high + 1))
    return Polynomial(n, terms)


def shell_constraints(n: int = 3) -> List[Constraint]:
    """|x - 0.5|^2 >= 0.2^2 (stored negated) and |x - 0.5|^2 <= 0.6^2."""
    dist = sum(((_var(n, i) - SHELL_CENTER) ** 2 for i in range(n)), Polynomial.constant(n, 0.0))
    inner, outer = SHELL_RADII
    return [Constraint(-dist, Relation.le, -inner ** 2), Constraint(dist, Relation.le, outer ** 2)]


def unit_box_constraints(n: int = 3, degree: int = 4) -> List[Constraint]:
    """
    0 <= x <= 1 as x_i <= 1 together with x^beta <= 1 for every monomial of the given degree

    On the orthant both forms describe the same box; the second one reaches the
    top-degree entries of a degree-matched relaxation.
    """
    rows = [Constraint(_var(n, i), Relation.le, 1.0) for i in range(n)]
    rows.extend(Constraint(Polynomial.monomial(exp), Relation.le, 1.0) for exp in exponents_of_degree(n, degree))
    return rows


def random_example4(rng: np.random.Generator) -> PopProblem:
    """Random homogeneous quartic over the shell between radii 0.2 and 0.6 inside [0, 1]^3."""
    objective = _random_form(rng, 3, (4,), -5, 5)
    return PopProblem(
        n=3,
        objective=objective,
        constraints=tuple(shell_constraints(3) + unit_box_constraints(3, 4)),
        sense=Sense.min,
        domain=Domain.orthant,
    )


def random_example5(rng: np.random.Generator) -> Optional[PopProblem]:
    """
    Random homogeneous quartic under two random quartic constraints and one linear constraint

    Returns:
        The problem, or None when the linear constraint has a zero coefficient
    """
    objective = _random_form(rng, 3, (4,), -5, 5)
    quartics = [_random_form(rng, 3, range(5), -10, 10) for _ in range(2)]
    linear = [float(v) for v in rng.integers(0, 6, size=3)]
    rhs = float(rng.integers(5, 16))
    if any(a == 0.0 for a in linear):
        return None
    linear_poly = Polynomial(3, {exp: a for exp, a in zip(exponents_of_degree(3, 1), linear)})
    constraints = [Constraint(q, Relation.le, 0.0) for q in quartics]
    constraints.append(Constraint(linear_poly, Relation.le, rhs))
    return PopProblem(n=3, objective=objective, constraints=tuple(constraints),
                      sense=Sense.min, domain=Domain.orthant)


def linear_product_cuts(pop: PopProblem, degree: int = 4) -> PopProblem:
    """
    Append x^beta * (a'x - rhs) <= 0 for every linear <= constraint and every 1 <= |beta| < degree

    The products are valid on the orthant, so the problem's feasible set is
    unchanged. When a has positive entries they chain every moment of degree
    up to `degree` back to the constant one, which keeps a degree-matched
    tensor relaxation bounded.

    Args:
        pop: Orthant-domain problem
        degree: Highest degree of the products

    Returns:
        New problem with the original constraints first, then the products
    """
    linear = [i for i, con in enumerate(pop.constraints)
              if con.relation is Relation.le and con.poly.degree == 1]
    out = pop
    for i in linear:
        for d in range(1, degree):
            for exp in exponents_of_degree(pop.n, d):
                out = multiply_constraint(out, i, exp)
    return out


def generate(example: int, count: int, seed: int, screen_budget: int = SCREEN_BUDGET,
             screen: Optional[Callable[[PopProblem, int], bool]] = None) -> List[PopProblem]:
    """
    Deterministic batch of random instances

    Args:
        example: 4 or 5
        count: Number of instances
        seed: Seed of the single generator stream all instances come from
        screen_budget: Oracle samples per Example-5 feasibility screen
        screen: Feasibility test (problem, attempt) -> bool; defaults to the sampling oracle

    Returns:
        count problems in generation order
    """
    if example not in (4, 5):
        raise ValueError(f'Unknown random example {example}; expected 4 or 5')
    if count < 1:
        raise ValueError('count must be at least 1')
    rng = np.random.default_rng(seed)
    if example == 4:
        return [random_example4(rng) for _ in range(count)]

    if screen is None:
        from .oracle import sample_upper_bound

        def screen(pop: PopProblem, attempt: int) -> bool:
            return sample_upper_bound(pop, screen_budget, seed=attempt, polish=False).feasible_found

    problems: List[PopProblem] = []
    attempt = 0
    while len(problems) < count:
        attempt += 1
        pop = random_example5(rng)
        if pop is None:
            continue
        if not screen(pop, attempt):
            logging.info(f"Discarding generated instance {attempt}: no feasible sample")
            continue
        problems.append(pop)
    return problems
