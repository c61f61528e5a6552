"""
Sparse multivariate polynomials and the polynomial optimization problem model

A polynomial is a map from exponent tuples to float coefficients. Zero
coefficients are never stored, so two polynomials are equal iff their term
maps are equal. Arithmetic drops a term only when it cancels: its sum is
zero or rounding-level against the contributions that produced it.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Mapping, Sequence, Tuple, Union

import numpy as np

from ..errors import PolynomialError
from .enums import Domain, Relation, Sense

Exponent = Tuple[int, ...]

# A sum of contributions below this fraction of their total magnitude has cancelled
CANCEL_RTOL = 8 * np.finfo(float).eps


def make_exponent(powers: Iterable[int]) -> Exponent:
    """
    Validate and normalise an exponent vector

    Args:
        powers: Iterable of nonnegative integers, one per variable

    Returns:
        Exponent tuple
    """
    exp = tuple(int(p) for p in powers)
    if any(p < 0 for p in exp):
        raise PolynomialError(f'Exponent entries must be nonnegative, got {exp}')
    return exp


def unit_exponent(n: int, i: int, power: int = 1) -> Exponent:
    return tuple(power if k == i else 0 for k in range(n))


def add_exponents(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def _collect(contributions: Iterable[Tuple[Exponent, float]]) -> Dict[Exponent, float]:
    sums: Dict[Exponent, float] = {}
    magnitude: Dict[Exponent, float] = {}
    for exp, coef in contributions:
        sums[exp] = sums.get(exp, 0.0) + coef
        magnitude[exp] = magnitude.get(exp, 0.0) + abs(coef)
    return {e: c for e, c in sums.items() if abs(c) > CANCEL_RTOL * magnitude[e]}


@dataclass(frozen=True)
class Polynomial:
    n: int
    terms: Mapping[Exponent, float] = field(default_factory=dict)

    def __post_init__(self):
        cleaned: Dict[Exponent, float] = {}
        for exp, coef in dict(self.terms).items():
            exp = make_exponent(exp)
            if len(exp) != self.n:
                raise PolynomialError(
                    f'Exponent {exp} has length {len(exp)}, expected {self.n}'
                )
            coef = float(coef)
            if coef != 0.0:
                cleaned[exp] = coef
        object.__setattr__(self, 'terms', cleaned)

    # Constructors

    @classmethod
    def constant(cls, n: int, value: float) -> 'Polynomial':
        return cls(n, {(0,) * n: value})

    @classmethod
    def variable(cls, n: int, i: int) -> 'Polynomial':
        return cls(n, {unit_exponent(n, i): 1.0})

    @classmethod
    def monomial(cls, exp: Sequence[int], coef: float = 1.0) -> 'Polynomial':
        exp = make_exponent(exp)
        return cls(len(exp), {exp: coef})

    # Structure

    @property
    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def part_of_degree(self, k: int) -> 'Polynomial':
        """Sum of the terms whose total degree equals k (zero if there are none)."""
        return Polynomial(self.n, {e: c for e, c in self.terms.items() if sum(e) == k})

    # Arithmetic

    def _check_same_n(self, other: 'Polynomial'):
        if other.n != self.n:
            raise PolynomialError(f'Variable count mismatch: {self.n} vs {other.n}')

    def _coerce(self, other: Union['Polynomial', float, int]) -> 'Polynomial':
        if isinstance(other, Polynomial):
            self._check_same_n(other)
            return other
        return Polynomial.constant(self.n, float(other))

    def __add__(self, other):
        other = self._coerce(other)
        return Polynomial(self.n, _collect(list(self.terms.items()) + list(other.terms.items())))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(self.n, {e: c * float(other) for e, c in self.terms.items()})
        self._check_same_n(other)
        return Polynomial(self.n, _collect(
            (add_exponents(e1, e2), c1 * c2)
            for e1, c1 in self.terms.items()
            for e2, c2 in other.terms.items()
        ))

    __rmul__ = __mul__

    def __pow__(self, power: int):
        if power < 0:
            raise PolynomialError('Negative powers are not polynomials')
        result = Polynomial.constant(self.n, 1.0)
        base = self
        while power:
            if power & 1:
                result = result * base
            base = base * base
            power >>= 1
        return result

    # Evaluation

    def __call__(self, x: Sequence[float]) -> float:
        return evaluate(self, x)

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Exponent matrix (terms x n) and coefficient vector, in a stable order."""
        items = sorted(self.terms.items())
        if not items:
            return np.zeros((0, self.n), dtype=int), np.zeros(0)
        exps = np.array([e for e, _ in items], dtype=int)
        coefs = np.array([c for _, c in items], dtype=float)
        return exps, coefs

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate the polynomial at many points at once

        Args:
            points: Array of shape (batch, n)

        Returns:
            Array of shape (batch,)
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.n:
            raise PolynomialError(f'Points have {points.shape[1]} coordinates, expected {self.n}')
        exps, coefs = self.as_arrays()
        if len(coefs) == 0:
            return np.zeros(points.shape[0])
        monomials = np.prod(points[:, None, :] ** exps[None, :, :], axis=2)
        return monomials @ coefs

    # Serialization

    def to_json(self):
        return [{'exp': list(e), 'coef': c} for e, c in sorted(self.terms.items())]

    def __str__(self):
        if not self.terms:
            return '0'
        parts = []
        for exp, coef in sorted(self.terms.items(), key=lambda t: (-sum(t[0]), t[0])):
            mono = '*'.join(
                f'x{i + 1}' if p == 1 else f'x{i + 1}^{p}' for i, p in enumerate(exp) if p
            )
            parts.append(f'{coef:g}' + (f'*{mono}' if mono else ''))
        return ' + '.join(parts)


def evaluate(p: Polynomial, x: Sequence[float]) -> float:
    """
    Evaluate a polynomial at a point

    Args:
        p: Polynomial
        x: Point with p.n coordinates

    Returns:
        The scalar value sum_beta p_beta x^beta
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise PolynomialError(f'Point has shape {x.shape}, expected ({p.n},)')
    total = 0.0
    for exp, coef in p.terms.items():
        total += coef * float(np.prod(x ** np.array(exp)))
    return total


def homogeneous_top(p: Polynomial) -> Polynomial:
    """
    Highest-degree homogeneous component of a polynomial

    Args:
        p: Nonzero polynomial

    Returns:
        Sum of the terms of p whose total degree equals degree(p)
    """
    if p.is_zero():
        raise PolynomialError('The zero polynomial has no top homogeneous component')
    return p.part_of_degree(p.degree)


@dataclass(frozen=True)
class Constraint:
    poly: Polynomial
    relation: Relation = Relation.le
    rhs: float = 0.0

    def residual(self) -> Polynomial:
        """poly - rhs, so the constraint reads residual() <= 0 or == 0."""
        return self.poly - self.rhs

    def violation(self, values: np.ndarray) -> np.ndarray:
        """Amount by which poly values exceed what the relation allows."""
        gap = np.asarray(values, dtype=float) - self.rhs
        if self.relation is Relation.eq:
            return np.abs(gap)
        return np.maximum(gap, 0.0)


@dataclass(frozen=True)
class PopProblem:
    n: int
    objective: Polynomial
    constraints: Tuple[Constraint, ...] = ()
    sense: Sense = Sense.min
    domain: Domain = Domain.orthant

    def __post_init__(self):
        object.__setattr__(self, 'constraints', tuple(self.constraints))
        if self.objective.n != self.n:
            raise PolynomialError(f'Objective has {self.objective.n} variables, problem has {self.n}')
        for k, con in enumerate(self.constraints):
            if con.poly.n != self.n:
                raise PolynomialError(
                    f'Constraint {k} has {con.poly.n} variables, problem has {self.n}'
                )
        if self.degree < 1:
            raise PolynomialError('A problem needs total degree at least 1')

    @property
    def degree(self) -> int:
        degrees = [self.objective.degree] + [c.poly.degree for c in self.constraints]
        return max(degrees)

    @property
    def m(self) -> int:
        return len(self.constraints)

    def objective_values(self, points: np.ndarray) -> np.ndarray:
        return self.objective.evaluate_batch(points)

    def max_violation(self, points: np.ndarray) -> np.ndarray:
        """Largest constraint (and domain) violation at each point of a batch."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        worst = np.zeros(points.shape[0])
        if self.domain is Domain.orthant:
            worst = np.maximum(worst, np.max(np.maximum(-points, 0.0), axis=1))
        for con in self.constraints:
            worst = np.maximum(worst, con.violation(con.poly.evaluate_batch(points)))
        return worst

    def is_feasible(self, x: Sequence[float], tol: float = 1e-8) -> bool:
        return bool(self.max_violation(np.asarray(x, dtype=float)[None, :])[0] <= tol)

    def with_constraints(self, constraints: Iterable[Constraint]) -> 'PopProblem':
        return replace(self, constraints=tuple(constraints))


def multiply_constraint(pop: PopProblem, i: int, mono: Sequence[int]) -> PopProblem:
    """
    Append the valid inequality x^mono * (p_i(x) - rhs_i) <= 0

    Multiplying by a monomial keeps the sign of an inequality only when
    every variable is nonnegative, so this requires an orthant problem.

    Args:
        pop: Orthant-domain problem
        i: Index of a <= constraint
        mono: Exponent of the multiplying monomial

    Returns:
        New problem with one extra constraint; the original ones are unchanged
    """
    if pop.domain is not Domain.orthant:
        raise PolynomialError('Monomial multiplication is only sign-preserving on the orthant')
    if not 0 <= i < pop.m:
        raise PolynomialError(f'Constraint index {i} out of range (problem has {pop.m})')
    con = pop.constraints[i]
    if con.relation is not Relation.le:
        raise PolynomialError(f'Constraint {i} is an equality; only <= constraints can be multiplied')
    exp = make_exponent(mono)
    if len(exp) != pop.n:
        raise PolynomialError(f'Monomial exponent has length {len(exp)}, expected {pop.n}')
    product = Polynomial.monomial(exp) * con.residual()
    return pop.with_constraints(pop.constraints + (Constraint(product, Relation.le, 0.0),))
