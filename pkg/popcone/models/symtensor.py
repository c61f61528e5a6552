"""
Symmetric tensors stored by distinct exponent

A symmetric tensor of dimension n and order d has one value per multiset of
d indices. The multiset is written as its count vector alpha (an exponent of
total degree d); the value is shared by the d!/(alpha_1!...alpha_n!) index
tuples with those counts. Inner products fold that multiplicity in, so the
results match sums over all n^d positions.

Coordinate 0 of a lifted tensor is the homogenizing coordinate: M_d(1, x)
is the lift of the point (1, x).
"""
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from ..errors import TensorError
from .polynomial import Exponent, Polynomial, add_exponents, unit_exponent

# A matrix is accepted PSD when its smallest eigenvalue is at least -PSD_TOL*(1+||M||_inf)
PSD_TOL = 1e-8


@lru_cache(maxsize=None)
def exponents_of_degree(n: int, d: int) -> Tuple[Exponent, ...]:
    """
    All exponents of length n and total degree d

    The order is the lexicographic order of the sorted index multisets, so
    (d, 0, ..., 0) comes first.
    """
    out = []
    for combo in itertools.combinations_with_replacement(range(n), d):
        counts = [0] * n
        for i in combo:
            counts[i] += 1
        out.append(tuple(counts))
    return tuple(out)


def multiplicity(alpha: Sequence[int]) -> int:
    """Number of index tuples whose counts equal alpha: d!/(alpha_1!...alpha_n!)."""
    result = math.factorial(sum(alpha))
    for a in alpha:
        result //= math.factorial(a)
    return result


def exponent_of_indices(indices: Sequence[int], n: int) -> Exponent:
    counts = [0] * n
    for i in indices:
        counts[i] += 1
    return tuple(counts)


@dataclass(frozen=True)
class SymmetricTensor:
    dim: int
    order: int
    entries: Mapping[Exponent, float] = field(default_factory=dict)

    def __post_init__(self):
        cleaned: Dict[Exponent, float] = {}
        for exp, value in dict(self.entries).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.dim or sum(exp) != self.order or min(exp) < 0:
                raise TensorError(
                    f'Exponent {exp} is not a degree-{self.order} exponent of length {self.dim}'
                )
            if value != 0.0:
                cleaned[exp] = float(value)
        object.__setattr__(self, 'entries', cleaned)

    def __getitem__(self, alpha: Sequence[int]) -> float:
        return self.entries.get(tuple(alpha), 0.0)

    def at(self, indices: Sequence[int]) -> float:
        """Value at a position given as an index tuple (i_1, ..., i_d)."""
        if len(indices) != self.order:
            raise TensorError(f'Expected {self.order} indices, got {len(indices)}')
        return self[exponent_of_indices(indices, self.dim)]

    def dump(self) -> List[Tuple[Exponent, int, float]]:
        """(exponent, multiplicity, value) triples in exponent order, for fixtures."""
        return [(e, multiplicity(e), v) for e, v in sorted(self.entries.items())]

    def to_dense(self) -> np.ndarray:
        """Full n^d array. Only meant for small tensors in tests."""
        arr = np.zeros((self.dim,) * self.order)
        for idx in itertools.product(range(self.dim), repeat=self.order):
            arr[idx] = self.at(idx)
        return arr


@dataclass(frozen=True)
class SliceIndex:
    gamma: Exponent

    @property
    def is_principal(self) -> bool:
        return is_principal(self)


def m_d(x: Sequence[float], d: int) -> SymmetricTensor:
    """
    Rank-one lift x (x) ... (x) x with d factors

    Args:
        x: Point in R^n
        d: Order, at least 1

    Returns:
        Tensor whose entry at alpha is x^alpha
    """
    if d < 1:
        raise TensorError('Order must be at least 1')
    x = np.asarray(x, dtype=float)
    n = len(x)
    entries = {}
    for alpha in exponents_of_degree(n, d):
        entries[alpha] = float(np.prod(x ** np.array(alpha)))
    return SymmetricTensor(n, d, entries)


def e_tensor(n: int, d: int) -> SymmetricTensor:
    """All-ones tensor E_{n,d}."""
    return SymmetricTensor(n, d, {alpha: 1.0 for alpha in exponents_of_degree(n, d)})


def _check_shapes(t1: SymmetricTensor, t2: SymmetricTensor):
    if t1.dim != t2.dim or t1.order != t2.order:
        raise TensorError(
            f'Shape mismatch: ({t1.dim}, {t1.order}) vs ({t2.dim}, {t2.order})'
        )


def inner_product(t1: SymmetricTensor, t2: SymmetricTensor) -> float:
    """Sum over all index tuples, computed as sum_alpha mult(alpha) T1_alpha T2_alpha."""
    _check_shapes(t1, t2)
    small, large = (t1, t2) if len(t1.entries) <= len(t2.entries) else (t2, t1)
    total = 0.0
    for alpha, value in small.entries.items():
        other = large.entries.get(alpha)
        if other is not None:
            total += multiplicity(alpha) * value * other
    return total


def lift_exponent(beta: Exponent, d: int) -> Exponent:
    """Homogenize a monomial exponent of degree <= d: (d - |beta|, beta)."""
    return (d - sum(beta),) + tuple(beta)


def t_d(p: Polynomial, d: int) -> SymmetricTensor:
    """
    Coefficient tensor of p with respect to M_d(1, x)

    The entry at (d - |beta|, beta) is ((d-|beta|)! beta_1! ... beta_n! / d!) p_beta,
    i.e. p_beta divided by the multiplicity of that exponent, so that
    <T_d(p), M_d(1, x)> = p(x).

    Args:
        p: Polynomial in n variables
        d: Target order, at least degree(p)

    Returns:
        Symmetric tensor of dimension n + 1 and order d
    """
    if d < p.degree:
        raise TensorError(f'Order {d} is below the polynomial degree {p.degree}')
    if d < 1:
        raise TensorError('Order must be at least 1')
    entries = {}
    for beta, coef in p.terms.items():
        alpha = lift_exponent(beta, d)
        entries[alpha] = coef / multiplicity(alpha)
    return SymmetricTensor(p.n + 1, d, entries)


def _check_slice(order: int, gamma: Exponent, dim: int):
    if order < 2:
        raise TensorError('Slices need order at least 2')
    if len(gamma) != dim or sum(gamma) != order - 2:
        raise TensorError(
            f'Slice index {gamma} must have length {dim} and total degree {order - 2}'
        )


def slice_exponents(dim: int, order: int, g: SliceIndex) -> List[List[Exponent]]:
    """Exponent at every (j, k) position of the slice gamma + e_j + e_k."""
    _check_slice(order, g.gamma, dim)
    units = [unit_exponent(dim, j) for j in range(dim)]
    return [
        [add_exponents(add_exponents(g.gamma, units[j]), units[k]) for k in range(dim)]
        for j in range(dim)
    ]


def tensor_slice(t: SymmetricTensor, g: SliceIndex) -> np.ndarray:
    """
    Matrix obtained by fixing d-2 indices whose counts are g.gamma

    Args:
        t: Tensor of order at least 2
        g: Slice index with |gamma| = order - 2

    Returns:
        dim x dim symmetric matrix with M[j, k] = T[gamma + e_j + e_k]
    """
    positions = slice_exponents(t.dim, t.order, g)
    return np.array([[t[alpha] for alpha in row] for row in positions])


def is_principal(g: SliceIndex) -> bool:
    return all(c % 2 == 0 for c in g.gamma)


def enumerate_slices(n: int, d: int, principal_only: bool = False) -> List[SliceIndex]:
    """
    Distinct slice indices of a dimension-n, order-d tensor

    Args:
        n: Tensor dimension
        d: Tensor order, at least 2
        principal_only: Keep only slices whose fixed-index counts are all even

    Returns:
        One SliceIndex per distinct gamma with |gamma| = d - 2
    """
    if d < 2:
        raise TensorError('Slices need order at least 2')
    slices = [SliceIndex(gamma) for gamma in exponents_of_degree(n, d - 2)]
    if principal_only:
        slices = [g for g in slices if is_principal(g)]
    return slices


def unfolding_exponents(dim: int, order: int) -> List[List[Exponent]]:
    """
    Exponent at every position of the square unfolding of an even-order tensor

    Rows and columns are indexed by the degree-(order/2) exponents; position
    (beta, gamma) holds the entry at beta + gamma.
    """
    if order % 2:
        raise TensorError('Square unfoldings need even order')
    half = exponents_of_degree(dim, order // 2)
    return [[add_exponents(b, c) for c in half] for b in half]


def unfolding(t: SymmetricTensor) -> np.ndarray:
    positions = unfolding_exponents(t.dim, t.order)
    return np.array([[t[alpha] for alpha in row] for row in positions])


def is_psd(matrix: np.ndarray, tol: float = PSD_TOL) -> bool:
    """Smallest eigenvalue test with slack proportional to the matrix scale."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return True
    scale = 1.0 + np.max(np.sum(np.abs(matrix), axis=1))
    return bool(np.linalg.eigvalsh((matrix + matrix.T) / 2.0)[0] >= -tol * scale)
