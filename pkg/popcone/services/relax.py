"""
Relaxation builders

Two families of conic programs are produced from a PopProblem:

  - tensor relaxations: one symmetric tensor variable X of order d over the
    homogenized coordinates (x0, x), with rows <T_d(p_i), X> and the cone
    replaced by an entrywise (L), slice-PSD (DNN) or unfolding-PSD (SDP)
    outer approximation;
  - quadratic relaxations: the problem is first rewritten over z = (x, y)
    with y_c standing for x_a x_b, then relaxed with one matrix Z of size
    1 + n + r and linking rows Z[0, y_c] = Z[x_a, x_b].

Both are assembled through the same order-d index, the quadratic case being
the order-2 tensor of the lifted problem.
"""
import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import RelaxationError
from ..models.conic import ConicProgram, LiftingMap, LinearRow, PsdBlock, pair_label
from ..models.enums import ConeKind, Domain, Relation
from ..models.polynomial import Constraint, Exponent, Polynomial, PopProblem, unit_exponent
from ..models.symtensor import (
    enumerate_slices,
    exponents_of_degree,
    multiplicity,
    slice_exponents,
    t_d,
    unfolding_exponents,
)


def even_order(degree: int) -> int:
    """Round a degree up to the nearest even order, at least 2."""
    return max(2, 2 * ((degree + 1) // 2))


class TensorIndex:
    """Variable numbering for the distinct entries of a dim x ... x dim order-d tensor."""

    def __init__(self, dim: int, order: int):
        self.dim = dim
        self.order = order
        self.exponents = exponents_of_degree(dim, order)
        self.position = {alpha: k for k, alpha in enumerate(self.exponents)}

    @property
    def size(self) -> int:
        return len(self.exponents)

    def var(self, alpha: Exponent) -> int:
        return self.position[tuple(alpha)]

    @property
    def normalizer(self) -> int:
        """Variable of X at (d, 0, ..., 0), the entry <T_d(1), X> reads."""
        return self.var(unit_exponent(self.dim, 0, self.order))

    def functional(self, p: Polynomial) -> Dict[int, float]:
        """
        Coefficients of <T_d(p), X> over the tensor variables

        Each tensor entry is weighted by its multiplicity, which cancels the
        1/multiplicity inside T_d and leaves the polynomial coefficient.
        """
        tensor = t_d(p, self.order)
        return {self.var(alpha): multiplicity(alpha) * value for alpha, value in tensor.entries.items()}

    def labels(self) -> Tuple[str, ...]:
        return tuple('X' + ''.join(str(a) for a in alpha) for alpha in self.exponents)

    def block(self, positions: List[List[Exponent]], label: str) -> PsdBlock:
        entries = []
        for i, row in enumerate(positions):
            for j, alpha in enumerate(row):
                entries.append((self.var(alpha), i, j, 1.0))
        return PsdBlock(size=len(positions), entries=tuple(entries), label=label)


def _constraint_rows(index: TensorIndex, constraints: Sequence[Constraint],
                     localize_equalities: bool) -> List[LinearRow]:
    rows = []
    n = index.dim - 1
    for k, con in enumerate(constraints):
        rows.append(LinearRow(index.functional(con.poly), con.relation, con.rhs, label=f'c{k}'))
        if con.relation is not Relation.eq or not localize_equalities:
            continue
        # x^mu * (h - rhs) = 0 is valid for every monomial mu on either domain
        residual = con.residual()
        for extra in range(1, index.order - con.poly.degree + 1):
            for mu in exponents_of_degree(n, extra):
                product = Polynomial.monomial(mu) * residual
                if product.is_zero():
                    continue
                rows.append(LinearRow(index.functional(product), Relation.eq, 0.0,
                                      label=f'c{k}*x^{"".join(map(str, mu))}'))
    return rows


def _normalization_row(index: TensorIndex) -> LinearRow:
    return LinearRow({index.normalizer: 1.0}, Relation.eq, 1.0, label='normalize')


def build_tensor_relaxation(pop: PopProblem, cone: ConeKind, add_sign_rows: bool = False,
                            principal_only: bool = False,
                            localize_equalities: bool = True) -> ConicProgram:
    """
    Tensor-cone relaxation [TP-K] of a polynomial optimization problem

    Args:
        pop: Problem to relax
        cone: L (entries >= 0), DNN (entries >= 0 and every slice PSD) or SDP
            (square unfolding PSD, which contains every principal slice)
        add_sign_rows: Add <T_d(-x_i), X> <= 0 for every variable
        principal_only: For SDP, constrain only the principal slices instead of the unfolding
        localize_equalities: Also lift x^mu * h = 0 for equality constraints h of degree below d

    Returns:
        ConicProgram over the distinct entries of X
    """
    if pop.objective.is_zero():
        raise RelaxationError('The objective is empty')
    if cone in (ConeKind.l, ConeKind.dnn) and pop.domain is not Domain.orthant:
        raise RelaxationError(f'Cone {cone.value} approximates the orthant cone; the problem is free')

    order = even_order(pop.degree)
    index = TensorIndex(pop.n + 1, order)

    rows = [_normalization_row(index)]
    rows.extend(_constraint_rows(index, pop.constraints, localize_equalities))
    if add_sign_rows:
        for i in range(pop.n):
            rows.append(LinearRow(index.functional(-Polynomial.variable(pop.n, i)),
                                  Relation.le, 0.0, label=f'sign{i}'))

    blocks: List[PsdBlock] = []
    nonneg: List[Dict[int, float]] = []
    if cone in (ConeKind.l, ConeKind.dnn):
        nonneg = [{k: 1.0} for k in range(index.size)]
    if cone is ConeKind.dnn:
        for g in enumerate_slices(index.dim, order):
            blocks.append(index.block(slice_exponents(index.dim, order, g), label=f'slice{g.gamma}'))
    elif cone is ConeKind.sdp:
        if principal_only:
            for g in enumerate_slices(index.dim, order, principal_only=True):
                blocks.append(index.block(slice_exponents(index.dim, order, g), label=f'slice{g.gamma}'))
        else:
            blocks.append(index.block(unfolding_exponents(index.dim, order), label='unfolding'))

    program = ConicProgram(
        num_vars=index.size,
        objective=index.functional(pop.objective),
        sense=pop.sense,
        rows=tuple(rows),
        psd_blocks=tuple(blocks),
        nonneg=tuple(nonneg),
        var_labels=index.labels(),
        meta={'approach': 'tensor', 'cone': cone.value, 'order': order, 'dim': index.dim},
    )
    logging.debug(f"Built tensor relaxation ({cone.value}, d={order}): {program.shape()}")
    return program


def build_lifting_map(n: int) -> LiftingMap:
    """
    Index set of the additional variables y_c = x_a x_b, 1 <= a <= b <= n

    Args:
        n: Number of original variables

    Returns:
        LiftingMap with r = n(n+1)/2 pairs numbered 1..r
    """
    if n < 1:
        raise RelaxationError('A lifting needs at least one variable')
    lmap = LiftingMap(n=n, pairs={})
    pairs = {lmap.index_of(a, b): (a, b) for a in range(1, n + 1) for b in range(a, n + 1)}
    return LiftingMap(n=n, pairs=pairs)


def _split_monomial(exp: Exponent) -> Tuple[List[Tuple[int, int]], List[int]]:
    """
    Canonical split of a degree-3 or degree-4 monomial

    The sorted variable indices are paired smallest first: degree 4 gives two
    pairs, degree 3 one pair and the largest index left as a plain variable.
    Indices are 1-based.
    """
    indices = sorted(itertools.chain.from_iterable([i + 1] * p for i, p in enumerate(exp)))
    if len(indices) == 4:
        return [(indices[0], indices[1]), (indices[2], indices[3])], []
    return [(indices[0], indices[1])], [indices[2]]


def qcqp_reformulate(pop: PopProblem, prune: bool = True) -> Tuple[PopProblem, LiftingMap]:
    """
    Rewrite a problem of degree <= 4 as a quadratic problem over z = (x, y)

    The linking equalities y_c = x_a x_b are not added as constraints; they are
    recorded in the returned map and become linking rows of the matrix relaxation.

    Args:
        pop: Problem of degree at most 4
        prune: Keep only the y variables some monomial actually uses

    Returns:
        (lifted problem, lifting map)
    """
    if pop.degree > 4:
        raise RelaxationError(f'Quadratic lifting supports degree <= 4, got {pop.degree}')
    lmap = build_lifting_map(pop.n)

    def collect(p: Polynomial, used: set):
        for exp in p.terms:
            if sum(exp) > 2:
                pairs, _ = _split_monomial(exp)
                used.update(lmap.index_of(a, b) for a, b in pairs)

    used: set = set()
    for p in [pop.objective] + [c.poly for c in pop.constraints]:
        collect(p, used)
    active = tuple(sorted(used)) if prune else tuple(sorted(lmap.pairs))
    slot = {c: pop.n + k for k, c in enumerate(active)}
    width = pop.n + len(active)

    def rewrite(p: Polynomial) -> Polynomial:
        terms: Dict[Exponent, float] = {}
        for exp, coef in p.terms.items():
            new = [0] * width
            if sum(exp) <= 2:
                new[:pop.n] = exp
            else:
                pairs, singles = _split_monomial(exp)
                for a, b in pairs:
                    new[slot[lmap.index_of(a, b)]] += 1
                for i in singles:
                    new[i - 1] += 1
            key = tuple(new)
            terms[key] = terms.get(key, 0.0) + coef
        return Polynomial(width, terms)

    lifted = PopProblem(
        n=width,
        objective=rewrite(pop.objective),
        constraints=tuple(Constraint(rewrite(c.poly), c.relation, c.rhs) for c in pop.constraints),
        sense=pop.sense,
        domain=pop.domain,
    )
    return lifted, LiftingMap(n=pop.n, pairs=lmap.pairs, used=active)


def build_qp_relaxation(lifted: PopProblem, lmap: Optional[LiftingMap], cone: ConeKind,
                        relaxed_linking: bool = False) -> ConicProgram:
    """
    Matrix relaxation of a quadratic (lifted) problem

    Args:
        lifted: Problem of degree <= 2 over z = (x, y)
        lmap: Lifting map from qcqp_reformulate, or None when nothing was lifted
        cone: SDP (Z PSD), DNN (Z PSD and entrywise >= 0) or L (entrywise >= 0)
        relaxed_linking: Use Z[0, y_c] - Z[x_a, x_b] <= 0 instead of equality

    Returns:
        ConicProgram over the upper triangle of Z
    """
    if lifted.degree > 2:
        raise RelaxationError(f'The lifted problem must be quadratic, got degree {lifted.degree}')
    if lifted.objective.is_zero():
        raise RelaxationError('The objective is empty')
    if cone in (ConeKind.l, ConeKind.dnn) and lifted.domain is not Domain.orthant:
        raise RelaxationError(f'Cone {cone.value} needs an orthant-domain problem')

    index = TensorIndex(lifted.n + 1, 2)
    rows = [_normalization_row(index)]
    rows.extend(_constraint_rows(index, lifted.constraints, localize_equalities=False))

    labels = list(index.labels())
    active = lmap.active() if lmap is not None else ()
    base = lmap.n if lmap is not None else lifted.n
    if lmap is not None and base + len(active) != lifted.n:
        raise RelaxationError('The lifting map does not match the lifted problem')
    relation = Relation.le if relaxed_linking else Relation.eq
    dim = index.dim
    for k, c in enumerate(active):
        a, b = lmap.pairs[c]
        y_pos = 1 + base + k
        link_var = index.var(tuple(int(i in (0, y_pos)) for i in range(dim)))
        prod = [0] * dim
        prod[a] += 1
        prod[b] += 1
        rows.append(LinearRow({link_var: 1.0, index.var(tuple(prod)): -1.0}, relation, 0.0,
                              label=f'link{c}'))
        labels[link_var] = pair_label((a, b))

    blocks: List[PsdBlock] = []
    nonneg: List[Dict[int, float]] = []
    full = [[tuple(int(i == j) + int(i == k) for i in range(dim)) for k in range(dim)] for j in range(dim)]
    if cone in (ConeKind.sdp, ConeKind.dnn):
        blocks.append(index.block(full, label='Z'))
    if cone in (ConeKind.l, ConeKind.dnn):
        nonneg = [{k: 1.0} for k in range(index.size)]
    elif lifted.domain is Domain.orthant:
        # z >= 0 lives in the first row of Z
        nonneg = [{index.var(full[0][j]): 1.0} for j in range(1, dim)]

    program = ConicProgram(
        num_vars=index.size,
        objective=index.functional(lifted.objective),
        sense=lifted.sense,
        rows=tuple(rows),
        psd_blocks=tuple(blocks),
        nonneg=tuple(nonneg),
        var_labels=tuple(labels),
        meta={'approach': 'quadratic', 'cone': cone.value, 'order': 2, 'dim': dim,
              'relaxed_linking': relaxed_linking, 'lifted_pairs': len(active)},
    )
    logging.debug(f"Built quadratic relaxation ({cone.value}): {program.shape()}")
    return program


def linking_relaxation_applies(pop: PopProblem) -> bool:
    """
    Whether the lifted objective has only nonnegative coefficients

    The equivalence of equality and relaxed linking holds for a MAXIMIZATION
    with such an objective: relaxed linking only asks y_c <= x_a x_b, and
    raising y_c to x_a x_b never lowers the objective there. This check does
    not look at the sense, so it also returns True for a MIN problem like the
    sum-power objective, where the two linkings can give different bounds.
    Callers that rely on the equivalence must check pop.sense is Sense.max
    themselves.
    A zero objective qualifies trivially.

    Args:
        pop: Problem of degree at most 4

    Returns:
        True when every coefficient of the (lifted) objective is >= 0
    """
    objective = pop.objective
    if objective.is_zero():
        return True
    if pop.degree > 2 and pop.degree <= 4:
        objective = qcqp_reformulate(pop)[0].objective
    return all(c >= 0 for c in objective.terms.values())
