from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .enums import Relation, Sense


@dataclass(frozen=True)
class LinearRow:
    coefs: Mapping[int, float]
    relation: Relation = Relation.le
    rhs: float = 0.0
    label: str = ''

    def value(self, x: np.ndarray) -> float:
        return float(sum(c * x[v] for v, c in self.coefs.items()))


@dataclass(frozen=True)
class PsdBlock:
    """
    Affine symmetric-matrix map  x -> C + sum_k x_k F_k  required to be PSD

    entries holds (var, i, j, coef) for every nonzero position of every F_k,
    both triangles listed; constant holds (i, j, value) for C.
    """
    size: int
    entries: Tuple[Tuple[int, int, int, float], ...]
    constant: Tuple[Tuple[int, int, float], ...] = ()
    label: str = ''

    def matrix(self, x: np.ndarray) -> np.ndarray:
        mat = np.zeros((self.size, self.size))
        for i, j, value in self.constant:
            mat[i, j] += value
        for var, i, j, coef in self.entries:
            mat[i, j] += coef * x[var]
        return mat

    def variables(self) -> List[int]:
        return sorted({e[0] for e in self.entries})

    def is_symmetric(self) -> bool:
        seen: Dict[Tuple[int, int, int], float] = {}
        for var, i, j, coef in self.entries:
            seen[(var, i, j)] = seen.get((var, i, j), 0.0) + coef
        const: Dict[Tuple[int, int], float] = {}
        for i, j, value in self.constant:
            const[(i, j)] = const.get((i, j), 0.0) + value
        if any(abs(c - seen.get((v, j, i), 0.0)) > 1e-12 for (v, i, j), c in seen.items()):
            return False
        return all(abs(c - const.get((j, i), 0.0)) <= 1e-12 for (i, j), c in const.items())


@dataclass(frozen=True)
class ConicProgram:
    num_vars: int
    objective: Mapping[int, float]
    sense: Sense = Sense.min
    rows: Tuple[LinearRow, ...] = ()
    psd_blocks: Tuple[PsdBlock, ...] = ()
    nonneg: Tuple[Mapping[int, float], ...] = ()
    var_labels: Tuple[str, ...] = ()
    meta: Mapping[str, object] = field(default_factory=dict)

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(c * x[v] for v, c in self.objective.items()))

    def shape(self) -> Dict[str, object]:
        """The size columns of a program-size comparison."""
        return {
            'vars': self.num_vars,
            'rows': len(self.rows),
            'nonneg': len(self.nonneg),
            'psd_blocks': len(self.psd_blocks),
            'psd_sizes': sorted({b.size for b in self.psd_blocks}),
        }

    def referenced_vars(self) -> set:
        refs = set(self.objective)
        for row in self.rows:
            refs.update(row.coefs)
        for block in self.psd_blocks:
            refs.update(e[0] for e in block.entries)
        for functional in self.nonneg:
            refs.update(functional)
        return refs

    def to_dict(self) -> Dict[str, object]:
        """Sparse JSON interchange dump for debugging and external cross-checks."""
        return {
            'vars': self.num_vars,
            'var_labels': list(self.var_labels),
            'sense': self.sense.value,
            'objective': [[v, c] for v, c in sorted(self.objective.items())],
            'rows': [
                {
                    'coefs': [[v, c] for v, c in sorted(row.coefs.items())],
                    'rel': row.relation.value,
                    'rhs': row.rhs,
                    'label': row.label,
                }
                for row in self.rows
            ],
            'nonneg': [[[v, c] for v, c in sorted(f.items())] for f in self.nonneg],
            'blocks': [
                {
                    'size': block.size,
                    'label': block.label,
                    'entries': [list(e) for e in block.entries],
                    'constant': [list(c) for c in block.constant],
                }
                for block in self.psd_blocks
            ],
            'meta': {k: v for k, v in self.meta.items()},
        }


@dataclass(frozen=True)
class LiftingMap:
    """
    Index of the additional variables y_c = x_a x_b of a quadratic lifting

    pairs maps c -> (a, b) with 1 <= a <= b <= n, all 1-based as in the
    index formula c = (n + 1 - a/2)(a - 1) + b - a + 1.
    """
    n: int
    pairs: Mapping[int, Tuple[int, int]]
    used: Optional[Tuple[int, ...]] = None

    @property
    def r(self) -> int:
        return len(self.pairs)

    def index_of(self, a: int, b: int) -> int:
        if a > b:
            a, b = b, a
        return (2 * self.n + 2 - a) * (a - 1) // 2 + b - a + 1

    def active(self) -> Tuple[int, ...]:
        """The c values carried into the relaxation (all of them unless pruned)."""
        if self.used is None:
            return tuple(sorted(self.pairs))
        return tuple(self.used)


def pair_label(pair: Sequence[int]) -> str:
    return f'y[{pair[0]},{pair[1]}]'
