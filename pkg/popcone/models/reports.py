import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .enums import SolveStatus

# Denominators below this make the improvement ratio undefined
RATIO_EPS = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """
    Tolerances and switches of the interior-point solver

    There is no determinism switch: the solver draws no random numbers and
    pivots the same way on every run, so one program and one config always
    give bit-identical reports.
    """
    tol_feas: float = 1e-8
    tol_gap: float = 1e-7
    max_iter: int = 200
    unbounded_threshold: float = 1e8
    # Equilibrate rows and columns before solving
    equilibrate: bool = True
    # Confirm UNBOUNDED verdicts with an explicit improving ray
    certify_rays: bool = True
    # Fraction of the distance to the cone boundary taken per step
    step_fraction: float = 0.99

    def __post_init__(self):
        for name in ('tol_feas', 'tol_gap', 'unbounded_threshold'):
            if getattr(self, name) <= 0:
                raise ValueError(f'{name} must be positive')
        if self.max_iter < 1:
            raise ValueError('max_iter must be at least 1')
        if not 0.0 < self.step_fraction < 1.0:
            raise ValueError('step_fraction must lie in (0, 1)')


@dataclass
class SolveReport:
    status: SolveStatus
    primal_value: float = math.nan
    dual_value: float = math.nan
    # Free multipliers for equality rows, nonnegative ones for <= rows, in row order
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    primal_solution: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residuals: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    ray: Optional[np.ndarray] = None
    certified: bool = False
    # NUMERICAL_TROUBLE run whose best iterate met the tolerances only within REDUCED_ACCURACY
    reduced_accuracy: bool = False
    message: str = ''

    @property
    def has_bound(self) -> bool:
        """True for an optimal run and for a stalled one that kept a reduced-accuracy value."""
        return self.status is SolveStatus.optimal or self.reduced_accuracy

    @property
    def bound(self) -> float:
        """The relaxation bound: primal value when it has one, +/-inf when unbounded."""
        if self.has_bound or self.status is SolveStatus.unbounded:
            return self.primal_value
        return math.nan

    @property
    def is_finite(self) -> bool:
        return self.status is SolveStatus.optimal and math.isfinite(self.primal_value)

    def summary(self) -> Dict[str, object]:
        return {
            'status': self.status.value,
            'primal_value': None if math.isnan(self.primal_value) else self.primal_value,
            'dual_value': None if math.isnan(self.dual_value) else self.dual_value,
            'iterations': self.iterations,
            'certified': self.certified,
            'reduced_accuracy': self.reduced_accuracy,
            'residuals': dict(self.residuals),
            'message': self.message,
        }


@dataclass
class OracleReport:
    best_value: float
    best_point: Optional[np.ndarray]
    samples_tried: int
    feasible_found: bool
    problem_hash: str = ''


@dataclass
class ComparisonRow:
    instance_id: str
    # None when the oracle found no feasible point
    oracle_value: Optional[float]
    tp_bound: float
    qp_bound: float
    tp_status: SolveStatus
    qp_status: SolveStatus
    error: str = ''
    # Non-fatal remarks such as a reduced-accuracy bound
    note: str = ''

    @property
    def ratio(self) -> Optional[float]:
        """(tp - qp) / (oracle - qp), undefined unless every value is finite and the gap is nonzero."""
        if self.oracle_value is None:
            return None
        values = (self.oracle_value, self.tp_bound, self.qp_bound)
        if not all(math.isfinite(v) for v in values):
            return None
        denominator = self.oracle_value - self.qp_bound
        if abs(denominator) <= RATIO_EPS:
            return None
        return (self.tp_bound - self.qp_bound) / denominator

    def cells(self) -> Tuple[object, ...]:
        return (
            self.instance_id,
            self.oracle_value,
            self.tp_bound,
            self.qp_bound,
            self.tp_status.value,
            self.qp_status.value,
            self.ratio,
        )
