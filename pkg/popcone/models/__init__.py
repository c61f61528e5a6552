from .enums import Approach, ConeKind, Domain, Relation, Sense, SolveStatus
from .polynomial import Constraint, Polynomial, PopProblem
from .symtensor import SliceIndex, SymmetricTensor
from .conic import ConicProgram, LiftingMap, LinearRow, PsdBlock
from .reports import ComparisonRow, OracleReport, SolveReport, SolverConfig

__all__ = [
    'Approach',
    'ConeKind',
    'Domain',
    'Relation',
    'Sense',
    'SolveStatus',
    'Constraint',
    'Polynomial',
    'PopProblem',
    'SliceIndex',
    'SymmetricTensor',
    'ConicProgram',
    'LiftingMap',
    'LinearRow',
    'PsdBlock',
    'ComparisonRow',
    'OracleReport',
    'SolveReport',
    'SolverConfig'
]
