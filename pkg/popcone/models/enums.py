import enum

class Sense(enum.Enum):
    min = 'min'
    max = 'max'

class Domain(enum.Enum):
    orthant = 'orthant'
    free = 'free'

class Relation(enum.Enum):
    le = '<='
    eq = '=='

class ConeKind(enum.Enum):
    l = 'l'
    sdp = 'sdp'
    dnn = 'dnn'

class Approach(enum.Enum):
    tensor = 'tensor'
    quadratic = 'quadratic'

class SolveStatus(enum.Enum):
    optimal = 'OPTIMAL'
    unbounded = 'UNBOUNDED'
    infeasible = 'INFEASIBLE'
    max_iter = 'MAX_ITER'
    numerical_trouble = 'NUMERICAL_TROUBLE'
