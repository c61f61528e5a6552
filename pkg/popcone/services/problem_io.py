"""
Problem file format

  {"n": 2, "sense": "min", "domain": "orthant",
   "objective": [{"exp": [1, 1], "coef": 1.0}],
   "constraints": [{"poly": [...], "rel": "<=", "rhs": 0.0}]}
"""
import hashlib
import json
import os
from typing import Any, Dict, List, Union

from ..errors import PolynomialError, ProblemFormatError
from ..models.enums import Domain, Relation, Sense
from ..models.polynomial import Constraint, Polynomial, PopProblem


def _enum(kind, value, field_name):
    try:
        return kind(value)
    except ValueError:
        allowed = ', '.join(repr(m.value) for m in kind)
        raise ProblemFormatError(f'Invalid {field_name} {value!r}; expected one of {allowed}')


def _poly_from_json(n: int, terms: Any, where: str) -> Polynomial:
    if not isinstance(terms, list):
        raise ProblemFormatError(f'{where} must be a list of terms')
    parsed: Dict[tuple, float] = {}
    for k, term in enumerate(terms):
        if not isinstance(term, dict) or 'exp' not in term or 'coef' not in term:
            raise ProblemFormatError(f'{where}[{k}] needs "exp" and "coef"')
        exp = term['exp']
        if not isinstance(exp, list) or len(exp) != n:
            raise ProblemFormatError(f'{where}[{k}].exp must be a list of {n} integers')
        if not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in exp):
            raise ProblemFormatError(f'{where}[{k}].exp must hold nonnegative integers')
        coef = term['coef']
        if isinstance(coef, bool) or not isinstance(coef, (int, float)):
            raise ProblemFormatError(f'{where}[{k}].coef must be a number')
        key = tuple(exp)
        parsed[key] = parsed.get(key, 0.0) + float(coef)
    return Polynomial(n, parsed)


def problem_from_dict(data: Any) -> PopProblem:
    """
    Validate and build a PopProblem from decoded JSON

    Args:
        data: Decoded JSON document

    Returns:
        PopProblem
    """
    if not isinstance(data, dict):
        raise ProblemFormatError('A problem must be a JSON object')
    n = data.get('n')
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFormatError('"n" must be a positive integer')
    sense = _enum(Sense, data.get('sense', 'min'), 'sense')
    domain = _enum(Domain, data.get('domain', 'orthant'), 'domain')
    objective = _poly_from_json(n, data.get('objective', []), 'objective')

    constraints = []
    raw = data.get('constraints', [])
    if not isinstance(raw, list):
        raise ProblemFormatError('"constraints" must be a list')
    for k, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ProblemFormatError(f'constraints[{k}] must be an object')
        poly = _poly_from_json(n, item.get('poly', []), f'constraints[{k}].poly')
        relation = _enum(Relation, item.get('rel', '<='), f'constraints[{k}].rel')
        rhs = item.get('rhs', 0.0)
        if isinstance(rhs, bool) or not isinstance(rhs, (int, float)):
            raise ProblemFormatError(f'constraints[{k}].rhs must be a number')
        constraints.append(Constraint(poly, relation, float(rhs)))

    try:
        return PopProblem(n=n, objective=objective, constraints=tuple(constraints),
                          sense=sense, domain=domain)
    except PolynomialError as e:
        raise ProblemFormatError(str(e))


def problem_to_dict(pop: PopProblem) -> Dict[str, Any]:
    return {
        'n': pop.n,
        'sense': pop.sense.value,
        'domain': pop.domain.value,
        'objective': pop.objective.to_json(),
        'constraints': [
            {'poly': c.poly.to_json(), 'rel': c.relation.value, 'rhs': c.rhs}
            for c in pop.constraints
        ],
    }


def dumps_problem(pop: PopProblem) -> str:
    """Canonical text form: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(problem_to_dict(pop), indent=2, sort_keys=True) + '\n'


def loads_problem(text: str) -> PopProblem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFormatError(f'Invalid JSON: {e}')
    return problem_from_dict(data)


def load_problem(path: Union[str, os.PathLike]) -> PopProblem:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ProblemFormatError(f'Cannot read {path}: {e}')
    return loads_problem(text)


def save_problem(pop: PopProblem, path: Union[str, os.PathLike]):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_problem(pop))


def problem_hash(pop: PopProblem) -> str:
    """sha256 of the canonical JSON form; equal problems hash equally."""
    payload = json.dumps(problem_to_dict(pop), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def problem_summary(pop: PopProblem) -> List[str]:
    lines = [f'{pop.sense.value} {pop.objective}  (n={pop.n}, domain={pop.domain.value}, degree={pop.degree})']
    for c in pop.constraints:
        lines.append(f'  s.t. {c.poly} {c.relation.value} {c.rhs:g}')
    return lines
