import json

import pytest

from popcone.errors import ProblemFormatError
from popcone.models.enums import Domain, Relation, Sense
from popcone.services import instances
from popcone.services.problem_io import (
    dumps_problem,
    load_problem,
    loads_problem,
    problem_from_dict,
    problem_hash,
    problem_summary,
    problem_to_dict,
    save_problem,
)

SIMPLE = {
    'n': 2,
    'sense': 'max',
    'domain': 'free',
    'objective': [{'exp': [1, 1], 'coef': 2}, {'exp': [0, 0], 'coef': -1.5}],
    'constraints': [{'poly': [{'exp': [2, 0], 'coef': 1}, {'exp': [0, 2], 'coef': 1}], 'rel': '==', 'rhs': 1}],
}


def test_parse_simple_problem():
    pop = problem_from_dict(SIMPLE)
    assert pop.n == 2
    assert pop.sense is Sense.max
    assert pop.domain is Domain.free
    assert pop.objective.terms == {(1, 1): 2.0, (0, 0): -1.5}
    assert pop.constraints[0].relation is Relation.eq
    assert pop.constraints[0].rhs == 1.0


def test_defaults():
    pop = problem_from_dict({'n': 1, 'objective': [{'exp': [2], 'coef': 1}]})
    assert pop.sense is Sense.min
    assert pop.domain is Domain.orthant
    assert pop.constraints == ()


def test_repeated_exponents_are_summed():
    pop = problem_from_dict({'n': 1, 'objective': [{'exp': [1], 'coef': 1}, {'exp': [1], 'coef': 2}]})
    assert pop.objective.terms == {(1,): 3.0}


@pytest.mark.parametrize('data', [
    None,
    [],
    {'n': 0, 'objective': []},
    {'n': True, 'objective': []},
    {'n': 2, 'objective': [{'exp': [1], 'coef': 1}]},
    {'n': 1, 'objective': [{'exp': [-1], 'coef': 1}]},
    {'n': 1, 'objective': [{'exp': [1.5], 'coef': 1}]},
    {'n': 1, 'objective': [{'exp': [1], 'coef': 'one'}]},
    {'n': 1, 'objective': [{'exp': [1]}]},
    {'n': 1, 'sense': 'minimize', 'objective': [{'exp': [1], 'coef': 1}]},
    {'n': 1, 'domain': 'box', 'objective': [{'exp': [1], 'coef': 1}]},
    {'n': 1, 'objective': [{'exp': [1], 'coef': 1}], 'constraints': {}},
    {'n': 1, 'objective': [{'exp': [1], 'coef': 1}], 'constraints': [{'poly': [], 'rel': '>=', 'rhs': 0}]},
    {'n': 1, 'objective': [{'exp': [1], 'coef': 1}], 'constraints': [{'poly': [], 'rhs': 'zero'}]},
    {'n': 1, 'objective': [{'exp': [0], 'coef': 1}]},
])
def test_invalid_documents(data):
    with pytest.raises(ProblemFormatError):
        problem_from_dict(data)


def test_invalid_json_text():
    with pytest.raises(ProblemFormatError):
        loads_problem('{"n": 1,')


def test_missing_file(tmp_path):
    with pytest.raises(ProblemFormatError):
        load_problem(tmp_path / 'missing.json')


def test_save_and_load(tmp_path):
    pop = instances.example3(augmented=True)
    path = tmp_path / 'ex3.json'
    save_problem(pop, path)
    loaded = load_problem(path)
    assert loaded == pop
    assert problem_hash(loaded) == problem_hash(pop)


def test_dump_is_canonical():
    pop = instances.example2(2, 2)
    text = dumps_problem(pop)
    assert text.endswith('\n')
    assert json.loads(text) == problem_to_dict(pop)
    assert dumps_problem(loads_problem(text)) == text


def test_hash_tells_problems_apart():
    assert problem_hash(instances.example3()) != problem_hash(instances.example3(augmented=True))
    assert len(problem_hash(instances.example1())) == 64


def test_summary_lists_constraints():
    lines = problem_summary(instances.example3())
    assert len(lines) == 4
    assert lines[0].startswith('min ')
