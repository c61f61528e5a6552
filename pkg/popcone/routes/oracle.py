from flask import Blueprint
import logging

from popcone import utils
from popcone.errors import ProblemFormatError
from popcone.extensions import oracle_budget
from popcone.services.oracle import sample_upper_bound
from popcone.services.problem_io import problem_from_dict

# Create a blueprint for oracle routes
oracle_bp = Blueprint('oracle', __name__, url_prefix='/oracle')

# Requests cannot ask for more samples than this
MAX_BUDGET = 1_000_000


@oracle_bp.route('', methods=['POST'])
def sample_problem():
    """
    Best feasible value found by sampling

    Expected request body:
    {
        "problem": {...},
        "budget": 100000,
        "seed": 0
    }

    Returns:
        JSON with success=1, bestValue, bestPoint, samplesTried and feasibleFound
    """
    data, error = utils.get_request_data()
    if error:
        return error

    try:
        pop = problem_from_dict(data.get('problem'))
    except ProblemFormatError as e:
        return utils.error_response(str(e), 400)

    budget = data.get('budget', oracle_budget())
    seed = data.get('seed', 0)
    if not isinstance(budget, int) or isinstance(budget, bool) or not 1 <= budget <= MAX_BUDGET:
        return utils.error_response(f'budget must be an integer between 1 and {MAX_BUDGET}', 400)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        return utils.error_response('seed must be a nonnegative integer', 400)

    try:
        report = sample_upper_bound(pop, budget, seed)
    except Exception as e:
        logging.error(f"Oracle failed: {str(e)}")
        return utils.error_response(f'Oracle failed: {str(e)}', 500)

    return utils.success_response('Sampling finished', {
        'bestValue': utils.json_number(report.best_value),
        'bestPoint': None if report.best_point is None else [float(v) for v in report.best_point],
        'samplesTried': report.samples_tried,
        'feasibleFound': report.feasible_found,
        'problemHash': report.problem_hash,
    })
