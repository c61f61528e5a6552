from flask import Blueprint, current_app
import logging

from popcone import utils
from popcone.errors import ProblemFormatError, RelaxationError
from popcone.extensions import load_solver_config
from popcone.models.enums import SolveStatus
from popcone.services.experiments import solve_relaxation
from popcone.services.problem_io import problem_from_dict, problem_hash

# Create a blueprint for relaxation routes
relax_bp = Blueprint('relax', __name__, url_prefix='/relax')


@relax_bp.route('/', methods=['GET'])
def relax_status():
    """
    Report which relaxations the service builds

    Returns:
        JSON with the supported approaches and cones
    """
    return utils.success_response('Relaxation service is running', {
        'approaches': ['tensor', 'quadratic'],
        'cones': ['l', 'sdp', 'dnn'],
    })


@relax_bp.route('', methods=['POST'])
def relax_problem():
    """
    Build and solve one relaxation of a problem

    Expected request body:
    {
        "problem": {"n": 2, "sense": "min", "domain": "orthant", "objective": [...], "constraints": [...]},
        "approach": "tensor" | "quadratic",
        "cone": "l" | "sdp" | "dnn",
        "relaxedLinking": false,
        "signRows": false
    }

    Returns:
        If successful: JSON with success=1, bound, status and program shape
        If failed: JSON with success=0 and error message (400 bad input, 422 builder error, 500 solver failure)
    """
    data, error = utils.get_request_data()
    if error:
        return error

    try:
        pop = problem_from_dict(data.get('problem'))
        approach, cone = utils.parse_relaxation_options(data)
    except (ProblemFormatError, ValueError) as e:
        return utils.error_response(str(e), 400)

    try:
        program, report = solve_relaxation(
            pop, approach, cone, current_app.config.get('SOLVER_CONFIG') or load_solver_config(),
            relaxed_linking=bool(data.get('relaxedLinking', False)),
            add_sign_rows=bool(data.get('signRows', False)),
        )
    except RelaxationError as e:
        return utils.error_response(str(e), 422)
    except Exception as e:
        logging.error(f"Unexpected error solving relaxation: {str(e)}")
        return utils.error_response(f'Failed to solve relaxation: {str(e)}', 500)

    if report.status is SolveStatus.numerical_trouble and not report.reduced_accuracy:
        return utils.error_response(f'Solver failed: {report.message}', 500)

    return utils.success_response('Relaxation solved', {
        'problemHash': problem_hash(pop),
        'approach': approach.value,
        'cone': cone.value,
        'status': report.status.value,
        'bound': utils.json_number(report.bound),
        'dualValue': utils.json_number(report.dual_value),
        'iterations': report.iterations,
        'certified': report.certified,
        'reducedAccuracy': report.reduced_accuracy,
        'shape': program.shape(),
        'message': report.message or 'Relaxation solved',
    })
