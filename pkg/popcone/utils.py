"""
Utility functions for the application
"""
import math
from flask import jsonify, request
from typing import Dict, Any, Tuple, Optional, Type

from .models.enums import Approach, ConeKind


def get_request_data() -> Tuple[Dict[str, Any], Optional[Tuple]]:
    """
    Get and validate JSON data from request

    Returns:
        Tuple containing:
        - Dictionary with request data
        - Tuple with error response or None if no error
    """
    data = request.get_json(silent=True)

    if not data or not isinstance(data, dict):
        return {}, error_response('No data provided', 400)

    return data, None


def parse_option(data: Dict[str, Any], key: str, kind: Type, default):
    """
    Read an enum option from request data

    Args:
        data: Request data
        key: Field name
        kind: Enum class (Approach or ConeKind)
        default: Member used when the field is absent

    Returns:
        Enum member

    Raises:
        ValueError: when the value is not a member of kind
    """
    value = data.get(key)
    if value is None:
        return default
    try:
        return kind(str(value).lower())
    except ValueError:
        allowed = ', '.join(m.value for m in kind)
        raise ValueError(f'Invalid {key} {value!r}; expected one of {allowed}')


def parse_relaxation_options(data: Dict[str, Any]) -> Tuple[Approach, ConeKind]:
    return (parse_option(data, 'approach', Approach, Approach.tensor),
            parse_option(data, 'cone', ConeKind, ConeKind.dnn))


def json_number(value: float) -> Any:
    """JSON has no infinities or NaN: map them to strings and None."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    if isinstance(value, float) and math.isinf(value):
        return '+inf' if value > 0 else '-inf'
    return value


def format_bound(value: float, decimals: int = 6) -> str:
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return '-inf' if value < 0 else '+inf'
    return f'{value:.{decimals}f}'


def success_response(message: str, data: Dict[str, Any] = None, status_code: int = 200) -> Tuple:
    """
    Create a success response

    Args:
        message: Success message
        data: Additional data for the response
        status_code: HTTP status code

    Returns:
        Tuple containing JSON response and status code
    """
    response = {
        'success': 1,
        'message': message
    }

    if data:
        response.update(data)

    return jsonify(response), status_code


def error_response(message: str, status_code: int = 400) -> Tuple:
    """
    Create an error response

    Args:
        message: Error message
        status_code: HTTP status code

    Returns:
        Tuple containing JSON response and status code
    """
    return jsonify({
        'success': 0,
        'message': message
    }), status_code
