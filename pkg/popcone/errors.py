"""
Exception types raised by popcone

Every error is a ValueError so callers that only care about "bad input"
can catch one type; the CLI and HTTP layers map the subclasses to exit
codes and status codes.
"""


class PolynomialError(ValueError):
    """Dimension mismatch or an operation undefined for the given polynomial."""


class TensorError(ValueError):
    """Shape, order or slice-index mismatch on symmetric tensors."""


class RelaxationError(ValueError):
    """A relaxation cannot be built for the requested problem/cone combination."""


class ProblemFormatError(ValueError):
    """Problem JSON could not be parsed or failed validation."""


class OracleError(ValueError):
    """An oracle report was compared against a different problem."""
