import os
import dotenv
import logging

from .models.reports import SolverConfig

dotenv.load_dotenv()

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
DEFAULT_ORACLE_BUDGET = 100_000


def configure_logging(level: str = None):
    """
    Configure root logging once for the CLI and the HTTP app

    Args:
        level: Level name; POPCONE_LOG_LEVEL (default WARNING) when omitted
    """
    name = (level or os.getenv('POPCONE_LOG_LEVEL', 'WARNING')).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        logging.warning(f"Unknown log level {name}, using WARNING")
        numeric = logging.WARNING
    logging.basicConfig(level=numeric, format=LOG_FORMAT)
    logging.getLogger().setLevel(numeric)


def _env_number(name: str, kind, default):
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return kind(raw)
    except ValueError:
        logging.warning(f"Ignoring {name}={raw!r}: not a valid {kind.__name__}")
        return default


def load_solver_config(**overrides) -> SolverConfig:
    """
    SolverConfig from POPCONE_TOL_FEAS, POPCONE_TOL_GAP, POPCONE_MAX_ITER and POPCONE_UNBOUNDED_THRESHOLD

    Args:
        overrides: Explicit values (None entries are ignored) that win over the environment

    Returns:
        SolverConfig
    """
    defaults = SolverConfig()
    values = {
        'tol_feas': _env_number('POPCONE_TOL_FEAS', float, defaults.tol_feas),
        'tol_gap': _env_number('POPCONE_TOL_GAP', float, defaults.tol_gap),
        'max_iter': _env_number('POPCONE_MAX_ITER', int, defaults.max_iter),
        'unbounded_threshold': _env_number('POPCONE_UNBOUNDED_THRESHOLD', float, defaults.unbounded_threshold),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**values)


def thread_count() -> int:
    """Pool size from POPCONE_THREADS, at least 1."""
    return max(1, _env_number('POPCONE_THREADS', int, 1))


def oracle_budget() -> int:
    return max(1, _env_number('POPCONE_ORACLE_BUDGET', int, DEFAULT_ORACLE_BUDGET))
