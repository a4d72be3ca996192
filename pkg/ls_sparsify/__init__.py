# ls_sparsify/__init__.py
"""
Sparsifying preconditioner for the discretized Lippmann-Schwinger equation
(I + Kq) u = g: quadrature weights and FFT application of K, local
annihilating stencils, a nested-dissection multifrontal factorization of the
resulting sparse system, and preconditioned GMRES.
"""
import logging
import os

__version__ = "1.0.0"

LOG_FORMAT = "[%(levelname)s] %(name)s: %(message)s"
LOG_ENV = "LS_SPARSIFY_LOG_LEVEL"


def configure_logging(level=None):
    """
    Configure the package logger once for an entry point.

    Args:
        level: name or number; defaults to $LS_SPARSIFY_LOG_LEVEL, then WARNING
    """
    level = level or os.environ.get(LOG_ENV, "WARNING")
    if isinstance(level, str):
        name = level.upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            raise ValueError(f"Error: unknown log level '{name}'")

    logger = logging.getLogger("ls_sparsify")
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(level)
    return logger
