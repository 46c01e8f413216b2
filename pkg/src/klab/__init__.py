"""Numerical laboratory for Kirchhoff-type nonlocal hyperbolic systems.

``KLAB_THREADS`` caps the worker count of the numerical backends; it is
applied before numpy is first imported.
"""
import os as _os

_threads = _os.environ.get("KLAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DiagonalizationError,
    GapError,
    HyperbolicityError,
    KirchhoffError,
    ParameterRangeError,
    PicardTruncationError,
    SignalTooSmallError,
)
from .families import FAMILIES, build_problem  # noqa: E402
from .grid import FrequencyGrid, build_grid  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .solver import direct_solve, fixed_point_solve, theta_apply  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FAMILIES", "FrequencyGrid", "build_grid", "build_problem",
    "direct_solve", "fixed_point_solve", "theta_apply",
    "ConfigError", "ConvergenceError", "DiagonalizationError", "GapError",
    "HyperbolicityError", "KirchhoffError", "ParameterRangeError",
    "PicardTruncationError", "SignalTooSmallError",
]
