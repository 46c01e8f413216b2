"""Backend selection for the RK4 kernels.

The compiled extension ``klab._kernels`` is used when it imports; otherwise,
or when ``KLAB_PURE_PYTHON=1`` is set, the numpy versions in
``klab._kernels_py`` are used.  Both take identical arguments.
"""
import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("KLAB_PURE_PYTHON", "0") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def available_backends():
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get_backend(name=None):
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def _prep(X, theta, rho, Y0, dt):
    X = np.ascontiguousarray(X, dtype=np.complex128)
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    Y0 = np.ascontiguousarray(Y0, dtype=np.complex128)
    if theta is not None:
        theta = np.ascontiguousarray(theta, dtype=np.float64)
    H = X.shape[0]
    if H < 1 or H % 2 == 0:
        raise ValueError("coefficients must be given on a half-step grid of odd length")
    if Y0.ndim != 4 or Y0.shape[:3] != (X.shape[1], rho.size, X.shape[2]):
        raise ValueError(f"initial values of shape {Y0.shape} do not match coefficients {X.shape}")
    return X, theta, rho, Y0, float(dt)


def rk4_amplitudes(X, theta, rho, Y0, dt, backend=None):
    X, theta, rho, Y0, dt = _prep(X, theta, rho, Y0, dt)
    if theta.shape != X.shape[:3]:
        raise ValueError("theta must have shape (H, Q, m)")
    return get_backend(backend).rk4_amplitudes(X, theta, rho, Y0, dt)


def rk4_modes(A, rho, V0, dt, backend=None):
    A, _, rho, V0, dt = _prep(A, None, rho, V0, dt)
    return get_backend(backend).rk4_modes(A, rho, V0, dt)
