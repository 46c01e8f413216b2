import os
import subprocess
import sys

import numpy as np
import pytest

from klab import kernels

needs_compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(),
                                    reason="compiled kernels not built")


def random_inputs(seed=0, H=41, Q=2, R=8, m=3, c=2):
    rng = np.random.default_rng(seed)
    X = 0.3 * (rng.standard_normal((H, Q, m, m)) + 1j * rng.standard_normal((H, Q, m, m)))
    theta = np.cumsum(rng.uniform(-1, 1, (H, Q, m)), axis=0) * 0.01
    rho = np.linspace(0.1, 3.0, R)
    Y0 = rng.standard_normal((Q, R, m, c)) + 0j
    return X, theta, rho, Y0, 0.02


@needs_compiled
def test_amplitude_backends_agree():
    args = random_inputs()
    a = kernels.rk4_amplitudes(*args, backend="python")
    b = kernels.rk4_amplitudes(*args, backend="compiled")
    assert a.shape == (21, 2, 8, 3, 2)
    assert np.abs(a - b).max() < 1e-12


@needs_compiled
def test_mode_backends_agree():
    X, _, rho, Y0, dt = random_inputs(1)
    a = kernels.rk4_modes(X, rho, Y0, dt, backend="python")
    b = kernels.rk4_modes(X, rho, Y0, dt, backend="compiled")
    assert np.abs(a - b).max() < 1e-12


def test_rk4_modes_fourth_order_on_constant_generator():
    from scipy.linalg import expm

    A = np.array([[0, 1], [2, 0]], dtype=complex)
    rho = np.array([1.0])
    V0 = np.array([1.0, 0.5], dtype=complex).reshape(1, 1, 2, 1)
    ref = expm(1j * A) @ V0[0, 0, :, 0]
    errs = []
    for K in (10, 20):
        H = 2 * K + 1
        out = kernels.rk4_modes(np.broadcast_to(A, (H, 1, 2, 2)), rho, V0, 1.0 / K, backend="python")
        errs.append(np.abs(out[-1, 0, 0, :, 0] - ref).max())
    assert np.log2(errs[0] / errs[1]) > 3.8


def test_zero_coupling_keeps_amplitudes():
    X, theta, rho, Y0, dt = random_inputs(2)
    out = kernels.rk4_amplitudes(np.zeros_like(X), theta, rho, Y0, dt)
    assert np.all(out == Y0[None])


def test_shape_validation():
    X, theta, rho, Y0, dt = random_inputs()
    with pytest.raises(ValueError, match="odd length"):
        kernels.rk4_amplitudes(X[:-1], theta[:-1], rho, Y0, dt)
    with pytest.raises(ValueError, match="do not match"):
        kernels.rk4_amplitudes(X, theta, rho[:-1], Y0, dt)
    with pytest.raises(ValueError, match="unknown backend"):
        kernels.get_backend("gpu")


def test_pure_python_switch():
    env = dict(os.environ, KLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import klab; print(klab.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
