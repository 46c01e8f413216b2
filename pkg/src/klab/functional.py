"""The nonlocal functional s = int |xi|^-k <S U^, U^> d xi and related reductions.

All reductions sum over the (omega, rho) axes of fixed-shape arrays with
``np.sum``, so results are bit-reproducible for a given grid.
"""
import numpy as np


def l2_sq(grid, U):
    """||U||^2 for spectral samples ``U`` of shape ``(..., Q, R, m)``."""
    U = np.asarray(U)
    dens = (U.real**2 + U.imag**2).sum(axis=-1)
    return np.sum(dens * grid.volume_weights, axis=(-2, -1))


def component_l2_sq(grid, U):
    """Per-component squared norms, shape ``(..., m)``."""
    U = np.asarray(U)
    dens = U.real**2 + U.imag**2
    return np.sum(dens * grid.volume_weights[..., None], axis=(-3, -2))


def radial_weights(grid, weight):
    k = weight.radial_exponent
    if k == 0:
        return grid.volume_weights
    return grid.volume_weights * grid.rho_nodes[None, :] ** (-k)


def nonlocal_value(grid, weight, U):
    """s = int rho^-k U^H S U; real because S is Hermitian."""
    U = np.asarray(U)
    SU = U @ weight.matrix.T
    dens = np.real(np.sum(np.conj(U) * SU, axis=-1))
    return np.sum(dens * radial_weights(grid, weight), axis=(-2, -1))


def nonlocal_rate(grid, weight, U, A):
    """s' = 2 Re int rho^-k U^H S (i rho A U) for the frozen symbol ``A``.

    ``U`` is ``(..., Q, R, m)`` and ``A`` is ``(..., Q, m, m)``.
    """
    U = np.asarray(U)
    AU = (np.asarray(A)[..., :, None, :, :] @ U[..., None])[..., 0]
    dU = 1j * grid.rho_nodes[:, None] * AU
    SdU = dU @ weight.matrix.T
    dens = 2.0 * np.real(np.sum(np.conj(U) * SdU, axis=-1))
    return np.sum(dens * radial_weights(grid, weight), axis=(-2, -1))
