"""Pure-numpy implementations of the time-marching kernels.

Both kernels advance a linear system with classical RK4 on a uniform time
grid.  Coefficients are supplied on the half-step grid: index ``2k`` is t_k,
``2k+1`` the midpoint, so a run of K steps needs ``2K+1`` samples.
"""
import numpy as np


def rk4_amplitudes(X, theta, rho, Y0, dt):
    """Integrate d/dt Y = C(t) Y with C_lk = X_lk exp(i rho (theta_k - theta_l)).

    X      (H, Q, m, m) complex   coupling in d/dt form, unit radius
    theta  (H, Q, m)    real      phases at unit radius
    rho    (R,)         real
    Y0     (Q, R, m, c) complex
    returns (K+1, Q, R, m, c)
    """
    H = X.shape[0]
    K = (H - 1) // 2
    out = np.empty((K + 1,) + Y0.shape, dtype=complex)
    Y = np.array(Y0, dtype=complex)
    out[0] = Y
    rho_b = rho[None, :, None]

    def coupling(h):
        e = np.exp(1j * rho_b * theta[h][:, None, :])  # (Q, R, m)
        return X[h][:, None, :, :] * e[:, :, None, :] * np.conj(e)[:, :, :, None]

    C0 = coupling(0)
    half = 0.5 * dt
    for k in range(K):
        Cm = coupling(2 * k + 1)
        Cn = coupling(2 * k + 2)
        k1 = C0 @ Y
        k2 = Cm @ (Y + half * k1)
        k3 = Cm @ (Y + half * k2)
        k4 = Cn @ (Y + dt * k3)
        Y = Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = Y
        C0 = Cn
    return out


def rk4_modes(A, rho, V0, dt):
    """Integrate d/dt V = i rho A(t) V per radial node.

    A   (H, Q, m, m) complex   symbol at unit radius on the half-step grid
    rho (R,)         real
    V0  (Q, R, m, c) complex
    returns (K+1, Q, R, m, c)
    """
    H = A.shape[0]
    K = (H - 1) // 2
    out = np.empty((K + 1,) + V0.shape, dtype=complex)
    V = np.array(V0, dtype=complex)
    out[0] = V
    irho = 1j * rho[None, :, None, None]

    def generator(h):
        return irho * A[h][:, None, :, :]

    M0 = generator(0)
    half = 0.5 * dt
    for k in range(K):
        Mm = generator(2 * k + 1)
        Mn = generator(2 * k + 2)
        k1 = M0 @ V
        k2 = Mm @ (V + half * k1)
        k3 = Mm @ (V + half * k2)
        k4 = Mn @ (V + dt * k3)
        V = V + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = V
        M0 = Mn
    return out
