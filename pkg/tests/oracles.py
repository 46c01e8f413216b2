"""Reference values computed independently of klab's quadrature code."""
import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre, wofz


def gaussian_moment_fourier(p, alpha, tau):
    """int_0^inf rho^p exp(-alpha rho^2 + i tau rho) d rho for integer p >= 0.

    I_0 = sqrt(pi)/(2 sqrt(alpha)) w(tau / (2 sqrt(alpha))) with the Faddeeva
    function w, then (2 alpha) I_{p+1} = p I_{p-1} + i tau I_p + [p == 0].
    """
    tau = np.asarray(tau, dtype=float)
    ra = np.sqrt(alpha)
    I_prev = np.zeros(tau.shape, dtype=complex)
    I = np.sqrt(np.pi) / (2 * ra) * wofz(tau / (2 * ra))
    for k in range(p):
        nxt = (k * I_prev + 1j * tau * I + (1.0 if k == 0 else 0.0)) / (2 * alpha)
        I_prev, I = I, nxt
    return I


def dense_oscillatory(h, tau, a, b, pts=24):
    """int_a^b exp(i tau rho) h(rho) d rho by Gauss-Legendre panels of width <= 1/(1+|tau|)."""
    n_pan = int(np.ceil((b - a) * (1 + abs(tau)) / 0.5))
    x, w = roots_legendre(pts)
    edges = np.linspace(a, b, n_pan + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ww = (half[:, None] * w[None, :]).ravel()
    return np.sum(ww * np.exp(1j * tau * r) * h(r))


def oversampled_taus(tau_max=200.0, n_tau=4001, factor=10):
    return np.linspace(-tau_max, tau_max, factor * (n_tau - 1) + 1)


def tau_norm_isotropic(terms, sphere_area, tau_max=200.0, n_tau=4001, modulus_inside=True):
    """Sum over (coef, p, alpha) of the tau-trapezoid of |coef * I_p(tau)| * area.

    ``terms`` lists the (j, k) pairings already reduced to ``coef rho^p
    exp(-alpha rho^2)``; for isotropic data the sphere integral is a factor.
    """
    taus = oversampled_taus(tau_max, n_tau)
    total = 0.0
    for coef, p, alpha in terms:
        prof = np.abs(coef * gaussian_moment_fourier(p, alpha, taus)) * sphere_area
        total += np.trapezoid(prof, taus)
    return total


def gaussian_m_norm(weights, width, dim, rho_max):
    """M-form of w_j exp(-width^2 rho^2 / 2) from the analytic radial derivatives."""
    a = width**2
    f0 = lambda r: np.exp(-0.5 * a * r * r)
    f1 = lambda r: -a * r * np.exp(-0.5 * a * r * r)
    f2 = lambda r: (a * a * r * r - a) * np.exp(-0.5 * a * r * r)
    wgt = lambda r: 1.0 + r ** max(dim, 2)
    base = sum(quad(lambda r, f=f: f(r) ** 2 * wgt(r), 0, rho_max, limit=200, epsabs=1e-15)[0]
               for f in (f0, f1, f2))
    return base * float(np.sum(np.abs(np.asarray(weights)) ** 2))


def sphere_area(n):
    return {1: 2.0, 2: 2 * np.pi, 3: 4 * np.pi}[n]

