"""Frequency-space discretization and quadrature.

Spectral samples live on a product grid ``(omega_q, rho_i)``: unit vectors on
the sphere times radial frequencies.  Every array of samples carries the
sphere index first and the radial index second, i.e. shape ``(..., Q, R)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import TruncationWarning

PANEL_ORDER = 8
SWITCH_BAND = 0.5  # |tau| * panel width above which the Filon path is used


@lru_cache(maxsize=None)
def _gauss_legendre(npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _lagrange_matrix(nodes, points):
    """Values ell_i(points[r]) of the Lagrange basis on ``nodes``."""
    diff = points[:, None] - nodes[None, :]
    out = np.ones((points.size, nodes.size))
    for i in range(nodes.size):
        for j in range(nodes.size):
            if i != j:
                out[:, i] *= diff[:, j] / (nodes[i] - nodes[j])
    return out


def sphere_area(n):
    return {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[n]


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    dim: int
    rho_nodes: np.ndarray
    rho_weights: np.ndarray
    sphere_nodes: np.ndarray
    sphere_weights: np.ndarray
    rho_max: float
    n_panels: int
    sphere_res: object
    _volume_weights: np.ndarray = field(repr=False)

    @property
    def n_rho(self):
        return self.rho_nodes.size

    @property
    def n_omega(self):
        return self.sphere_weights.size

    @property
    def shape(self):
        return (self.n_omega, self.n_rho)

    @property
    def panel_width(self):
        return self.rho_max / self.n_panels

    @property
    def volume_weights(self):
        """``v_q * w_i * rho_i**(n-1)``, shape ``(Q, R)``."""
        return self._volume_weights

    def xi(self):
        """Cartesian frequencies, shape ``(Q, R, n)``."""
        return self.rho_nodes[None, :, None] * self.sphere_nodes[:, None, :]

    def refined(self, factor=2):
        """Same geometry with ``factor`` times as many radial nodes."""
        return build_grid(self.dim, self.rho_max, self.n_rho * factor, self.sphere_res)

    def signature(self):
        return (self.dim, float(self.rho_max), self.n_rho, self.n_omega)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def build_grid(n, rho_max, n_rho, sphere_res=None):
    """Composite Gauss-Legendre radial rule times a sphere rule.

    ``n_rho`` must be a multiple of the 8-point panel order.  ``sphere_res``
    is ignored for ``n=1``, an integer angle count for ``n=2`` and a pair
    ``(n_polar, n_azimuth)`` for ``n=3``.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"unsupported dimension n={n}; expected 1, 2 or 3")
    if not rho_max > 0:
        raise ValueError("rho_max must be positive")
    if n_rho < PANEL_ORDER or n_rho % PANEL_ORDER:
        raise ValueError(f"n_rho must be a positive multiple of {PANEL_ORDER}, got {n_rho}")

    n_panels = n_rho // PANEL_ORDER
    x, w = _gauss_legendre(PANEL_ORDER)
    width = rho_max / n_panels
    left = width * np.arange(n_panels)
    rho = (left[:, None] + 0.5 * width * (x[None, :] + 1.0)).ravel()
    rho_w = np.tile(0.5 * width * w, n_panels)

    if n == 1:
        omega = np.array([[-1.0], [1.0]])
        omega_w = np.array([1.0, 1.0])
        res = None
    elif n == 2:
        n_ang = 64 if sphere_res is None else int(sphere_res)
        if n_ang < 1:
            raise ValueError("sphere_res must be positive")
        ang = 2.0 * np.pi * np.arange(n_ang) / n_ang
        omega = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        omega_w = np.full(n_ang, 2.0 * np.pi / n_ang)
        res = n_ang
    else:
        n_pol, n_az = (16, 32) if sphere_res is None else tuple(int(v) for v in sphere_res)
        if n_pol < 1 or n_az < 1:
            raise ValueError("sphere_res must be positive")
        ct, wt = np.polynomial.legendre.leggauss(n_pol)
        st = np.sqrt(1.0 - ct**2)
        az = 2.0 * np.pi * np.arange(n_az) / n_az
        omega = np.stack(
            [
                (st[:, None] * np.cos(az)[None, :]).ravel(),
                (st[:, None] * np.sin(az)[None, :]).ravel(),
                np.repeat(ct, n_az),
            ],
            axis=1,
        )
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
        omega_w = np.repeat(wt, n_az) * (2.0 * np.pi / n_az)
        res = (n_pol, n_az)

    vol = omega_w[:, None] * (rho_w * rho ** (n - 1))[None, :]
    _freeze(rho, rho_w, omega, omega_w, vol)
    return FrequencyGrid(n, rho, rho_w, omega, omega_w, float(rho_max), n_panels, res, vol)


def _check_trailing(grid, samples, ndim_tail):
    if samples.shape[samples.ndim - ndim_tail:] != grid.shape[2 - ndim_tail:]:
        raise ValueError(
            f"samples of shape {samples.shape} do not match grid shape {grid.shape}"
        )


def integrate_spectral(grid, g):
    """Integral over R^n of samples ``g`` of shape ``(..., Q, R)``."""
    g = np.asarray(g)
    _check_trailing(grid, g, 2)
    return (g * grid.volume_weights).sum(axis=(-2, -1))


def integrate_radial(grid, h):
    """Plain radial quadrature of ``h`` (shape ``(..., R)``) over (0, rho_max]."""
    h = np.asarray(h)
    _check_trailing(grid, h, 1)
    return (h * grid.rho_weights).sum(axis=-1)


def tail_ratio(grid, h):
    """max|h| over the last panel relative to max|h| (0 for h == 0)."""
    a = np.abs(np.asarray(h))
    peak = a.max() if a.size else 0.0
    if peak == 0.0:
        return 0.0
    return float(a[..., -PANEL_ORDER:].max() / peak)


@lru_cache(maxsize=64)
def _filon_tables(n_fine):
    x, _ = _gauss_legendre(PANEL_ORDER)
    xf, wf = _gauss_legendre(n_fine)
    lag = _lagrange_matrix(np.asarray(x), np.asarray(xf))
    lag.setflags(write=False)
    return xf, wf, lag


def _panel_moments(omega, filon):
    """m_i(omega) = int_{-1}^{1} exp(i omega x) ell_i(x) dx per reference node.

    The plain path replaces the exact moment with the 8-point rule applied to
    ``ell_i * exp(i omega x)``.
    """
    x, w = _gauss_legendre(PANEL_ORDER)
    mu = w[None, :] * np.exp(1j * omega[:, None] * x[None, :])
    if np.any(filon):
        om = omega[filon]
        n_fine = int(np.ceil(np.abs(om).max())) + 24
        xf, wf, lag = _filon_tables(n_fine)
        mu[filon] = (wf[None, :] * np.exp(1j * om[:, None] * xf[None, :])) @ lag
    return mu


def integrate_radial_oscillatory(grid, h, tau, method="auto", warn=True):
    """Quadrature of int_0^rho_max exp(i tau rho) h(rho) d rho.

    ``h`` has shape ``(..., R)``; ``tau`` is a scalar or 1-D array.  The result
    has shape ``tau.shape + h.shape[:-1]``.  With ``method="auto"`` each tau
    uses plain Gauss-Legendre when ``|tau| * panel_width <= 0.5`` and otherwise
    integrates the panel-wise degree-7 interpolant of ``h`` against the
    exponential exactly (``"plain"`` / ``"filon"`` force one path).
    """
    h = np.asarray(h)
    _check_trailing(grid, h, 1)
    if warn and tail_ratio(grid, h) > 1e-12:
        warnings.warn(
            f"radial samples have not decayed below 1e-12 of peak by rho_max={grid.rho_max}",
            TruncationWarning,
            stacklevel=2,
        )
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    width = grid.panel_width
    omega = 0.5 * width * tau
    if method == "auto":
        filon = np.abs(tau) * width > SWITCH_BAND
    elif method == "plain":
        filon = np.zeros(tau.shape, dtype=bool)
    elif method == "filon":
        filon = np.ones(tau.shape, dtype=bool)
    else:
        raise ValueError(f"unknown method {method!r}")

    mu = _panel_moments(omega, filon)
    centers = width * (np.arange(grid.n_panels) + 0.5)
    phase = np.exp(1j * tau[:, None] * centers[None, :])
    lead = h.shape[:-1]
    hp = h.reshape(-1, grid.n_panels, PANEL_ORDER)
    inner = np.einsum("bpi,ti->tbp", hp, mu)
    out = 0.5 * width * np.einsum("tbp,tp->tb", inner, phase)
    out = out.reshape(tau.shape + lead)
    return out[0] if scalar else out
