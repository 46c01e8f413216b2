"""Initial data given by closed-form spectral profiles.

Components are expressed in the gauge of the first-order system, so for the
scalar Kirchhoff family component 0 is ``|xi| u_0^`` and component 1 is
``D_t u^`` at t = 0.  The Fourier transform is the unitary one, under which
``exp(-|x|^2/2)`` and ``exp(-|xi|^2/2)`` are each other's transforms.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class DataFamily:
    name: str
    m: int
    profile: Callable  # (rho, omega) -> (..., m), amplitude 1
    physical: Optional[Callable] = None  # x (..., n) -> (..., m), amplitude 1
    amplitude: float = 1.0
    params: dict = None

    def fhat(self, rho, omega):
        rho = np.asarray(rho, dtype=float)
        omega = np.asarray(omega, dtype=float)
        return self.amplitude * np.asarray(self.profile(rho, omega), dtype=complex)

    def on_grid(self, grid):
        """Samples of shape ``(Q, R, m)``."""
        return self.fhat(grid.rho_nodes[None, :], grid.sphere_nodes[:, None, :])

    def physical_values(self, x):
        if self.physical is None:
            raise ValueError("physical form unavailable")
        return self.amplitude * np.asarray(self.physical(np.asarray(x, dtype=float)), dtype=complex)

    def scaled(self, lam):
        return replace(self, amplitude=self.amplitude * lam)

    def with_amplitude(self, amp):
        return replace(self, amplitude=float(amp))

    def normalized_l2(self, grid, target_sq, components=None):
        """Rescale so the squared L^2 norm of ``components`` equals ``target_sq``."""
        from .grid import integrate_spectral

        vals = self.with_amplitude(1.0).on_grid(grid)
        if components is not None:
            vals = vals[..., list(components)]
        base = float(integrate_spectral(grid, (np.abs(vals) ** 2).sum(axis=-1)))
        if base == 0.0:
            raise ValueError("cannot normalize identically zero data")
        return self.with_amplitude(np.sqrt(target_sq / base))

    @property
    def is_zero(self):
        return self.amplitude == 0.0


def _weights(m, weights):
    w = np.zeros(m, dtype=complex)
    if weights is None:
        w[0] = 1.0
    else:
        w[:] = np.asarray(weights, dtype=complex)
    return w


def gaussian(m, weights=None, width=1.0, amplitude=1.0):
    """f^_j = w_j exp(-width^2 rho^2 / 2), isotropic; physical form available."""
    w = _weights(m, weights)
    sig = float(width)

    def profile(rho, omega):
        g = np.exp(-0.5 * (sig * rho) ** 2)
        g = np.broadcast_to(g, np.broadcast_shapes(rho.shape, omega.shape[:-1]))
        return g[..., None] * w

    def physical(x):
        n = x.shape[-1]
        r2 = (x**2).sum(axis=-1)
        return (sig ** (-n) * np.exp(-0.5 * r2 / sig**2))[..., None] * w

    return DataFamily("gaussian", m, profile, physical, amplitude,
                      dict(weights=w.tolist(), width=sig))


def gaussian_rho(m, power=1, weights=None, width=1.0, amplitude=1.0):
    """f^_j = w_j rho^p exp(-width^2 rho^2 / 2)."""
    w = _weights(m, weights)
    sig = float(width)

    def profile(rho, omega):
        g = rho**power * np.exp(-0.5 * (sig * rho) ** 2)
        g = np.broadcast_to(g, np.broadcast_shapes(rho.shape, omega.shape[:-1]))
        return g[..., None] * w

    return DataFamily("gaussian_rho", m, profile, None, amplitude,
                      dict(weights=w.tolist(), width=sig, power=power))


def shell(m, r_inner=0.0, r_outer=1.0, weights=None, amplitude=1.0):
    """Indicator of r_inner <= rho <= r_outer (a jump in rho)."""
    w = _weights(m, weights)

    def profile(rho, omega):
        g = ((rho >= r_inner) & (rho <= r_outer)).astype(float)
        g = np.broadcast_to(g, np.broadcast_shapes(rho.shape, omega.shape[:-1]))
        return g[..., None] * w

    return DataFamily("shell", m, profile, None, amplitude,
                      dict(weights=w.tolist(), r_inner=r_inner, r_outer=r_outer))


def bump(m, center=1.5, radius=1.0, weights=None, amplitude=1.0):
    """Smooth compactly supported radial profile exp(1 - 1/(1 - r^2)), r = (rho - c)/R."""
    w = _weights(m, weights)

    def profile(rho, omega):
        r = (rho - center) / radius
        inside = np.abs(r) < 1.0
        g = np.zeros(np.shape(r))
        g[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        g = np.broadcast_to(g, np.broadcast_shapes(np.shape(rho), omega.shape[:-1]))
        return g[..., None] * w

    return DataFamily("bump", m, profile, None, amplitude,
                      dict(weights=w.tolist(), center=center, radius=radius))


def zero(m):
    return gaussian(m, amplitude=0.0)


DATA_FAMILIES = {
    "gaussian": gaussian,
    "gaussian_rho": gaussian_rho,
    "shell": shell,
    "bump": bump,
}


def make_data(name, m, **params):
    try:
        factory = DATA_FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown data family {name!r}; known: {sorted(DATA_FAMILIES)}") from None
    return factory(m, **params)
