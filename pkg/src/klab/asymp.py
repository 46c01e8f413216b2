"""Asymptotic integration of the frozen-coefficient system.

For a prescribed coefficient path s(t) each Fourier mode obeys
``d/dt v = i rho A(s(t), omega) v``.  With ``w = N v`` and the oscillating
factor ``Phi = diag(exp(i rho theta_p))`` split off, ``v = N^-1 Phi a`` and

    d/dt a = Ct a,   Ct_lk = X_lk exp(i rho (theta_k - theta_l)),
    X = (d/dt N) N^-1 = (dN/ds) s' N^-1.

All stored matrices are in d/dt form.  In the D_t = -i d/dt convention the
amplitude equation reads ``D_t a = C a`` with ``C = -i Ct``;
:func:`coupling_matrix` returns either form.

Time data live on a uniform grid t_k (k = 0..K) and are refined to the
half-step grid (2K+1 samples) by cubic Hermite interpolation, which feeds
the RK4 midpoint stages of every integrator.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .diag import DET_FLOOR, diagonalizer_path
from .errors import PicardTruncationError, TruncationWarning

PICARD_TERMS = 8
PICARD_TOL = 1e-7


def hermite_midpoints(values, derivs, dt):
    """Cubic Hermite value and derivative at interval midpoints (axis 0)."""
    v0, v1 = values[:-1], values[1:]
    d0, d1 = derivs[:-1], derivs[1:]
    mid = 0.5 * (v0 + v1) + dt * (d0 - d1) / 8.0
    dmid = 1.5 * (v1 - v0) / dt - 0.25 * (d0 + d1)
    return mid, dmid


def interleave(nodes, mids):
    out = np.empty((2 * nodes.shape[0] - 1,) + nodes.shape[1:], dtype=np.result_type(nodes, mids))
    out[0::2] = nodes
    out[1::2] = mids
    return out


def uniform_step(t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2:
        raise ValueError("time grid needs at least two samples")
    dt = (t_grid[-1] - t_grid[0]) / (t_grid.size - 1)
    if np.max(np.abs(np.diff(t_grid) - dt)) > 1e-9 * max(abs(dt), 1.0):
        raise ValueError("time grid must be uniform")
    return dt


@dataclass(frozen=True)
class CoefficientPath:
    """s and s' on the time grid and on its half-step refinement."""

    t_grid: np.ndarray
    s: np.ndarray
    sprime: np.ndarray
    s_half: np.ndarray
    sprime_half: np.ndarray
    dt: float

    @property
    def t_half(self):
        return self.t_grid[0] + 0.5 * self.dt * np.arange(self.s_half.size)


def coefficient_path(t_grid, s, sprime):
    t_grid = np.asarray(t_grid, dtype=float)
    s = np.asarray(s, dtype=float)
    sprime = np.asarray(sprime, dtype=float)
    if s.shape != t_grid.shape or sprime.shape != t_grid.shape:
        raise ValueError("s and s' must be sampled on the time grid")
    dt = uniform_step(t_grid)
    mid, dmid = hermite_midpoints(s, sprime, dt)
    return CoefficientPath(t_grid, s, sprime, interleave(s, mid), interleave(sprime, dmid), dt)


@dataclass(frozen=True)
class PhaseTable:
    """theta_p(t, 1, omega); the phase at radius rho is rho * theta."""

    t_grid: np.ndarray
    theta: np.ndarray  # (K+1, Q, m)
    theta_half: np.ndarray  # (2K+1, Q, m)
    method: str

    def at_radius(self, rho, half=False):
        th = self.theta_half if half else self.theta
        return np.multiply.outer(th, np.asarray(rho)).swapaxes(-1, -2)  # (..., Q, R, m)

    def differences(self, half=False):
        """theta_p - theta_q with p the row index."""
        th = self.theta_half if half else self.theta
        return th[..., :, None] - th[..., None, :]


def phase_table(roots, t_grid, droots=None, method="corrected"):
    """Integrate the roots ``(K+1, Q, m)`` in time from theta(0) = 0.

    ``method="trapezoid"`` is the plain composite rule.  ``"corrected"`` adds
    the endpoint-derivative term ``dt^2/12 (phi'_k - phi'_{k+1})`` which needs
    ``droots`` = d/dt phi on the same grid and raises the order to four.
    """
    roots = np.asarray(roots, dtype=float)
    dt = uniform_step(t_grid)
    inc = 0.5 * dt * (roots[:-1] + roots[1:])
    if method == "corrected":
        if droots is None:
            raise ValueError("corrected phases need the time derivative of the roots")
        droots = np.asarray(droots, dtype=float)
        inc = inc + dt**2 / 12.0 * (droots[:-1] - droots[1:])
    elif method != "trapezoid":
        raise ValueError(f"unknown phase quadrature {method!r}")
    theta = np.concatenate([np.zeros_like(roots[:1]), np.cumsum(inc, axis=0)], axis=0)
    mid, _ = hermite_midpoints(theta, roots, dt)
    return PhaseTable(np.asarray(t_grid, dtype=float), theta, interleave(theta, mid), method)


@dataclass(frozen=True)
class AsymptoticTables:
    model: object
    grid: object
    coef: CoefficientPath
    path: object  # DiagonalizerPath on the half-step grid
    phases: PhaseTable
    X_half: np.ndarray  # (2K+1, Q, m, m)

    @property
    def dt(self):
        return self.coef.dt

    @property
    def n_steps(self):
        return self.coef.t_grid.size - 1

    def N(self, k):
        return self.path.N[2 * k]

    def N_inv(self, k):
        return self.path.N_inv[2 * k]

    @property
    def tv_N(self):
        """Discrete total variation of N per sphere node (integer time nodes)."""
        N = self.path.N[0::2]
        if N.shape[0] < 2:
            return np.zeros(N.shape[1])
        return np.abs(np.diff(N, axis=0)).max(axis=(-2, -1)).sum(axis=0)


def build_tables(model, grid, t_grid, s, sprime, phase_method="corrected", det_floor=DET_FLOOR):
    """Diagonalizers, phases and coupling along a prescribed coefficient path."""
    coef = coefficient_path(t_grid, s, sprime)
    path = diagonalizer_path(model, coef.s_half, grid.sphere_nodes, det_floor=det_floor)
    X = (path.ds_N * coef.sprime_half[:, None, None, None]) @ path.N_inv
    roots = path.roots[0::2]
    droots = path.ds_roots[0::2] * coef.sprime[:, None, None]
    phases = phase_table(roots, coef.t_grid, droots, method=phase_method)
    return AsymptoticTables(model, grid, coef, path, phases, X)


def coupling_matrix(tables, k, rho, q, form="Dt", half=False):
    """Amplitude coupling at time index ``k`` for the node (rho, omega_q).

    ``form="Dt"`` gives C with D_t a = C a; ``form="dt"`` gives Ct = i C.
    ``half=True`` indexes the half-step grid.
    """
    h = k if half else 2 * k
    th = tables.phases.theta_half[h, q]
    e = np.exp(1j * rho * th)
    Ct = tables.X_half[h, q] * e[None, :] * np.conj(e)[:, None]
    if form == "dt":
        return Ct
    if form == "Dt":
        return -1j * Ct
    raise ValueError(f"unknown form {form!r}")


def coupling_norms(tables):
    """||C(t)||_2 on the half-step grid, shape (2K+1, Q); independent of rho."""
    return np.linalg.norm(tables.X_half, 2, axis=(-2, -1))


def coupling_integral(tables):
    """int ||C|| dt per sphere node by the trapezoid rule on the half-step grid."""
    c = coupling_norms(tables)
    h = 0.5 * tables.dt
    return np.abs(h) * (c.sum(axis=0) - 0.5 * (c[0] + c[-1]))


@dataclass(frozen=True)
class AmplitudeSet:
    a: np.ndarray  # (K+1, Q, R, m, c)
    method: str
    picard_terms: int = 0
    term_norms: np.ndarray = None  # sup over t and nodes of the j-th Picard term
    fallback_used: bool = False

    @property
    def initial(self):
        return self.a[0]


def initial_amplitudes(tables, n_rho=None):
    """Columns a^j(0) = N(0) e_j broadcast over the radial nodes."""
    N0 = tables.N(0)
    R = tables.grid.n_rho if n_rho is None else n_rho
    return np.broadcast_to(N0[:, None], (N0.shape[0], R) + N0.shape[1:]).copy()


def _picard(tables, Y0, terms):
    """Partial Dyson sum; nested integrals by the trapezoid rule on the half grid."""
    rho = tables.grid.rho_nodes
    th = tables.phases.theta_half  # (H, Q, m)
    e = np.exp(1j * th[:, :, None, :] * rho[None, None, :, None])  # (H, Q, R, m)
    Ct = tables.X_half[:, :, None] * e[..., None, :] * np.conj(e)[..., :, None]
    h = 0.5 * tables.dt
    term = np.broadcast_to(Y0, (th.shape[0],) + Y0.shape).astype(complex)
    total = term.copy()
    norms = [float(np.linalg.norm(Y0, 2, axis=(-2, -1)).max())]
    for _ in range(terms):
        f = Ct @ term
        inc = 0.5 * h * (f[1:] + f[:-1])
        term = np.concatenate([np.zeros_like(f[:1]), np.cumsum(inc, axis=0)], axis=0)
        total = total + term
        norms.append(float(np.linalg.norm(term, 2, axis=(-2, -1)).max()))
    return total[0::2], np.array(norms)


def integrate_amplitudes(tables, Y0=None, method="rk4", picard_terms=PICARD_TERMS,
                         tol=PICARD_TOL, on_truncation="fallback", backend=None):
    """Solve d/dt a = Ct a from ``Y0`` (default: the columns of N(0)).

    ``Y0`` has shape ``(Q, R, m, c)``.  With ``method="picard"`` the series is
    summed to ``picard_terms`` terms; if the last term still exceeds ``tol``
    (relative to |Y0|) the run either raises ``PicardTruncationError``
    (``on_truncation="raise"``) or is redone with RK4 and flagged, with a
    ``TruncationWarning``.
    """
    if Y0 is None:
        Y0 = initial_amplitudes(tables)
    Y0 = np.asarray(Y0, dtype=complex)
    if method == "rk4":
        a = kernels.rk4_amplitudes(tables.X_half, tables.phases.theta_half,
                                   tables.grid.rho_nodes, Y0, tables.dt, backend=backend)
        return AmplitudeSet(a, "rk4")
    if method != "picard":
        raise ValueError(f"unknown amplitude method {method!r}")
    a, norms = _picard(tables, Y0, picard_terms)
    scale = max(norms[0], 1e-300)
    if norms[-1] > tol * scale:
        msg = (f"Picard truncation failure: term {picard_terms} has norm "
               f"{norms[-1] / scale:.3e} > tol={tol:g}")
        if on_truncation == "raise":
            raise PicardTruncationError(msg)
        warnings.warn(msg + "; falling back to RK4", TruncationWarning, stacklevel=2)
        rk = integrate_amplitudes(tables, Y0, "rk4", backend=backend)
        return AmplitudeSet(rk.a, "rk4", picard_terms, norms, fallback_used=True)
    return AmplitudeSet(a, "picard", picard_terms, norms)


def picard_term_report(tables, terms=PICARD_TERMS):
    """Operator norms of the Dyson terms against (int ||C||)^j / j!, per node.

    Returns ``(norms, bounds)`` of shape ``(terms+1, Q, R)``; the terms are the
    sup over t of ||T_j(t)||_2 with T_0 = I.
    """
    m = tables.X_half.shape[-1]
    Q, R = tables.grid.shape
    rho = tables.grid.rho_nodes
    th = tables.phases.theta_half
    e = np.exp(1j * th[:, :, None, :] * rho[None, None, :, None])
    Ct = tables.X_half[:, :, None] * e[..., None, :] * np.conj(e)[..., :, None]
    h = 0.5 * tables.dt
    term = np.broadcast_to(np.eye(m, dtype=complex), Ct.shape).copy()
    cint = coupling_integral(tables)  # (Q,)
    norms = [np.ones((Q, R))]
    bounds = [np.ones((Q, R))]
    fact = 1.0
    for j in range(1, terms + 1):
        f = Ct @ term
        inc = 0.5 * h * (f[1:] + f[:-1])
        term = np.concatenate([np.zeros_like(f[:1]), np.cumsum(inc, axis=0)], axis=0)
        norms.append(np.linalg.norm(term, 2, axis=(-2, -1)).max(axis=0))
        fact *= j
        bounds.append(np.broadcast_to((cint**j / fact)[:, None], (Q, R)))
    return np.array(norms), np.array(bounds)


def evaluate_representation(tables, amplitudes, data=None, k=None):
    """U^(t) = N^-1 Phi a f^ on the grid.

    ``amplitudes`` is an AmplitudeSet or an array ``(K+1, Q, R, m, c)``.  With
    matrix amplitudes (c = m) pass the spectral data ``(Q, R, m)``; vector
    amplitudes (c = 1) already contain the data.  Returns ``(K+1, Q, R, m)``
    or the slice at time index ``k``.
    """
    a = getattr(amplitudes, "a", amplitudes)
    if data is not None:
        data = np.asarray(data, dtype=complex)
        if data.shape[:2] != tables.grid.shape:
            raise ValueError(f"data of shape {data.shape} do not match grid {tables.grid.shape}")
        alpha = (a @ data[..., None])[..., 0]
    else:
        if a.shape[-1] != 1:
            raise ValueError("matrix amplitudes need the spectral data")
        alpha = a[..., 0]
    if k is not None:
        alpha = alpha[k]
        th = tables.phases.theta[k]
        Ninv = tables.path.N_inv[2 * k]
    else:
        th = tables.phases.theta
        Ninv = tables.path.N_inv[0::2]
    rho = tables.grid.rho_nodes
    beta = np.exp(1j * th[..., None, :] * rho[:, None]) * alpha
    return (Ninv[..., None, :, :] @ beta[..., None])[..., 0]


def amplitude_bound(tables, amplitudes):
    """Smallest c with sup_t |a^j(t)| <= exp(c TV_N) |a^j(0)| at every node.

    ``c_theory = m * sup ||N^-1||_2`` follows from |d/dt a| <= ||dN/dt|| ||N^-1|| |a|
    and ||.||_2 <= m ||.||_max; the measured c never exceeds it.
    """
    a = getattr(amplitudes, "a", amplitudes)
    mag = np.linalg.norm(a, axis=-2)  # (K+1, Q, R, c)
    ratio = mag.max(axis=0) / np.maximum(mag[0], 1e-300)
    tv = tables.tv_N  # (Q,)
    m = a.shape[-2]
    c_theory = m * float(np.linalg.norm(tables.path.N_inv, 2, axis=(-2, -1)).max())
    logr = np.log(np.maximum(ratio, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(tv[:, None, None] > 0, logr / tv[:, None, None], np.where(logr > 1e-14, np.inf, 0.0))
    c = float(need.max()) if need.size else 0.0
    return dict(c=c, c_theory=c_theory, max_ratio=float(ratio.max()), tv_N=float(tv.max()))


def energy_constant(tables, c):
    """C = sup||N^-1||_2 exp(c TV_N) sup||N||_F bounding ||U(t)|| / ||U(0)||."""
    Ninv = float(np.linalg.norm(tables.path.N_inv, 2, axis=(-2, -1)).max())
    Nf = float(np.linalg.norm(tables.path.N, "fro", axis=(-2, -1)).max())
    return Ninv * np.exp(c * float(tables.tv_N.max())) * Nf


def mode_solve(model, grid, coef, V0, backend=None):
    """Per-mode RK4 of d/dt v = i rho A(s(t), omega) v along a coefficient path.

    ``coef`` is a CoefficientPath; ``V0`` is ``(Q, R, m)``.  Returns
    ``(K+1, Q, R, m)``.
    """
    A = model(coef.s_half[:, None], grid.sphere_nodes[None])
    out = kernels.rk4_modes(A, grid.rho_nodes, np.asarray(V0, dtype=complex)[..., None],
                            coef.dt, backend=backend)
    return out[..., 0]
