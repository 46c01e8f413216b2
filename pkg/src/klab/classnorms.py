"""Data-class norms, the smallness gate and the tau-decay diagnostic.

Every norm here is a sesquilinear form in the spectral data, so scaling the
data by lambda scales each value by lambda^2.  Oscillatory inner integrals
over rho go through :func:`klab.grid.integrate_radial_oscillatory`; outer
tau integrals use the trapezoid rule on a symmetric uniform grid.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import DataFamily
from .errors import SignalTooSmallError, SingularWeightWarning
from .functional import l2_sq
from .grid import integrate_radial, integrate_radial_oscillatory, tail_ratio

TAU_MAX = 200.0
N_TAU = 4001
GATE_THRESHOLD = 1e-2
NOISE_FLOOR = 1e-13
FD_FRACTION = 1e-3


def tau_grid(tau_max=TAU_MAX, n_tau=N_TAU):
    if n_tau < 3 or n_tau % 2 == 0:
        raise ValueError("n_tau must be odd and >= 3 so that tau = 0 is a node")
    return np.linspace(-tau_max, tau_max, n_tau)


def _samples(f, grid, component=None):
    """(Q, R, m) samples of a DataFamily or array; ``component`` picks one."""
    if isinstance(f, DataFamily):
        vals = f.on_grid(grid)
    else:
        vals = np.asarray(f, dtype=complex)
        if vals.ndim == 2:
            vals = vals[..., None]
    if vals.shape[:2] != grid.shape:
        raise ValueError(f"samples of shape {vals.shape} do not match grid {grid.shape}")
    if component is not None:
        vals = vals[..., component:component + 1]
    return vals


def _trapezoid(y, x):
    dx = np.diff(x)
    return float(np.sum(0.5 * dx * (y[1:] + y[:-1])))


def _check_weight(grid, h, power):
    """Warn when rho^power is not integrable against h near rho = 0."""
    if power > -1:
        return
    a = np.abs(h[..., :2]).max(axis=tuple(range(h.ndim - 1)))
    if a[0] == 0:
        return
    r0, r1 = grid.rho_nodes[:2]
    order = np.log(max(a[1], 1e-300) / a[0]) / np.log(r1 / r0)
    if order + power <= -1 + 0.25:
        warnings.warn(f"weight rho^{power} is not integrable against data that vanish to order "
                      f"{order:.2f} at the origin; the value is grid-dependent",
                      SingularWeightWarning, stacklevel=3)


def _pair_profile(grid, F, powers, taus, modulus_inside=True):
    """Sum_{j,k} of the tau-profile of the oscillatory pairing of F_j, F_k.

    ``powers[j][k]`` is the radial exponent.  With ``modulus_inside`` the
    modulus is taken per sphere node before the sphere sum (class Y); else
    the sphere sum sits inside the modulus (class K).
    """
    m = F.shape[-1]
    rho = grid.rho_nodes
    prof = np.zeros(taus.shape)
    for j in range(m):
        for k in range(m):
            h = F[..., j] * np.conj(F[..., k])
            if not np.any(h):
                continue
            h = h * rho ** powers[j][k]
            _check_weight(grid, h, powers[j][k])
            inner = integrate_radial_oscillatory(grid, h, taus)  # (T, Q)
            if modulus_inside:
                prof += np.abs(inner) @ grid.sphere_weights
            else:
                prof += np.abs(inner @ grid.sphere_weights)
    return prof


@dataclass(frozen=True)
class NormValue:
    value: float
    tail: float  # estimate of the truncated tau tail, 2 int_{tau_max}^inf ~ 2 tau_max |profile(tau_max)|
    taus: np.ndarray = field(repr=False, default=None)
    profile: np.ndarray = field(repr=False, default=None)


def _tau_norm(grid, F, powers, taus, modulus_inside):
    taus = tau_grid() if taus is None else np.asarray(taus, dtype=float)
    prof = _pair_profile(grid, F, powers, taus, modulus_inside)
    edge = 0.5 * (prof[0] + prof[-1])
    tail = 2.0 * taus[-1] * edge
    return NormValue(_trapezoid(prof, taus), float(tail), taus, prof)


def y_norm(data, grid, taus=None, detail=False):
    """|U0|_Y with weight rho^n for every pairing (j, k)."""
    F = _samples(data, grid)
    n = grid.dim
    m = F.shape[-1]
    res = _tau_norm(grid, F, [[n] * m for _ in range(m)], taus, True)
    return res if detail else res.value


def _pair(f0, f1, grid):
    a = _samples(f0, grid, 0 if isinstance(f0, DataFamily) else None)
    b = _samples(f1, grid, 0 if isinstance(f1, DataFamily) else None)
    return np.concatenate([a[..., :1], b[..., :1]], axis=-1)


def y_tilde_norm(f0, f1, grid, taus=None, detail=False):
    """|(f0, f1)|_Y~ with weight rho^(n-j-k)."""
    F = _pair(f0, f1, grid)
    n = grid.dim
    res = _tau_norm(grid, F, [[n - j - k for k in range(2)] for j in range(2)], taus, True)
    return res if detail else res.value


def k_norm(f0, f1, grid, taus=None, detail=False):
    """|(f0, f1)|_K: sphere integral inside the modulus, |xi|^(3-j-k) d xi."""
    F = _pair(f0, f1, grid)
    n = grid.dim
    res = _tau_norm(grid, F, [[3 - j - k + n - 1 for k in range(2)] for j in range(2)], taus, False)
    return res if detail else res.value


def k_norm_upper(f0, f1, grid, taus=None):
    """The K-form with the modulus moved inside the sphere sum (an upper bound)."""
    F = _pair(f0, f1, grid)
    n = grid.dim
    return _tau_norm(grid, F, [[3 - j - k + n - 1 for k in range(2)] for j in range(2)],
                     taus, True).value


def y_kappa_norm(f0, f1, grid, kappa, taus=None):
    """sum_{j,k} sup_tau <tau>^kappa |int e^{i tau |xi|} f_j conj f_k |xi|^(3-j-k) d xi|."""
    F = _pair(f0, f1, grid)
    taus = tau_grid() if taus is None else np.asarray(taus, dtype=float)
    n = grid.dim
    rho = grid.rho_nodes
    total = 0.0
    for j in range(2):
        for k in range(2):
            h = F[..., j] * np.conj(F[..., k]) * rho ** (3 - j - k + n - 1)
            if not np.any(h):
                continue
            inner = integrate_radial_oscillatory(grid, h, taus) @ grid.sphere_weights
            total += float(np.max((1 + taus**2) ** (kappa / 2) * np.abs(inner)))
    return total


def _ray_values(data, grid, rho):
    """f^(rho omega_q) for real rho of any sign (negative rho walks the opposite ray)."""
    rho = np.asarray(rho, dtype=float)
    om = grid.sphere_nodes[:, None, :] * np.sign(np.where(rho == 0, 1.0, rho))[None, :, None]
    return data.fhat(np.abs(rho)[None, :], om)


def m_norm(data, grid, step=None, derivatives=None):
    """|U0|_M = sum_{k<=2} sum_j sup_omega int |d^k_rho f_j|^2 (1 + rho^max(n,2)) d rho.

    Radial derivatives use 5-point central differences of the closed-form
    profile with step ``FD_FRACTION * panel width`` unless ``derivatives``
    supplies ``(f, df, d2f)`` samples on the grid.
    """
    if derivatives is not None:
        d0, d1, d2 = (np.asarray(d, dtype=complex) for d in derivatives)
    else:
        if not isinstance(data, DataFamily):
            raise TypeError("m_norm needs a DataFamily (or explicit derivatives)")
        # differentiate the unit-amplitude profile so the scale enters exactly
        scale = abs(data.amplitude) ** 2
        unit = data.with_amplitude(1.0)
        h = FD_FRACTION * grid.panel_width if step is None else step
        r = grid.rho_nodes
        f = {o: _ray_values(unit, grid, r + o * h) for o in (-2, -1, 0, 1, 2)}
        d0 = f[0]
        d1 = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * h)
        d2 = (-f[-2] + 16 * f[-1] - 30 * f[0] + 16 * f[1] - f[2]) / (12 * h * h)
    weight = 1.0 + grid.rho_nodes ** max(grid.dim, 2)
    total = 0.0
    for d in (d0, d1, d2):
        per = integrate_radial(grid, np.moveaxis(np.abs(d) ** 2, -1, 0) * weight)  # (m, Q)
        total += float(per.max(axis=-1).sum())
    return total if derivatives is not None else scale * total


def weighted_sobolev_norm(data, sigma, kappa, dim=1, box=12.0, resolution=256):
    """||<x>^kappa f||_{H^sigma} summed over components (root of the sum of squares).

    ``<x>^kappa f`` is sampled on ``[-box, box)^n`` and ``<D>^sigma`` is
    applied through the discrete Fourier transform of the box grid.  Returns
    ``(value, tail)`` where ``tail`` is max|<x>^kappa f| on the box faces
    relative to its maximum.
    """
    if not isinstance(data, DataFamily) or data.physical is None:
        raise ValueError("physical form unavailable")
    if data.is_zero:
        return 0.0, 0.0
    n = int(dim)
    x1 = np.linspace(-box, box, resolution, endpoint=False)
    dx = x1[1] - x1[0]
    mesh = np.stack(np.meshgrid(*([x1] * n), indexing="ij"), axis=-1)
    r2 = (mesh**2).sum(axis=-1)
    g = (1.0 + r2)[..., None] ** (kappa / 2.0) * data.physical_values(mesh)
    peak = float(np.abs(g).max())
    faces = [np.take(g, 0, axis=a) for a in range(n)]
    tail = max(float(np.abs(fc).max()) for fc in faces) / peak if peak > 0 else 0.0
    axes = tuple(range(n))
    if sigma == 0:
        sq = np.sum(np.abs(g) ** 2) * dx**n
    else:
        G = np.fft.fftn(g, axes=axes) * dx**n / (2 * np.pi) ** (n / 2)
        k1 = 2 * np.pi * np.fft.fftfreq(resolution, d=dx)
        kk = np.stack(np.meshgrid(*([k1] * n), indexing="ij"), axis=-1)
        w = (1.0 + (kk**2).sum(axis=-1)) ** sigma
        dk = k1[1] - k1[0]
        sq = np.sum(w[..., None] * np.abs(G) ** 2) * dk**n
    return float(np.sqrt(sq)), tail


@dataclass(frozen=True)
class GateReport:
    passed: bool
    value: float
    threshold: float
    margin: float


def smallness_gate(l2_sq_value, y_value, threshold=GATE_THRESHOLD):
    """Pass iff ||U0||^2 + |U0|_Y < threshold; margin = threshold - value."""
    v = float(l2_sq_value) + float(y_value)
    return GateReport(v < threshold, v, float(threshold), float(threshold) - v)


def gate_for(data, grid, threshold=GATE_THRESHOLD, taus=None):
    F = _samples(data, grid)
    return smallness_gate(l2_sq(grid, F), y_norm(F, grid, taus), threshold)


def scalar_pair(problem, V, grid):
    """(f0, f1) = (u(0)^, d_t u(0)^) recovered from first-order samples ``V``.

    Only for the scalar second-order families: ``energy`` gauge
    V = (|xi| u^, D_t u^) and ``l2`` gauge V = (u^, |xi|^-1 D_t u^).
    """
    gauge = getattr(problem, "gauge", None)
    V = _samples(V, grid)
    rho = grid.rho_nodes[None, :]
    if gauge == "energy":
        return V[..., 0] / rho, 1j * V[..., 1]
    if gauge == "l2":
        return V[..., 0], 1j * rho * V[..., 1]
    return None


@dataclass
class ClassNormsReport:
    l2_sq: float
    y_norm: float
    y_tail: float
    m_norm: float = None
    y_tilde: float = None
    k_norm: float = None
    weighted: dict = field(default_factory=dict)
    gate: GateReport = None
    data_tail: float = 0.0
    singular_weights: bool = False

    def to_dict(self):
        d = asdict(self)
        return d


def class_norms(data, grid, problem=None, taus=None, threshold=GATE_THRESHOLD,
                weighted=(), box=12.0, resolution=256):
    """All class norms of ``data`` (a DataFamily) and the smallness gate.

    ``weighted`` lists ``(sigma, kappa)`` pairs for weighted Sobolev norms
    (only when the family has a physical form).  Y~ and K norms are filled
    in for scalar second-order problems.
    """
    F = _samples(data, grid)
    l2 = float(l2_sq(grid, F))
    y = y_norm(F, grid, taus, detail=True)
    rep = ClassNormsReport(l2_sq=l2, y_norm=y.value, y_tail=y.tail)
    rep.data_tail = tail_ratio(grid, np.abs(F).max(axis=-1))
    if isinstance(data, DataFamily):
        rep.m_norm = m_norm(data, grid)
    if problem is not None:
        pair = scalar_pair(problem, F, grid)
        if pair is not None:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", SingularWeightWarning)
                rep.y_tilde = y_tilde_norm(pair[0], pair[1], grid, taus)
                rep.k_norm = k_norm(pair[0], pair[1], grid, taus)
            rep.singular_weights = any(issubclass(w.category, SingularWeightWarning) for w in caught)
    if isinstance(data, DataFamily) and data.physical is not None:
        for sigma, kappa in weighted:
            val, tail = weighted_sobolev_norm(data, sigma, kappa, grid.dim, box, resolution)
            rep.weighted[f"H{sigma:g}_k{kappa:g}"] = dict(value=val, tail=tail)
    rep.gate = smallness_gate(l2, y.value, threshold)
    return rep


def decay_profile(f1, f2, grid, taus, phi=None):
    """int_S |int_0^inf e^{i tau rho} f1 f2 phi(omega) rho^n d rho| d sigma at each tau."""
    a = _samples(f1, grid, 0 if isinstance(f1, DataFamily) else None)[..., 0]
    b = _samples(f2, grid, 0 if isinstance(f2, DataFamily) else None)[..., 0]
    w = np.ones(grid.n_omega) if phi is None else np.asarray(phi(grid.sphere_nodes), dtype=complex)
    h = a * b * w[:, None] * grid.rho_nodes ** grid.dim
    inner = integrate_radial_oscillatory(grid, h, np.asarray(taus, dtype=float))
    return np.abs(inner) @ grid.sphere_weights


def decay_exponent_fit(f1, f2, grid, taus, phi=None, noise_floor=NOISE_FLOOR):
    """Observed kappa = -slope of log profile against log <tau> (tau = 0 excluded)."""
    taus = np.asarray(taus, dtype=float)
    taus = taus[taus != 0]
    if taus.size < 2:
        raise ValueError("need at least two non-zero tau samples")
    prof = decay_profile(f1, f2, grid, taus, phi)
    if np.any(prof < noise_floor):
        raise SignalTooSmallError(
            f"signal too small: profile {prof.min():.3e} below noise floor {noise_floor:g}")
    x = 0.5 * np.log1p(taus**2)
    slope = np.polyfit(x, np.log(prof), 1)[0]
    return float(-slope)
