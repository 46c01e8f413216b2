"""Parameter-dependent matrix symbols A(s, omega) and their characteristic roots.

A symbol is evaluated on the unit sphere only; the full symbol is
``|xi| * A(s, xi/|xi|)``.  Symbol callables broadcast: ``s`` may be any array
and ``omega`` has shape ``(..., n)``; the result has the broadcast shape of
``s`` and ``omega[..., 0]`` followed by ``(m, m)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GapError, HyperbolicityError

REALITY_TOL = 1e-9
GAP_TOL = 1e-10
FD_REL_STEP = 1e-5


def _unit(omega):
    omega = np.asarray(omega, dtype=float)
    norm = np.linalg.norm(omega, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("omega must be non-zero")
    return omega / norm


@dataclass(frozen=True, eq=False)
class SymbolModel:
    """Matrix symbol ``A(s, omega)`` on ``[0, delta] x S^{n-1}``.

    ``lip_bound`` bounds the spectral norm of dA/ds over the admissible set.
    """

    m: int
    func: Callable
    delta: float
    lip_bound: float
    name: str = "user"
    depends_on_s: bool = True

    def __call__(self, s, omega):
        omega = _unit(omega)
        s = np.asarray(s, dtype=float)
        out = np.asarray(self.func(s, omega), dtype=complex)
        shape = np.broadcast_shapes(s.shape, omega.shape[:-1]) + (self.m, self.m)
        return np.broadcast_to(out, shape)

    def ds(self, s, omega):
        """Entrywise derivative in s by central differences (one-sided at the ends)."""
        return _ds_fd(lambda x: self(x, omega), s, self.delta)


@dataclass(frozen=True)
class HermitianWeight:
    """Hermitian matrix S and exponent k of the nonlocal term <|xi|^-k S U, U>."""

    matrix: np.ndarray
    radial_exponent: int = 0

    def __post_init__(self):
        S = np.asarray(self.matrix, dtype=complex)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("S must be a square matrix")
        if np.max(np.abs(S - S.conj().T), initial=0.0) > 1e-14:
            raise ValueError("S must be Hermitian")
        if self.radial_exponent < 0:
            raise ValueError("radial exponent must be >= 0")
        S.setflags(write=False)
        object.__setattr__(self, "matrix", S)

    def validate(self, n):
        if self.radial_exponent > n - 1:
            raise ValueError(
                f"radial exponent k={self.radial_exponent} exceeds n-1={n - 1}"
            )

    @property
    def norm(self):
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True)
class RootSet:
    """Sorted real roots at unit frequency; arrays may carry leading batch axes."""

    roots: np.ndarray
    gap: np.ndarray
    ds_roots: np.ndarray = field(default=None)


def _ds_fd(f, s, delta):
    s = np.asarray(s, dtype=float)
    h = FD_REL_STEP * delta
    lo = s - h < 0.0
    hi = s + h > delta
    centre = (f(s + h) - f(s - h)) / (2 * h)
    if not (np.any(lo) or np.any(hi)):
        return centre
    fwd = (-3 * f(s) + 4 * f(s + h) - f(s + 2 * h)) / (2 * h)
    bwd = (3 * f(s) - 4 * f(s - h) + f(s - 2 * h)) / (2 * h)
    extra = centre.ndim - s.ndim
    lo = lo.reshape(lo.shape + (1,) * extra)
    hi = hi.reshape(hi.shape + (1,) * extra)
    return np.where(lo, fwd, np.where(hi, bwd, centre))


def charpoly_coefficients(A):
    """alpha_1..alpha_m of det(tau I - A) = tau^m + alpha_1 tau^(m-1) + ... (Faddeev-LeVerrier)."""
    A = np.asarray(A, dtype=complex)
    m = A.shape[-1]
    eye = np.eye(m)
    alpha = np.empty(A.shape[:-2] + (m + 1,), dtype=complex)
    alpha[..., 0] = 1.0
    M = np.broadcast_to(eye, A.shape).astype(complex)
    for k in range(1, m + 1):
        if k > 1:
            M = A @ M + alpha[..., k - 1, None, None] * eye
        alpha[..., k] = -np.trace(A @ M, axis1=-2, axis2=-1) / k
    return alpha


def _sorted_real_eigs(A, s, omega, check_gap=True):
    ev = np.linalg.eigvals(A)
    re = ev.real
    bad = np.abs(ev.imag) >= REALITY_TOL * (1.0 + np.abs(ev))
    if np.any(bad):
        idx = np.argwhere(bad.any(axis=-1))[0]
        raise HyperbolicityError(
            f"hyperbolicity violated at (s={_pick(s, idx)}, omega={_pick_omega(omega, idx)}): "
            f"non-real root {ev[tuple(idx)][bad[tuple(idx)]][0]}"
        )
    roots = np.sort(re, axis=-1)
    if roots.shape[-1] > 1:
        gap = np.diff(roots, axis=-1).min(axis=-1)
    else:
        gap = np.full(roots.shape[:-1], np.inf)
    if check_gap and np.any(gap <= GAP_TOL * (1.0 + np.abs(roots).max(axis=-1))):
        idx = np.unravel_index(np.argmin(gap), gap.shape)
        raise GapError(
            f"gap failure at (s={_pick(s, idx)}, omega={_pick_omega(omega, idx)}): "
            f"min root separation {np.min(gap):.3e}"
        )
    return roots, gap


def _pick(s, idx):
    s = np.asarray(s)
    if s.ndim == 0:
        return float(s)
    try:
        return float(np.broadcast_to(s, s.shape)[tuple(idx)[: s.ndim]])
    except (IndexError, ValueError):
        return s.ravel()[0]


def _pick_omega(omega, idx):
    omega = np.asarray(omega)
    if omega.ndim == 1:
        return omega.tolist()
    try:
        return omega[tuple(idx)[-(omega.ndim - 1):]].tolist()
    except (IndexError, ValueError):
        return omega.reshape(-1, omega.shape[-1])[0].tolist()


def root_derivatives(roots, dalpha):
    """d phi_k from prod_{r!=k}(phi_k - phi_r) d phi_k = -sum_j d alpha_{m-j} phi_k^j."""
    m = roots.shape[-1]
    powers = roots[..., :, None] ** np.arange(m + 1)  # (..., k, j)
    # column j multiplies d alpha_{m-j}
    da = dalpha[..., ::-1]  # da[..., j] = d alpha_{m-j}
    rhs = -(powers * da[..., None, :]).sum(axis=-1)
    diff = roots[..., :, None] - roots[..., None, :]
    diff = np.where(np.eye(m, dtype=bool), 1.0, diff)
    return (rhs / diff.prod(axis=-1)).real


def characteristic_roots(model, s, omega, check_gap=True, with_derivative=True):
    """Sorted characteristic roots of ``A(s, omega)`` and their s-derivatives.

    ``omega`` may be a single unit vector or an array ``(..., n)``; ``s`` may
    broadcast against it.  Raises ``HyperbolicityError`` for non-real roots
    and ``GapError`` for colliding ones (unless ``check_gap`` is False).
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or np.any(s_arr > model.delta):
        raise ValueError(f"s must lie in [0, delta={model.delta}]")
    A = model(s_arr, omega)
    roots, gap = _sorted_real_eigs(A, s_arr, omega, check_gap=check_gap)
    ds_roots = None
    if with_derivative:
        if model.depends_on_s:
            dalpha = _ds_fd(lambda x: charpoly_coefficients(model(x, omega)), s_arr, model.delta)
            ds_roots = root_derivatives(roots, dalpha)
        else:
            ds_roots = np.zeros_like(roots)
    return RootSet(roots=roots, gap=gap, ds_roots=ds_roots)


def hyperbolicity_gap(model, s_samples, grid):
    """Minimum root separation over the sampled (s, omega) set.

    Collisions are not raised here; a returned gap of (numerically) zero is
    the failure signal.  Non-real roots still raise.
    """
    s = np.asarray(s_samples, dtype=float).reshape(-1, 1)
    omega = np.asarray(grid.sphere_nodes if hasattr(grid, "sphere_nodes") else grid)
    rs = characteristic_roots(model, s, omega[None, :, :], check_gap=False, with_derivative=False)
    return float(np.min(rs.gap))


def lipschitz_estimate(func, delta, omegas, n_samples=33):
    """max over sampled s, omega of the spectral norm of d/ds ``func``."""
    s = np.linspace(0.0, delta, n_samples)[:, None]
    omegas = _unit(omegas)[None]
    d = _ds_fd(lambda x: np.asarray(func(x, omegas), dtype=complex), s, delta)
    return float(np.linalg.norm(d, 2, axis=(-2, -1)).max())


def _default_omegas(dim):
    return np.eye(dim) if dim > 1 else np.array([[-1.0], [1.0]])


def companion_symbol(H, delta=1.0, lip_bound=None, name="companion", dim=1):
    """Companion symbol with last row (-H_m, ..., -H_1).

    ``H`` is the sequence ``[H_1, ..., H_m]`` of callables ``H_j(s, omega)``;
    the characteristic polynomial is ``tau^m + sum_j H_j tau^(m-j)``.
    """
    H = list(H)
    m = len(H)
    if m < 1:
        raise ValueError("need at least one coefficient")

    def func(s, omega):
        shape = np.broadcast_shapes(np.shape(s), omega.shape[:-1])
        A = np.zeros(shape + (m, m), dtype=complex)
        for r in range(m - 1):
            A[..., r, r + 1] = 1.0
        for j, Hj in enumerate(H, start=1):
            A[..., m - 1, m - j] = -np.broadcast_to(Hj(s, omega), shape)
        return A

    depends = _probe_s_dependence(func, delta, _default_omegas(dim))
    if lip_bound is None:
        lip_bound = lipschitz_estimate(func, delta, _default_omegas(dim))
    return SymbolModel(m, func, float(delta), float(lip_bound), name, depends)


def _probe_s_dependence(func, delta, omegas):
    a = np.asarray(func(np.float64(0.0), _unit(omegas)))
    b = np.asarray(func(np.float64(delta), _unit(omegas)))
    return not np.array_equal(a, b)


def quadratic_form(Q):
    """Homogeneous degree-2 polynomial P(omega) = omega^T Q omega."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))

    def P(omega):
        omega = np.asarray(omega, dtype=float)
        return np.einsum("...i,ij,...j->...", omega, Q, omega)

    P.matrix = Q
    return P


def coupled_roots_closed_form(a1, a2, p1, p2, s):
    """Closed-form roots of the coupled two-speed Kirchhoff symbol (ascending)."""
    c1 = a1 * (1.0 + s)
    c2 = a2 * (1.0 + s)
    disc = np.sqrt((c1 - c2) ** 2 + 4.0 * p1 * p2 + 0j)
    lam_p = (c1 + c2 + disc) / 2.0
    lam_m = (c1 + c2 - disc) / 2.0
    rp, rm = np.sqrt(lam_p), np.sqrt(lam_m)
    return np.sort(np.stack([-rp, -rm, rm, rp], axis=-1).real, axis=-1)


def coupled_symbol(a1, a2, P1, P2, delta=1.0, check_omegas=None, name="coupled"):
    """4x4 symbol of the coupled pair with c_k^2 = a_k (1 + s).

    ``P1``, ``P2`` evaluate the degree-2 coupling polynomials on unit vectors.
    The positivity conditions on ``(a1-a2)^2 + 4 P1 P2``, ``a1^2 a2^2 - P1 P2``
    and ``a1 a2 - P1 P2`` (real roots at s = 0) are checked on
    ``check_omegas`` (default: the coordinate axes of the polynomials'
    dimension).
    """
    if not (a1 > 0 and a2 > 0):
        raise ValueError("a1, a2 must be positive")
    if a1 == a2:
        raise ValueError("a1 and a2 must differ")
    dim = getattr(P1, "matrix", np.zeros((1, 1))).shape[0]
    omegas = _default_omegas(dim) if check_omegas is None else _unit(check_omegas)
    p1, p2 = np.asarray(P1(omegas)), np.asarray(P2(omegas))
    c_disc = (a1 - a2) ** 2 + 4.0 * p1 * p2
    c_pos = a1**2 * a2**2 - p1 * p2
    # real roots need c1^2 c2^2 > P1 P2 for all s >= 0, i.e. a1 a2 > P1 P2 at s = 0
    c_real = a1 * a2 - p1 * p2
    for cond, label in ((c_disc, "(a1-a2)^2 + 4 P1 P2"), (c_pos, "a1^2 a2^2 - P1 P2"),
                        (c_real, "a1 a2 - P1 P2")):
        if np.min(cond) <= 0:
            bad = omegas[int(np.argmin(cond))]
            raise ValueError(f"condition {label} > 0 violated at omega={bad.tolist()}")

    def func(s, omega):
        shape = np.broadcast_shapes(np.shape(s), omega.shape[:-1])
        c1 = a1 * (1.0 + np.asarray(s))
        c2 = a2 * (1.0 + np.asarray(s))
        A = np.zeros(shape + (4, 4), dtype=complex)
        A[..., 0, 1] = -1j
        A[..., 1, 0] = 1j * np.broadcast_to(c1, shape)
        A[..., 1, 2] = 1j * np.broadcast_to(P1(omega), shape)
        A[..., 2, 3] = -1j
        A[..., 3, 0] = 1j * np.broadcast_to(P2(omega), shape)
        A[..., 3, 2] = 1j * np.broadcast_to(c2, shape)
        return A

    model = SymbolModel(4, func, float(delta), float(max(a1, a2)), name, True)
    object.__setattr__(model, "params", dict(a1=a1, a2=a2, P1=P1, P2=P2))
    return model


def tabulated_symbol(s_samples, omegas, table, name="tabulated"):
    """User symbol from a table of shape ``(n_s, n_omega, m, m)``.

    Linear interpolation in s; omega is matched to the nearest tabulated node.
    """
    s_samples = np.asarray(s_samples, dtype=float)
    omegas = _unit(omegas)
    table = np.asarray(table, dtype=complex)
    if table.shape[:2] != (s_samples.size, omegas.shape[0]) or table.shape[2] != table.shape[3]:
        raise ValueError("table must have shape (n_s, n_omega, m, m)")
    if np.any(np.diff(s_samples) <= 0):
        raise ValueError("s_samples must be strictly increasing")
    m = table.shape[2]
    delta = float(s_samples[-1])

    def func(s, omega):
        q = np.argmax(omega @ omegas.T, axis=-1)
        s = np.clip(np.asarray(s, dtype=float), s_samples[0], s_samples[-1])
        i = np.clip(np.searchsorted(s_samples, s, side="right") - 1, 0, s_samples.size - 2)
        w = (s - s_samples[i]) / (s_samples[i + 1] - s_samples[i])
        i, w, q = np.broadcast_arrays(i, w, q)
        lo = table[i, q]
        hi = table[i + 1, q]
        return lo + w[..., None, None] * (hi - lo)

    jumps = np.linalg.norm(np.diff(table, axis=0), 2, axis=(-2, -1))
    slopes = jumps / np.diff(s_samples)[:, None]
    lip = float(slopes.max()) if slopes.size else 0.0
    return SymbolModel(m, func, delta, lip, name, bool(lip > 0))
