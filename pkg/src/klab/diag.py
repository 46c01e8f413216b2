"""Left-eigenvector diagonalizers N with N A = D N and their s-derivatives.

Rows are taken from the adjugate of ``phi_p I - A``: for a simple root every
row of the adjugate is a multiple of the left eigenvector, and its entries are
polynomials in the entries of A, so N inherits the regularity of the symbol.

Gauge: each row is scaled so that one "pivot" entry equals +1.  A standalone
diagonalizer uses the largest-magnitude entry as pivot (first index on ties).
Along a path the pivot chosen at the first sample is kept, which makes N a
smooth function of s so that d/dt N = dN/ds * s'.  If a pivot entry becomes
small the row is re-pivoted with a constant factor that keeps it continuous.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DiagonalizationError
from .symbol import FD_REL_STEP, _sorted_real_eigs, characteristic_roots

DET_FLOOR = 1e-6
DEFECT_TOL = 1e-12
BRANCH_CORRELATION = 0.5
TIE_RTOL = 1e-12
REPIVOT_RATIO = 1e-3


@dataclass(frozen=True)
class Diagonalizer:
    N: np.ndarray
    N_inv: np.ndarray
    det_abs: np.ndarray
    ds_N: np.ndarray = None
    roots: np.ndarray = None


def adjugate(B):
    """Adjugate of a batch of square matrices via cofactors."""
    B = np.asarray(B, dtype=complex)
    m = B.shape[-1]
    if m == 1:
        return np.ones_like(B)
    adj = np.empty_like(B)
    idx = np.arange(m)
    for i in range(m):
        rows = idx[idx != i]
        for j in range(m):
            cols = idx[idx != j]
            minor = B[..., rows[:, None], cols[None, :]]
            adj[..., j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def _raw_left_rows(A, roots):
    """Unnormalized left eigenvectors ``L[..., p, :]`` from adjugate rows."""
    A = np.asarray(A, dtype=complex)
    m = A.shape[-1]
    eye = np.eye(m)
    B = roots[..., :, None, None] * eye - A[..., None, :, :]
    adj = adjugate(B)  # (..., p, r, c)
    norms = np.linalg.norm(adj, axis=-1)
    best = np.argmax(norms, axis=-1)
    rows = np.take_along_axis(adj, best[..., None, None], axis=-2)[..., 0, :]
    scale = np.maximum(1.0, np.abs(A).max(axis=(-2, -1))) ** (m - 1)
    top = np.take_along_axis(norms, best[..., None], axis=-1)[..., 0]
    if np.any(top < DEFECT_TOL * scale[..., None]):
        raise DiagonalizationError("diagonalization failure: adjugate vanishes (defective symbol)")
    return rows


def _largest_pivot(rows):
    mag = np.abs(rows)
    peak = mag.max(axis=-1, keepdims=True)
    return np.argmax(mag >= (1.0 - TIE_RTOL) * peak, axis=-1)


def _apply_gauge(rows, pivot, factor=None):
    piv = np.take_along_axis(rows, pivot[..., None], axis=-1)
    out = rows / piv
    if factor is not None:
        out = out * factor[..., None]
    return out


def _finish(N, det_floor):
    det = np.linalg.det(N)
    det_abs = np.abs(det)
    if np.any(det_abs < det_floor):
        raise DiagonalizationError(
            f"degenerate diagonalizer: |det N| = {det_abs.min():.3e} < det_floor={det_floor:g}"
        )
    return np.linalg.inv(N), det_abs


def build_diagonalizer(A, roots, det_floor=DET_FLOOR):
    """Diagonalizer of ``A`` (shape ``(..., m, m)``) for sorted simple ``roots``.

    ``roots`` is a RootSet or an array ``(..., m)``.  ``ds_N`` is left empty;
    use :func:`diagonalizer_at` to get it from a symbol.
    """
    phi = np.asarray(getattr(roots, "roots", roots), dtype=float)
    rows = _raw_left_rows(A, phi)
    N = _apply_gauge(rows, _largest_pivot(rows))
    N_inv, det_abs = _finish(N, det_floor)
    return Diagonalizer(N, N_inv, det_abs, None, phi)


def _roots_at(model, s, omega):
    A = model(s, omega)
    phi, _ = _sorted_real_eigs(A, s, omega, check_gap=True)
    return A, phi


def _gauged_N(model, s, omega, pivot, factor):
    A, phi = _roots_at(model, s, omega)
    return _apply_gauge(_raw_left_rows(A, phi), pivot, factor)


def _ds_gauged(model, s, omega, pivot, factor):
    s = np.asarray(s, dtype=float)
    if not model.depends_on_s:
        shape = np.broadcast_shapes(s.shape, np.shape(omega)[:-1]) + (model.m, model.m)
        return np.zeros(shape, dtype=complex)
    h = FD_REL_STEP * model.delta
    f = lambda x: _gauged_N(model, x, omega, pivot, factor)
    lo = s - h < 0.0
    hi = s + h > model.delta
    sc = np.clip(s, h, model.delta - h)
    centre = (f(sc + h) - f(sc - h)) / (2 * h)
    if not (np.any(lo) or np.any(hi)):
        return centre
    fwd = (-3 * f(s) + 4 * f(s + h) - f(s + 2 * h)) / (2 * h) if np.any(lo) else centre
    bwd = (3 * f(s) - 4 * f(s - h) + f(s - 2 * h)) / (2 * h) if np.any(hi) else centre
    extra = centre.ndim - s.ndim
    lo = lo.reshape(lo.shape + (1,) * extra)
    hi = hi.reshape(hi.shape + (1,) * extra)
    return np.where(lo, fwd, np.where(hi, bwd, centre))


def diagonalizer_at(model, s, omega, det_floor=DET_FLOOR):
    """Diagonalizer of ``model`` at (s, omega) including ``ds_N``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > model.delta):
        raise ValueError(f"s must lie in [0, delta={model.delta}]")
    A, phi = _roots_at(model, s, omega)
    rows = _raw_left_rows(A, phi)
    pivot = _largest_pivot(rows)
    N = _apply_gauge(rows, pivot)
    N_inv, det_abs = _finish(N, det_floor)
    dsN = _ds_gauged(model, s, omega, pivot, None)
    return Diagonalizer(N, N_inv, det_abs, dsN, phi)


@dataclass(frozen=True)
class DiagonalizerPath:
    """Diagonalizers along ``s_path``; arrays are indexed ``(t, omega, ...)``."""

    s_path: np.ndarray
    N: np.ndarray
    N_inv: np.ndarray
    det_abs: np.ndarray
    ds_N: np.ndarray
    roots: np.ndarray
    ds_roots: np.ndarray
    total_variation: np.ndarray  # per omega, sum_k max|N_{k+1} - N_k|
    min_correlation: float

    def __len__(self):
        return self.N.shape[0]

    def __getitem__(self, k):
        return Diagonalizer(self.N[k], self.N_inv[k], self.det_abs[k], self.ds_N[k], self.roots[k])

    @property
    def det_min(self):
        return float(self.det_abs.min())


def _row_correlation(a, b):
    num = np.real(np.sum(a * np.conj(b), axis=-1))
    den = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
    return num / den


def diagonalizer_path(model, s_path, omega, det_floor=DET_FLOOR):
    """Diagonalizers along a sampled coefficient path ``s_path`` (1-D).

    ``omega`` is ``(Q, n)`` (or a single unit vector).  Raises
    ``DiagonalizationError`` if consecutive rows correlate below 0.5, which
    means the time grid is too coarse to follow the eigenvector branches.
    """
    s_path = np.asarray(s_path, dtype=float)
    if s_path.ndim != 1:
        raise ValueError("s_path must be one-dimensional")
    if np.any(s_path < 0) or np.any(s_path > model.delta):
        raise ValueError(f"s_path must lie in [0, delta={model.delta}]")
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    s_col = s_path[:, None]
    A = model(s_col, omega[None])  # (K, Q, m, m)
    phi, _ = _sorted_real_eigs(A, s_col, omega[None], check_gap=True)
    rows = _raw_left_rows(A, phi)  # (K, Q, p, m)
    K = s_path.size

    # Fix the gauge from the first sample and continue it along the path.
    pivot = np.broadcast_to(_largest_pivot(rows[0]), rows.shape[:-1]).copy()
    factor = np.ones(rows.shape[:-1], dtype=complex)
    N = np.empty_like(rows)
    N[0] = _apply_gauge(rows[0], pivot[0])
    min_corr = 1.0
    for k in range(1, K):
        piv, fac = pivot[k - 1], factor[k - 1]
        cand = _apply_gauge(rows[k], piv, fac)
        mag = np.abs(cand)
        weak = np.take_along_axis(mag, piv[..., None], axis=-1)[..., 0] < REPIVOT_RATIO * mag.max(axis=-1)
        if np.any(weak):
            new_piv = np.where(weak, _largest_pivot(rows[k]), piv)
            new_fac = np.where(weak, np.take_along_axis(N[k - 1], new_piv[..., None], axis=-1)[..., 0], fac)
            piv, fac = new_piv, new_fac
            cand = _apply_gauge(rows[k], piv, fac)
        corr = _row_correlation(cand, N[k - 1])
        min_corr = min(min_corr, float(corr.min()))
        if np.any(corr < BRANCH_CORRELATION):
            raise DiagonalizationError(
                f"branch discontinuity between samples {k - 1} and {k} "
                f"(row correlation {corr.min():.3f}); refine the time grid"
            )
        pivot[k], factor[k] = piv, fac
        N[k] = cand

    N_inv, det_abs = _finish(N, det_floor)
    dsN = _ds_gauged(model, s_col, omega[None], pivot, factor)
    if K > 1:
        tv = np.abs(np.diff(N, axis=0)).max(axis=(-2, -1)).sum(axis=0)
    else:
        tv = np.zeros(omega.shape[0])

    ds_roots = characteristic_roots(model, s_col, omega[None], check_gap=False).ds_roots
    return DiagonalizerPath(s_path, N, N_inv, det_abs, dsN, phi, ds_roots, tv, min_corr)


def residuals(A, diag):
    """(max|N A - D N| / ||A||, max|N N^-1 - I|) over a batch."""
    A = np.asarray(A, dtype=complex)
    D = diag.roots
    res1 = np.abs(diag.N @ A - D[..., :, None] * diag.N).max(axis=(-2, -1))
    scale = np.maximum(np.abs(A).max(axis=(-2, -1)), 1e-300)
    m = A.shape[-1]
    res2 = np.abs(diag.N @ diag.N_inv - np.eye(m)).max(axis=(-2, -1))
    return float((res1 / scale).max()), float(res2.max())
