"""Structural checks on realized runs.

``sprime_split`` rebuilds s' from the representation U^ = N^-1 Phi a,

    s' = 2 (I + J),
    I = Re int rho^-k <S N^-1 (d/dt Phi) a, U^>            (oscillatory part)
    J = Re int rho^-k <S (d/dt N^-1) Phi a + S N^-1 Phi (d/dt a), U^>,

and splits I into the pairings (p, q) of the modes, weighted by
phi_pq = sum_{b,l} s_bl n^lp phi_p conj(n^bq).  The diagonal pairings p = q
are purely imaginary before the real part is taken and drop out.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .classnorms import y_norm
from .functional import l2_sq, radial_weights
from .solver import SolutionRecord, ThetaResult, realized_class, spectral_values

SPLIT_RTOL = 1e-5
DIAG_TOL = 1e-10


@dataclass
class DerivativeSplit:
    t_grid: np.ndarray
    I_values: np.ndarray
    J_values: np.ndarray
    J_frame: np.ndarray  # the d/dt N^-1 part of J
    J_amplitude: np.ndarray  # the d/dt a part of J
    sprime_reconstructed: np.ndarray
    pair_terms: np.ndarray  # (K+1, m, m): Re of the (p, q) pairing
    diagonal_residue: float
    phi_pq: np.ndarray  # (K+1, Q, m, m)
    gap: float

    @property
    def I_offdiagonal(self):
        m = self.pair_terms.shape[-1]
        off = ~np.eye(m, dtype=bool)
        return self.pair_terms[:, off].sum(axis=-1)


def _theta_of(run):
    if isinstance(run, ThetaResult):
        return run
    if isinstance(run, SolutionRecord):
        th = (run.info or {}).get("theta")
        if th is not None:
            return th
    raise ValueError("missing tables: the run was not produced with the asymptotic representation")


def phi_weights(weight, N_inv, roots):
    """phi_pq = [(N^-1)^H S N^-1]_qp phi_p, shape (..., m, m) indexed [p, q]."""
    G = np.conj(np.swapaxes(N_inv, -1, -2)) @ weight.matrix @ N_inv
    return np.swapaxes(G, -1, -2) * roots[..., :, None]


def central_difference(values, dt):
    """Five-point central derivative on interior nodes; NaN on the two end pairs."""
    v = np.asarray(values, dtype=float)
    out = np.full(v.shape, np.nan)
    if v.size >= 5:
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)
    return out


def sprime_split(run, problem, grid):
    th = _theta_of(run)
    tables, amps = th.tables, th.amplitudes
    if tables is None or amps is None:
        raise ValueError("missing tables: the run was not produced with the asymptotic representation")
    a = amps.a
    if a.shape[-1] != 1:
        raise ValueError("sprime_split needs vector amplitudes (data already applied)")
    w = a[..., 0]  # (K+1, Q, R, m)
    path = tables.path
    Ninv = path.N_inv[0::2]
    X = tables.X_half[0::2]
    roots = path.roots[0::2]
    rho = grid.rho_nodes
    e = np.exp(1j * tables.phases.theta[:, :, None, :] * rho[None, None, :, None])
    beta = e * w
    S = problem.weight.matrix
    rw = radial_weights(grid, problem.weight)

    def apply(M, v):  # M (K+1, Q, m, m), v (K+1, Q, R, m)
        return (M[:, :, None] @ v[..., None])[..., 0]

    U = apply(Ninv, beta)

    def pairing(x):  # Re int rho^-k <S x, U>
        dens = np.real(np.sum(x @ S.T * np.conj(U), axis=-1))
        return np.sum(dens * rw, axis=(-2, -1))

    # oscillatory part, pairing by pairing
    phi = phi_weights(problem.weight, Ninv, roots)  # [p, q]
    pb = 1j * rho[None, None, :, None, None] * phi[:, :, None] * beta[..., :, None] * np.conj(beta[..., None, :])
    pair = np.sum(np.real(pb) * rw[None, :, :, None, None], axis=(1, 2))
    I = pair.sum(axis=(-2, -1))
    diag = np.abs(np.einsum("kpp->k", pair))
    scale = max(float(np.max(np.abs(pair))), 1e-300)
    # J: frame derivative d/dt N^-1 = -N^-1 X and amplitude derivative from d/dt a = Ct a
    J_frame = pairing(-apply(Ninv, apply(X, beta)))
    Ct_w = np.conj(e) * apply(X, beta)
    J_amp = pairing(apply(Ninv, e * Ct_w))
    J = J_frame + J_amp
    gaps = np.diff(roots, axis=-1).min() if roots.shape[-1] > 1 else np.inf
    return DerivativeSplit(tables.coef.t_grid, I, J, J_frame, J_amp, 2 * (I + J), pair,
                           float(diag.max() / scale) if scale > 1e-300 else 0.0, phi, float(gaps))


def split_report(split, s_values, rtol=SPLIT_RTOL, diag_tol=DIAG_TOL):
    """Compare 2(I + J) against central differences of the recorded s(t)."""
    dt = float(split.t_grid[1] - split.t_grid[0])
    fd = central_difference(s_values, dt)
    ok = ~np.isnan(fd)
    smax = float(np.max(np.abs(split.sprime_reconstructed)))
    err = float(np.max(np.abs(fd[ok] - split.sprime_reconstructed[ok]))) if np.any(ok) else 0.0
    thr = max(rtol * smax, 1e-10 * max(float(np.max(np.abs(s_values))), 1e-300), 1e-300)
    return dict(error=err, threshold=thr, max_sprime=smax, passed=err < thr,
                diagonal_residue=split.diagonal_residue,
                diagonal_passed=split.diagonal_residue < diag_tol,
                max_abs_J=float(np.max(np.abs(split.J_values))))


def phi_bound_ratio(tables, problem):
    """max over samples of |phi_pq| / (||S|| ||N^-1||^2 max_p |phi_p|); at most 1."""
    path = tables.path
    Ninv = path.N_inv[0::2]
    roots = path.roots[0::2]
    phi = phi_weights(problem.weight, Ninv, roots)
    bound = (problem.weight.norm * np.linalg.norm(Ninv, 2, axis=(-2, -1)) ** 2
             * np.abs(roots).max(axis=-1))
    mag = np.abs(phi).max(axis=(-2, -1))
    return float(np.max(mag / np.where(bound > 0, bound, np.inf)))


def tv_additivity(traj):
    """|TV[0,T] - TV[0,T/2] - TV[T/2,T]| for the recorded trajectory."""
    K = traj.t_grid.size - 1
    mid = K // 2
    whole = traj.total_variation_between(0, K)
    parts = traj.total_variation_between(0, mid) + traj.total_variation_between(mid, K)
    return abs(whole - parts), whole


def core_bound_report(run, problem, grid, data, y_value=None):
    """TV = int |s'| dt against K ||U0||^2 + |U0|_Y and their ratio."""
    traj = run.trajectory
    V0 = spectral_values(data, grid, problem.m)
    l2 = float(l2_sq(grid, V0))
    y = y_norm(V0, grid) if y_value is None else float(y_value)
    realized = realized_class(problem, grid, traj)
    tv = traj.total_variation
    denom = realized["K"] * l2 + y
    ratio = tv / denom if denom > 0 else None
    return dict(total_variation=tv, K=realized["K"], l2_sq=l2, y_norm=y,
                denominator=denom, ratio=ratio)


def scaling_sweep(solve, problem, grid, data, lambdas=(0.5, 0.25, 0.125)):
    """Run ``solve(scaled_data)`` per lambda; report TV and bound-ratio scaling.

    ``tv_scaling`` holds TV(lam) / (lam / lam_0)^2 / TV(lam_0), which is 1
    for exact quadratic scaling.
    """
    rows = []
    for lam in lambdas:
        d = data.scaled(lam)
        rec = solve(d)
        rows.append(dict(lam=float(lam), **core_bound_report(rec, problem, grid, d)))
    if not rows or rows[0]["total_variation"] == 0:
        return dict(rows=rows, tv_scaling=None, ratio_spread=None)
    lam0, tv0 = rows[0]["lam"], rows[0]["total_variation"]
    scal = [r["total_variation"] / tv0 / (r["lam"] / lam0) ** 2 for r in rows]
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    spread = max(ratios) / min(ratios) - 1.0 if ratios else None
    return dict(rows=rows, tv_scaling=scal, tv_scaling_error=max(abs(x - 1) for x in scal),
                ratio_spread=spread)


def default_box(problem, grid, samples=65):
    """Lambda = sup_{s in [0, delta]} max_omega ||A(s, omega)||_2."""
    model = problem.symbol
    s = np.linspace(0.0, model.delta, samples)[:, None]
    A = model(s, grid.sphere_nodes[None])
    return float(np.linalg.norm(A, 2, axis=(-2, -1)).max())


def class_membership(run, problem, grid, Lambda=None, K=None):
    """Check the realized path and every fixed-point image against the box (Lambda, K)."""
    Lambda = default_box(problem, grid) if Lambda is None else float(Lambda)
    final = realized_class(problem, grid, run.trajectory)
    in_box = lambda r: r["Lambda"] <= Lambda * (1 + 1e-12) and (K is None or r["K"] <= K)
    report = dict(Lambda=Lambda, K=K, realized=final, in_class=in_box(final))
    per_iter = (run.info or {}).get("realized_per_iteration")
    if per_iter:
        # realized_per_iteration[i] is the class of the input path to iteration i,
        # which is the image of iteration i - 1.
        inputs, images = per_iter[:-1], per_iter[1:]
        report["into_itself"] = all(in_box(b) for a, b in zip(inputs, images) if in_box(a))
        report["images"] = [dict(Lambda=r["Lambda"], K=r["K"]) for r in images] + [
            dict(Lambda=final["Lambda"], K=final["K"])]
        report["violations"] = [i for i, r in enumerate(report["images"]) if not in_box(r)]
    return report


def _converges(problem, data, grid, T, dt, tol, max_iters):
    from .errors import ConvergenceError, ParameterRangeError
    from .solver import fixed_point_solve

    try:
        fixed_point_solve(problem, data, grid, T, dt, tol=tol, max_iters=max_iters)
    except (ConvergenceError, ParameterRangeError):
        return False
    return True


def gate_sharpness(problem, data, grid, T, dt, threshold=None, tol=1e-10, max_iters=100,
                   grow=2.0, max_doublings=12, bisections=6):
    """Scale at which the gate fails against the scale at which the iteration stops converging.

    The gate value is quadratic in the scale, so ``lam_gate`` is exact.  The
    divergence scale is bracketed by repeated growth from ``lam_gate`` and
    refined by bisection; ``lam_diverge`` is None when no failure was found
    below ``lam_gate * grow**max_doublings``.
    """
    from .classnorms import GATE_THRESHOLD, gate_for

    thr = GATE_THRESHOLD if threshold is None else float(threshold)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g1 = gate_for(data, grid, thr)
    if g1.value == 0:
        return dict(lam_gate=None, lam_diverge=None, sharper=None, gate_value=0.0)
    lam_gate = float(np.sqrt(thr / g1.value))
    ok = lambda lam: _converges(problem, data.scaled(lam), grid, T, dt, tol, max_iters)
    lo, hi = None, None
    lam = lam_gate
    for _ in range(max_doublings + 1):
        if ok(lam):
            lo = lam
            lam *= grow
        else:
            hi = lam
            break
    if hi is None:
        return dict(lam_gate=lam_gate, lam_diverge=None, converged_up_to=lo, sharper=True,
                    gate_value=g1.value)
    if lo is None:
        lo = 0.0
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return dict(lam_gate=lam_gate, lam_diverge=hi, converged_up_to=lo, sharper=hi > lam_gate,
                gate_value=g1.value)
