import numpy as np
import pytest
from scipy.integrate import quad

from klab.diag import (
    adjugate,
    build_diagonalizer,
    diagonalizer_at,
    diagonalizer_path,
    residuals,
)
from klab.errors import DiagonalizationError
from klab.families import FAMILIES, build_problem
from klab.symbol import characteristic_roots, coupled_symbol, quadratic_form

E1 = np.array([1.0])


def test_scalar_symbol_gives_identity():
    d = build_diagonalizer(np.array([[3.0 + 0j]]), np.array([3.0]))
    assert d.N.tolist() == [[1.0]]


def test_wave_rows_by_hand():
    A = np.array([[0, 1], [4, 0]], dtype=complex)
    d = build_diagonalizer(A, np.array([-2.0, 2.0]))
    # left eigenvectors l A = phi l are (-2, 1) and (2, 1), scaled so the largest entry is +1
    assert np.allclose(d.N, [[1, -0.5], [1, 0.5]], atol=1e-15)
    r1, r2 = residuals(A, d)
    assert r1 < 1e-12 and r2 < 1e-12


def test_decoupled_coupled_is_block_diagonal():
    zero = quadratic_form(np.zeros((1, 1)))
    model = coupled_symbol(1.0, 4.0, zero, zero)
    A = model(0.0, E1)
    d = build_diagonalizer(A, characteristic_roots(model, 0.0, E1))
    blocks = np.abs(d.N) > 1e-14
    # roots -2, 2 live on components (2, 3); roots -1, 1 on (0, 1)
    assert not blocks[[0, 3]][:, [0, 1]].any() and not blocks[[1, 2]][:, [2, 3]].any()
    assert residuals(A, d)[0] < 1e-12


def test_adjugate_identity():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((5, 4, 4)) + 1j * rng.standard_normal((5, 4, 4))
    assert np.allclose(adjugate(B) @ B, np.linalg.det(B)[:, None, None] * np.eye(4), atol=1e-12)


def test_defective_matrix_rejected():
    A = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(DiagonalizationError, match="degenerate|diagonalization failure"):
        build_diagonalizer(A, np.array([0.0, 0.0]))


def test_kirchhoff_ds_N_analytic():
    p = build_problem("kirchhoff")
    for s in (0.0, 0.3, 0.9):
        d = diagonalizer_at(p.symbol, s, E1)
        a = 1 + s
        ref = np.array([[0, 0.5 * a**-1.5], [0, -0.5 * a**-1.5]])
        assert np.allclose(d.ds_N, ref, atol=1e-8)


def test_constant_path_has_no_variation():
    p = build_problem("coupled")
    path = diagonalizer_path(p.symbol, np.full(20, 0.2), np.array([[-1.0], [1.0]]))
    assert np.all(path.total_variation == 0)
    assert np.all(path.N == path.N[0])


def tv_on(n_steps):
    p = build_problem("kirchhoff")
    t = np.linspace(-5, 5, n_steps + 1)
    path = diagonalizer_path(p.symbol, 0.1 * np.exp(-t * t), E1)
    return float(path.total_variation[0]), path


def test_path_total_variation_matches_analytic():
    tv, path = tv_on(512)
    sp = lambda t: -0.2 * t * np.exp(-t * t)
    ref = quad(lambda t: 0.5 * (1 + 0.1 * np.exp(-t * t)) ** -1.5 * abs(sp(t)), -5, 5, points=[0])[0]
    assert abs(tv / ref - 1) < 0.02
    tv2, _ = tv_on(1024)
    assert abs(tv2 / tv - 1) < 5e-3
    assert path.det_min >= 1e-6


def test_path_N_matches_pointwise_and_ds_converges():
    p = build_problem("fourth_order")
    s = np.linspace(0.0, 0.5, 41)
    om = np.array([[-1.0], [1.0]])
    path = diagonalizer_path(p.symbol, s, om)
    for k in (0, 17, 40):
        A = p.symbol(s[k], om)
        r1, r2 = residuals(A, path[k])
        assert r1 < 1e-9 and r2 < 1e-10
    # ds_N agrees with path differences to second order
    fd = (path.N[2:] - path.N[:-2]) / (2 * (s[1] - s[0]))
    err_h = np.abs(fd - path.ds_N[1:-1]).max()
    path2 = diagonalizer_path(p.symbol, np.linspace(0.0, 0.5, 81), om)
    fd2 = (path2.N[2:] - path2.N[:-2]) / (2 * (s[1] - s[0]) / 2)
    err_h2 = np.abs(fd2 - path2.ds_N[1:-1]).max()
    assert np.log2(err_h / err_h2) > 1.8


def test_branch_jump_detected():
    # the table flips sign, so each root jumps to the other eigenvector
    from klab.symbol import tabulated_symbol

    s = np.array([0.0, 0.5, 1.0])
    A0 = np.array([[0, 1], [1, 0]], dtype=complex)
    A1 = -A0
    tab = np.stack([np.broadcast_to(A0, (2, 2, 2)), np.broadcast_to(A0, (2, 2, 2)),
                    np.broadcast_to(A1, (2, 2, 2))])
    model = tabulated_symbol(s, [[-1.0], [1.0]], tab)
    with pytest.raises(DiagonalizationError, match="branch discontinuity"):
        diagonalizer_path(model, np.array([0.5, 1.0]), E1)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_families_residuals(name):
    p = build_problem(name)
    s = np.linspace(0, p.symbol.delta, 7)[:, None]
    om = np.array([[-1.0], [1.0]])[None]
    A = p.symbol(s, om)
    d = build_diagonalizer(A, characteristic_roots(p.symbol, s, om, with_derivative=False))
    r1, r2 = residuals(A, d)
    assert r1 < 1e-9 and r2 < 1e-10 and d.det_abs.min() >= 1e-6
