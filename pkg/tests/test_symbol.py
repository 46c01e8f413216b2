import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klab.errors import GapError, HyperbolicityError
from klab.families import FAMILIES, build_problem
from klab.grid import build_grid
from klab.symbol import (
    HermitianWeight,
    characteristic_roots,
    charpoly_coefficients,
    companion_symbol,
    coupled_roots_closed_form,
    coupled_symbol,
    hyperbolicity_gap,
    quadratic_form,
    tabulated_symbol,
)

E1 = np.array([1.0])


def kirchhoff_first_order(delta=4.0):
    return companion_symbol([lambda s, w: 0.0, lambda s, w: -(1 + np.asarray(s))], delta=delta)


def test_companion_scalar_kirchhoff_roots():
    model = kirchhoff_first_order()
    rs = characteristic_roots(model, 0.44, E1)
    assert np.allclose(rs.roots, [-1.2, 1.2], atol=1e-13)
    rs = characteristic_roots(model, 3.0, E1)
    assert np.allclose(rs.roots, [-2.0, 2.0], atol=1e-13)


def test_companion_char_polynomial_matches_coefficients():
    H = [lambda s, w: 0.3, lambda s, w: -2.0 - s, lambda s, w: 0.1, lambda s, w: 0.5]
    model = companion_symbol(H, delta=1.0)
    alpha = charpoly_coefficients(model(0.25, E1))
    assert np.allclose(alpha, [1.0, 0.3, -2.25, 0.1, 0.5], atol=1e-13)


def test_fourth_power_plus_one_is_not_hyperbolic():
    zero = lambda s, w: 0.0
    model = companion_symbol([zero, zero, zero, lambda s, w: 1.0], delta=1.0)
    with pytest.raises(HyperbolicityError):
        hyperbolicity_gap(model, [0.0, 0.5], build_grid(1, 1.0, 8))


def test_wave_roots_and_gap():
    p = build_problem("wave", c=3.0)
    rs = characteristic_roots(p.symbol, 0.0, E1)
    assert np.allclose(rs.roots, [-3, 3]) and abs(rs.gap - 6) < 1e-12
    assert hyperbolicity_gap(build_problem("wave").symbol, [0.0], build_grid(1, 1.0, 8)) == pytest.approx(2.0)


def test_kirchhoff_root_derivative_at_zero():
    rs = characteristic_roots(kirchhoff_first_order(), 0.0, E1)
    assert np.allclose(rs.ds_roots, [-0.5, 0.5], atol=1e-6)


def test_coupled_decoupled_roots():
    zero = quadratic_form(np.zeros((1, 1)))
    model = coupled_symbol(1.0, 4.0, zero, zero, delta=0.5)
    rs = characteristic_roots(model, 0.0, E1)
    assert np.allclose(rs.roots, [-2, -1, 1, 2], atol=1e-12)
    assert abs(rs.gap - 1.0) < 1e-12


def test_coupled_closed_form_against_eigenvalues():
    P = quadratic_form(0.1 * np.eye(1))
    model = coupled_symbol(1.0, 2.0, P, P)
    rs = characteristic_roots(model, 0.0, E1)
    assert np.allclose(rs.roots, coupled_roots_closed_form(1.0, 2.0, 0.1, 0.1, 0.0), atol=1e-12)


def test_coupled_equal_speeds_rejected():
    P = quadratic_form(np.zeros((1, 1)))
    with pytest.raises(ValueError):
        coupled_symbol(1.0, 1.0, P, P)


def test_coupled_condition_violation_reports_omega():
    P1 = quadratic_form(np.diag([3.0, 0.0]))
    P2 = quadratic_form(np.diag([3.0, 0.0]))
    with pytest.raises(ValueError, match="omega"):
        coupled_symbol(1.0, 2.0, P1, P2)


def test_hyperbolicity_gap_decoupled_over_s():
    zero = quadratic_form(np.zeros((1, 1)))
    model = coupled_symbol(1.0, 4.0, zero, zero, delta=0.5)
    s = np.linspace(0, 0.5, 11)
    gap = hyperbolicity_gap(model, s, build_grid(1, 1.0, 8))
    ref = min(np.min(coupled_roots_closed_form(1.0, 4.0, 0, 0, s)[..., 2]
                     - coupled_roots_closed_form(1.0, 4.0, 0, 0, s)[..., 1]),
              np.min(np.diff(coupled_roots_closed_form(1.0, 4.0, 0, 0, s), axis=-1)))
    assert abs(gap - ref) < 1e-12


def test_repeated_roots_give_zero_gap_and_raise_in_roots():
    # two identical uncoupled wave blocks (a1 = a2, P1 P2 = 0), bypassing the constructor check
    block = np.array([[0.0, 1.0], [1.0, 0.0]])
    A = np.zeros((4, 4))
    A[:2, :2] = block
    A[2:, 2:] = block
    tab = np.broadcast_to(A, (2, 2, 4, 4))
    model = tabulated_symbol([0.0, 1.0], [[-1.0], [1.0]], tab)
    assert hyperbolicity_gap(model, [0.0, 0.5], build_grid(1, 1.0, 8)) < 1e-12
    with pytest.raises(GapError):
        characteristic_roots(model, 0.0, E1)


def test_s_outside_range_rejected():
    with pytest.raises(ValueError):
        characteristic_roots(kirchhoff_first_order(1.0), 2.0, E1)


def test_homogeneity_renormalizes_omega():
    p = build_problem("coupled", dim=2)
    A1 = p.symbol(0.1, np.array([0.6, 0.8]))
    A2 = p.symbol(0.1, np.array([3.0, 4.0]))
    assert np.array_equal(A1, A2)


def test_hermitian_weight_checks():
    with pytest.raises(ValueError):
        HermitianWeight(np.array([[1.0, 1.0], [0.0, 1.0]]))
    w = HermitianWeight(np.eye(2), radial_exponent=1)
    with pytest.raises(ValueError):
        w.validate(1)
    w.validate(2)


def test_tabulated_symbol_interpolates_linearly():
    s = np.array([0.0, 1.0])
    om = np.array([[-1.0], [1.0]])
    tab = np.zeros((2, 2, 2, 2), dtype=complex)
    tab[:, :, 0, 1] = 1.0
    tab[0, :, 1, 0] = 1.0
    tab[1, :, 1, 0] = 3.0
    model = tabulated_symbol(s, om, tab)
    A = model(0.5, E1)
    assert A[1, 0] == 2.0
    rs = characteristic_roots(model, 0.5, E1)
    assert np.allclose(rs.roots, [-np.sqrt(2), np.sqrt(2)])
    assert model.lip_bound == pytest.approx(2.0)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_builtin_families_are_hyperbolic(name):
    p = build_problem(name)
    assert hyperbolicity_gap(p.symbol, np.linspace(0, p.symbol.delta, 9), build_grid(1, 1.0, 8)) > 0


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_root_residuals_and_bound(name):
    p = build_problem(name)
    s = np.linspace(0, p.symbol.delta, 5)[:, None]
    om = np.array([[-1.0], [1.0]])[None]
    A = p.symbol(s, om)
    rs = characteristic_roots(p.symbol, s, om)
    m = p.m
    det = np.abs(np.linalg.det(rs.roots[..., :, None, None] * np.eye(m) - A[..., None, :, :]))
    norm = np.linalg.norm(A, 2, axis=(-2, -1))[..., None]
    assert np.max(det / norm**m) < 1e-8
    coeffs = np.abs(charpoly_coefficients(A)[..., 1:]).max(axis=-1)
    M = np.maximum(coeffs, 1.0)
    assert np.all(np.abs(rs.roots) <= 2 * M[..., None])


@pytest.mark.parametrize("name", ["kirchhoff", "coupled", "fourth_order", "spagnolo"])
def test_root_derivative_formula_matches_differences(name):
    p = build_problem(name)
    s = np.linspace(0.05, 0.95, 7) * p.symbol.delta
    rs = characteristic_roots(p.symbol, s[:, None], E1[None])
    h = 1e-4
    up = characteristic_roots(p.symbol, s[:, None] + h, E1[None], with_derivative=False).roots
    dn = characteristic_roots(p.symbol, s[:, None] - h, E1[None], with_derivative=False).roots
    fd = (up - dn) / (2 * h)
    tol = np.maximum(1e-6, 1e-4 * np.abs(rs.roots))
    assert np.all(np.abs(rs.ds_roots - fd) < tol)


def test_root_ordering_stable_along_path():
    p = build_problem("coupled")
    gap = hyperbolicity_gap(p.symbol, np.linspace(0, 1, 21), build_grid(1, 1.0, 8))
    ds = gap / (4 * p.symbol.lip_bound) * 0.99
    s = np.arange(0, p.symbol.delta, ds)
    r = characteristic_roots(p.symbol, s[:, None], E1[None], with_derivative=False).roots
    assert np.max(np.abs(np.diff(r, axis=0))) < gap / 2


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.0, 1.0))
def test_kirchhoff_roots_property(a0, s):
    p = build_problem("kirchhoff", a0=a0, a1=1.0)
    rs = characteristic_roots(p.symbol, s, E1)
    c = np.sqrt(a0 + s)
    assert np.allclose(rs.roots, [-c, c], rtol=1e-12)
    assert np.allclose(rs.ds_roots, [-0.5 / c, 0.5 / c], atol=1e-6)
