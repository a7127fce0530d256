import math

import numpy as np
import pytest
from scipy import integrate

from landaulab.eigenbasis import build_basis, ground_state, random_subspace_function
from landaulab.grid import GridRep, ResolutionError, TensorGrid
from landaulab.magderiv import (analyticity_growth, apply_H, apply_magnetic_derivative,
                                apply_R_power, bernstein_bound, bernstein_lhs,
                                bernstein_lhs_by_parts, bernstein_prime_bound, bernstein_report,
                                classical_derivative_l1, classical_derivative_report,
                                commutator_residual, est2_check, product_form_bound,
                                verify_recursion)
from landaulab.magfield import FieldMatrix, normal_form

PLANAR = FieldMatrix.from_blocks([1.0])


def test_free_derivative_of_gaussian():
    grid = TensorGrid((32, 32), (1.0, 1.0))
    x, y = grid.coordinate(0), grid.coordinate(1)
    f = GridRep(grid, np.exp(-(x ** 2 + y ** 2) / 2))
    g = apply_magnetic_derivative(f, 0, np.zeros((2, 2)))
    np.testing.assert_allclose(g.values, 1j * (-x) * f.values, atol=1e-13)


def test_magnetic_derivative_adds_potential():
    grid = TensorGrid((32, 32), (1.0, 1.0))
    x, y = grid.coordinate(0), grid.coordinate(1)
    f = GridRep(grid, np.exp(-(x ** 2 + y ** 2) / 2) + 0 * x)
    # A = -Bx/2 with B_01 = 1 gives A_0 = -y/2
    g = apply_magnetic_derivative(f, 0, PLANAR)
    np.testing.assert_allclose(g.values, (-1j * x - 0.5 * y) * f.values, atol=1e-13)


def test_under_resolved_input_raises():
    grid = TensorGrid((12, 12), (1.0, 1.0))
    x, y = grid.coordinate(0), grid.coordinate(1)
    f = GridRep(grid, np.exp(-4 * (x ** 2 + y ** 2)) * np.cos(5 * x))
    with pytest.raises(ResolutionError):
        apply_magnetic_derivative(f, 0, PLANAR)


def test_ground_state_and_first_level_eigenvalues(nf2, basis2):
    psi = ground_state(nf2).grid_rep()
    r = apply_H(psi, PLANAR).values - psi.values
    assert np.sqrt(np.sum(psi.with_values(r).norm_sq())) <= 1e-6
    g = basis2.grid_values()
    for i, m in enumerate(basis2.modes):
        if m.n == (1,):
            gi = g.with_values(g.values[i])
            r = apply_H(gi, PLANAR).values - 3.0 * gi.values
            assert np.sqrt(np.sum(gi.with_values(r).norm_sq())) <= 1e-6


def test_free_window_mode_energy():
    nf = normal_form(FieldMatrix.from_blocks([1.0], 1))
    b = build_basis(nf, 2.0, 0, [[0.5]])
    g = b.grid_values()
    f = g.with_values(g.values[0])
    e = float(np.real(np.sum(f.inner(apply_H(f, nf.field)))))
    # window exp(-t^2/(2 sigma^2)) adds kinetic energy 1/(2 sigma^2)
    assert e == pytest.approx(1.0 + 0.25 + 1 / (2 * b.sigma_null ** 2), rel=1e-6)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_commutator_identity(d):
    rng = np.random.default_rng(d)
    B = FieldMatrix.random(d, rng)
    grid = TensorGrid((24,) * d if d < 4 else (18,) * 4, (1.0,) * d)
    coords = [grid.coordinate(k) for k in range(d)]
    for trial in range(3):
        c = rng.standard_normal(d) * 0.5
        f = GridRep(grid, np.exp(-sum(x ** 2 for x in coords) / 2
                                 + 1j * sum(ck * x for ck, x in zip(c, coords))) * (1 + coords[0]))
        for k in range(d):
            for l in range(d):
                assert commutator_residual(f, B, k, l) <= 1e-7


@pytest.mark.parametrize("d, E, B, m, want", [
    (2, 1.0, [[0, 1], [-1, 0]], 1, 2.0),
    (2, 1.0, [[0, 1], [-1, 0]], 0, 1.0),
    (3, 2.0, [[0, 2, 0], [-2, 0, 0], [0, 0, 0]], 2, 81.0),
])
def test_bernstein_bound_examples(d, E, B, m, want):
    assert bernstein_bound(d, E, B, m) == pytest.approx(want)


@pytest.mark.parametrize("m, want", [(1, 2 * math.sqrt(2)), (0, 1.0), (2, 12.0)])
def test_bernstein_prime_bound_examples(m, want):
    assert bernstein_prime_bound(2, 1.0, [[0, 1], [-1, 0]], m) == pytest.approx(want)


def test_bernstein_lhs_ground_state(psi0):
    assert float(bernstein_lhs(psi0, 0)) == pytest.approx(1.0, abs=1e-12)
    assert float(bernstein_lhs(psi0, 1)) == pytest.approx(1.0, abs=1e-10)
    # sum_{k,l} |D_k D_l Psi_0|^2 = <Psi_0, R^2(Id) Psi_0>, computed two ways
    a = float(bernstein_lhs(psi0, 2))
    b = float(bernstein_lhs_by_parts(psi0, 2))
    assert a == pytest.approx(b, rel=1e-6)
    assert a == pytest.approx(3.0, rel=1e-8)


def test_by_parts_symmetry_random(basis2):
    f = random_subspace_function(basis2, 11)
    for m in range(4):
        a = float(bernstein_lhs(f, m))
        b = float(bernstein_lhs_by_parts(f, m))
        assert a == pytest.approx(b, rel=1e-6)


def test_batched_lhs_matches_single(basis2):
    fs = [random_subspace_function(basis2, s).grid_rep() for s in range(3)]
    batch = fs[0].with_values(np.stack([f.values for f in fs]))
    np.testing.assert_allclose(bernstein_lhs(batch, 3, PLANAR),
                               [float(bernstein_lhs(f, 3, PLANAR)) for f in fs], rtol=1e-12)


def test_R_power_of_identity_is_landau_operator(basis2):
    f = random_subspace_function(basis2, 2).grid_rep()
    np.testing.assert_allclose(apply_R_power(f, 1, PLANAR).values, apply_H(f, PLANAR).values,
                               atol=1e-10)


@pytest.mark.parametrize("n", [0, 1])
def test_bernstein_on_pure_levels(basis2, n):
    g = basis2.grid_values()
    for i, mode in enumerate(basis2.modes):
        if mode.n == (n,):
            f = g.with_values(g.values[i])
            for m in range(5):
                assert bernstein_report(f, m, basis2.E, PLANAR).passed


def test_product_form_bound_holds(basis2):
    f = random_subspace_function(basis2, 4)
    for m in range(1, 4):
        assert float(bernstein_lhs(f, m)) <= product_form_bound(f, m) * (1 + 1e-6)


def test_recursion_on_ground_state(psi0):
    rep = verify_recursion(psi0, 3, E=1.0)
    assert rep["passed"]
    assert rep["q_X0_matches_H"] and rep["q_Y0_matches"]
    # q_X(1) = sum_k <D_k Psi_0, H D_k Psi_0>, by hand: D_k Psi_0 lies in level 1 up to a
    # level-0 part; the grid value is compared with a direct evaluation
    g = psi0.grid_rep()
    direct = sum(float(np.real(np.sum(apply_magnetic_derivative(g, k, PLANAR).inner(
        apply_H(apply_magnetic_derivative(g, k, PLANAR), PLANAR))))) for k in range(2))
    assert rep["rows"][1].q_X == pytest.approx(direct, rel=1e-10)
    assert 2 * rep["rows"][1].q_X <= rep["rows"][1].rhs_X


def test_recursion_random_functions(basis2):
    for s in range(3):
        rep = verify_recursion(random_subspace_function(basis2, s), 4, E=basis2.E)
        assert rep["passed"] and rep["energy_in_range"]


def test_classical_l1_order_zero_is_mass(basis2):
    f = random_subspace_function(basis2, 1)
    assert classical_derivative_l1(f, 0) == pytest.approx(1.0, rel=1e-6)


def test_classical_l1_first_order_ground_state(psi0):
    # |Psi_0|^2 = exp(-|x|^2/2)/(2 pi); oracle by one-dimensional quadrature
    one, _ = integrate.quad(lambda t: abs(t) * math.exp(-t * t / 2) / math.sqrt(2 * math.pi),
                            -np.inf, np.inf)
    assert classical_derivative_l1(psi0, 1) == pytest.approx(2 * one, rel=1e-3)
    assert 2 * one == pytest.approx(4 / math.sqrt(2 * math.pi), rel=1e-12)


def test_est1_and_est2(basis2):
    f = random_subspace_function(basis2, 7)
    rows, _ = classical_derivative_report(f, 3, basis2.E, PLANAR)
    assert all(r.passed for r in rows)
    assert est2_check(f, 4, basis2.E, PLANAR)["passed"]


def test_analyticity_growth_bounded(psi0):
    g = analyticity_growth(psi0, 6)
    assert len(g) == 6
    assert max(g) <= 10 * g[0]
