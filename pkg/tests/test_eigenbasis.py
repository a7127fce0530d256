import math
import warnings

import numpy as np
import pytest
from scipy.special import eval_genlaguerre, factorial

from landaulab.eigenbasis import (BasisError, SpectralFunction, block_mode_values,
                                  build_basis, ground_state, magnetic_translate,
                                  random_subspace_function, radial_density, translation_phase,
                                  verify_basis)
from landaulab.grid import GridRep
from landaulab.magderiv import apply_H
from landaulab.magfield import FieldMatrix, normal_form


def test_single_mode_basis_is_ground_state(nf2):
    b = build_basis(nf2, 1.5, 0)
    assert b.size == 1
    m = b.modes[0]
    assert (m.n, m.l, m.energy) == ((0,), (0,), 1.0)


def test_ground_state_closed_form(nf2, psi0):
    # |Psi_0|^2 is a probability density with variance 1 per axis when C = 1
    x = np.array([[0.0, 0.0], [1.0, -0.5], [2.0, 2.0]])
    want = np.sqrt(1 / (2 * np.pi)) * np.exp(-(x ** 2).sum(1) / 4)
    np.testing.assert_allclose(np.abs(psi0.evaluate(x)), want, atol=1e-14)
    assert psi0.norm_sq() == pytest.approx(1.0, abs=1e-12)


def test_two_level_basis_count(nf2):
    b = build_basis(nf2, 4.0, 2)
    assert b.size == 6
    assert sorted(set(m.n[0] for m in b.modes)) == [0, 1]
    np.testing.assert_allclose(sorted(b.energies), [1, 1, 1, 3, 3, 3])


def test_null_direction_energies():
    nf = normal_form(FieldMatrix.from_blocks([1.0], 1))
    b = build_basis(nf, 2.0, 0, [[0.0], [0.5], [-0.5]])
    np.testing.assert_allclose(sorted(b.energies), [1.0, 1.25, 1.25])
    assert np.all(b.leakage < 1e-2)


def test_four_dimensional_ground_state_energy():
    nf = normal_form(FieldMatrix.from_blocks([1.0, 1.0]))
    psi = ground_state(nf, n_nodes=16)
    g = psi.grid_rep()
    Hg = apply_H(g, nf.field)
    assert float(np.real(g.inner(Hg))) == pytest.approx(2.0, abs=1e-10)
    x = np.array([[0.3, -0.2, 0.5, 1.0]])
    one = np.sqrt(1 / (2 * np.pi)) * np.exp(-(x[:, :2] ** 2).sum(1) / 4)
    two = np.sqrt(1 / (2 * np.pi)) * np.exp(-(x[:, 2:] ** 2).sum(1) / 4)
    np.testing.assert_allclose(np.abs(psi.evaluate(x)), one * two, atol=1e-14)


@pytest.mark.parametrize("n, l", [(0, 0), (1, 0), (0, 3), (2, 1), (3, 4)])
@pytest.mark.parametrize("C", [1.0, 2.5])
def test_block_modes_match_laguerre_density(n, l, C):
    # oracle: |phi_{n,l}|^2 = C/(2pi) n!/l'! (s)^{|l-n|} L^{|l-n|}_{min}(s)^2 e^{-s}, s = C r^2/2
    r = np.linspace(0, 4, 9)
    th = 0.7
    v = block_mode_values(n, l, C, r * np.cos(th), r * np.sin(th))
    s = C * r * r / 2
    a, b = min(n, l), abs(n - l)
    want = C / (2 * np.pi) * factorial(a) / factorial(a + b) * s ** b \
        * eval_genlaguerre(a, b, s) ** 2 * np.exp(-s)
    np.testing.assert_allclose(np.abs(v) ** 2, want, atol=1e-14)
    np.testing.assert_allclose(radial_density(n, l, C, r), want, atol=1e-14)


def test_basis_orthonormal_and_eigen(basis2):
    verify_basis(basis2)
    assert basis2.orth_error <= 1e-8
    assert np.max(basis2.residuals) <= 1e-6


def test_rotated_field_basis_pullback():
    B = FieldMatrix.random(4, np.random.default_rng(1))
    nf = normal_form(B)
    b = build_basis(nf, max(nf.frequencies) * 1.1 + min(nf.frequencies), 1, n_nodes=24)
    x = np.random.default_rng(2).standard_normal((20, 4))
    np.testing.assert_allclose(b.evaluate(x), b.evaluate_y(x @ nf.conjugator), atol=1e-10)
    g = b.grid_values()
    assert np.abs(g.gram() - np.eye(b.size)).max() <= 1e-8


def test_coarse_grid_raises_basis_error(nf2):
    with pytest.raises(BasisError, match="mode"):
        build_basis(nf2, 9.0, 8, n_nodes=10)


def test_random_function_determinism(nf2, basis2):
    a = random_subspace_function(basis2, 5)
    b = random_subspace_function(basis2, 5)
    c = random_subspace_function(basis2, 6)
    assert np.array_equal(a.coefficients, b.coefficients)
    assert not np.allclose(a.coefficients, c.coefficients)
    single = random_subspace_function(build_basis(nf2, 1.5, 0), 3)
    assert abs(single.coefficients[0]) == pytest.approx(1.0)
    assert a.norm_sq() == pytest.approx(1.0)


def test_spectral_function_round_trip(basis2):
    f = magnetic_translate(random_subspace_function(basis2, 1), [0.3, -0.2])
    g = SpectralFunction.from_dict(basis2, f.to_dict())
    np.testing.assert_array_equal(g.coefficients, f.coefficients)
    np.testing.assert_array_equal(g.shift, f.shift)
    assert g.phase == f.phase


def test_translate_by_zero_is_identity(psi0):
    f = magnetic_translate(psi0, [0.0, 0.0])
    np.testing.assert_allclose(f.grid_rep().values, psi0.grid_rep().values, atol=0)


def test_translate_commutes_with_landau_operator(nf2, psi0):
    f = magnetic_translate(psi0, [1.2, -0.7])
    g = f.grid_rep()
    r = apply_H(g, nf2.field).values - g.values
    assert np.sqrt(np.sum(g.with_values(r).norm_sq())) <= 1e-8


def test_translate_composes_projectively(nf2, basis2):
    B = nf2.field
    f = random_subspace_function(basis2, 2).grid_rep()
    y, y2 = np.array([0.4, -0.3]), np.array([-0.5, 0.8])
    two = magnetic_translate(magnetic_translate(f, y2, B), y, B)
    one = magnetic_translate(f, y + y2, B)
    theta = translation_phase(B, y, y2)
    diff = two.values - np.exp(1j * theta) * one.values
    assert np.sqrt(np.sum(f.with_values(diff).norm_sq())) <= 1e-8
    # the opposite sign would fail by a visible margin
    wrong = two.values - np.exp(-1j * theta) * one.values
    assert np.sqrt(np.sum(f.with_values(wrong).norm_sq())) > 1e-2


def test_exact_translate_matches_interpolated(nf2, basis2):
    f = random_subspace_function(basis2, 3)
    y = np.array([0.6, 0.25])
    exact = magnetic_translate(f, y).grid_rep()
    interp = magnetic_translate(f.grid_rep(), y, nf2.field)
    assert np.abs(exact.values - interp.values).max() <= 1e-9


def test_translate_warns_on_mass_loss(psi0):
    with pytest.warns(RuntimeWarning, match="mass loss"):
        magnetic_translate(psi0.grid_rep(), [40.0, 0.0], psi0.field)
