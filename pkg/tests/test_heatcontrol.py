import math

import numpy as np
import pytest

from landaulab.eigenbasis import build_basis, random_subspace_function
from landaulab.heatcontrol import (ControlError, ControlProblem, gramian, gramian_closed_form,
                                   heat_propagator, lebeau_robbiano, minimal_norm_control)
from landaulab.thickset import Bitmap, FullSpace, hole_radius, hole_set


@pytest.fixture(scope="module")
def basis(nf2):
    return build_basis(nf2, 3.0, 4)


@pytest.fixture(scope="module")
def holes():
    return hole_set(4.0, hole_radius(4.0, 0.9, 2), 2)[0]


def test_propagator(nf2):
    b = build_basis(nf2, 1.5, 0)
    np.testing.assert_array_equal(heat_propagator(b, 0.0), [1.0])
    assert heat_propagator(b, 1.0)[0] == pytest.approx(math.exp(-1))
    E = np.array([1.0, 3.0, 5.0])
    np.testing.assert_allclose(heat_propagator(E, 0.3) * heat_propagator(E, 0.7),
                               heat_propagator(E, 1.0), rtol=1e-15)
    with pytest.raises(ValueError):
        heat_propagator(E, -0.1)


def test_gramian_quadrature_matches_closed_form(basis, holes):
    p = ControlProblem(basis, holes, 1.0, random_subspace_function(basis, 0).coefficients)
    G = gramian(basis.energies, p.P, 1.0, 64)
    np.testing.assert_allclose(G, gramian_closed_form(basis.energies, p.P, 1.0), atol=1e-14)


def test_zero_initial_state(basis, holes):
    res = minimal_norm_control(ControlProblem(basis, holes, 1.0, np.zeros(basis.size)))
    assert res.cost == 0.0 and res.final_norm == 0.0
    assert np.all(res.control == 0)


@pytest.mark.parametrize("T", [0.5, 1.0, 2.0])
def test_full_space_cost_per_mode(basis, T):
    u0 = np.zeros(basis.size, dtype=complex)
    u0[0] = 1.0
    res = minimal_norm_control(ControlProblem(basis, FullSpace(2), T, u0))
    E = basis.energies[0]
    assert res.cost == pytest.approx(2 * E * math.exp(-2 * E * T) / -math.expm1(-2 * E * T),
                                     rel=1e-10)
    assert res.cost_quadrature == pytest.approx(res.cost, rel=1e-10)


def test_hole_set_null_control(basis, holes):
    u0 = random_subspace_function(basis, 3).coefficients
    res = minimal_norm_control(ControlProblem(basis, holes, 1.0, u0))
    assert res.final_norm <= 1e-8 * res.u0_norm
    assert res.final_norm_check <= 1e-8 * res.u0_norm
    assert res.cost <= res.cost_bound * (1 + 1e-12)
    assert res.to_dict()["cost_bound_label"] == "derived"


def test_cost_monotone_in_horizon_and_set(basis, holes):
    u0 = random_subspace_function(basis, 4).coefficients
    costs = [minimal_norm_control(ControlProblem(basis, holes, T, u0)).cost for T in (0.5, 1.0, 2.0)]
    assert costs[0] >= costs[1] >= costs[2]
    big = hole_set(4.0, 0.5, 2)[0]
    assert minimal_norm_control(ControlProblem(basis, big, 1.0, u0)).cost <= costs[1]


def test_singular_gramian_raises(basis):
    empty = Bitmap(2, ((-1.0, -1.0), (1.0, 1.0)), (4, 4), np.zeros((4, 4), dtype=bool), outside=False)
    with pytest.raises(ControlError, match="lambda_min"):
        minimal_norm_control(ControlProblem(basis, empty, 1.0, np.ones(basis.size)))


def test_problem_validation(basis, holes):
    with pytest.raises(ValueError):
        ControlProblem(basis, holes, 0.0, np.ones(basis.size))
    with pytest.raises(ValueError):
        ControlProblem(basis, holes, 1.0, np.ones(basis.size + 1))


def test_lebeau_robbiano_stages(basis, holes):
    p = ControlProblem(basis, holes, 1.0, random_subspace_function(basis, 5).coefficients)
    rep = lebeau_robbiano(p)
    assert len(rep["stages"]) == 4
    assert all(s["low_residual"] <= 1e-8 for s in rep["stages"])
    assert rep["final_norm"] <= 1e-8
