import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from skewbc.core import DegenerateRotation, StateField
from skewbc.equations import (
    CeeModel,
    IeeModel,
    SweModel,
    cee_char_split,
    count_required_bcs,
    iee_char_split,
    psi,
    psi_switch_mach2,
    swe_boundary_forms,
)

from helpers import ALL_FORMULATIONS, make_model, random_state


def test_model_structure():
    iee, swe, cee = IeeModel(), SweModel(), CeeModel(1.4)
    np.testing.assert_array_equal(iee.P, np.diag([1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(swe.P, np.eye(3))
    np.testing.assert_allclose(cee.P, np.diag([1.0, 0.2, 0.2, 1.0]))
    assert swe.alpha == swe.beta == 0.2
    assert (iee.split_factor, swe.split_factor, cee.split_factor) == (0.5, 1.0, 0.5)


@pytest.mark.parametrize("gamma", [1.0, 2.0, 2.5, 0.5])
def test_gamma_range(gamma):
    with pytest.raises(ValueError):
        CeeModel(gamma)


def test_iee_split_anchor_and_counts():
    s = iee_char_split(np.array([2.0, 3.0, 4.0]), (1.0, 0.0))
    assert s.quadratic_form() == pytest.approx(42.0)
    assert s.n_minus == 1 and list(s.minus) == [2]
    s = iee_char_split(np.array([-2.0, 3.0, 4.0]), (1.0, 0.0))
    assert (s.n_minus, s.n_plus) == (2, 1)
    with pytest.raises(DegenerateRotation):
        iee_char_split(np.array([0.0, 3.0, 4.0]), (1.0, 0.0))


def test_iee_sqrt_p_formulation_counts():
    s = iee_char_split(np.array([-1.0, 0.5, 4.0]), (1.0, 0.0), "sqrt_p")
    np.testing.assert_allclose(s.W, [-1.0, 0.5, 2.0])
    assert s.n_minus == 3


def test_swe_forms_anchor():
    forms = swe_boundary_forms(np.array([4.0, -2.0, 1.0]), (1.0, 0.0))
    assert forms["u_form"].quadratic_form() == pytest.approx(-18.5)
    assert forms["w_form"].quadratic_form() == pytest.approx(-18.5)
    assert forms["u_form"].n_minus == 3 and forms["w_form"].n_minus == 2
    out = swe_boundary_forms(np.array([4.0, 2.0, 1.0]), (1.0, 0.0))
    assert out["u_form"].n_minus == 0
    glancing = swe_boundary_forms(np.array([4.0, 0.0, 1.0]), (1.0, 0.0))
    assert glancing["w_form"] is None


def test_cee_counts():
    m = CeeModel(1.4)
    sub_in = m.from_primitive([1.0, -0.3, 0.1, 1.0])
    s = cee_char_split(sub_in, (1.0, 0.0), model=m)
    assert (s.n_minus, s.n_plus) == (3, 1) and list(s.plus) == [3]
    sup_in = m.from_primitive([1.0, -3.0, 0.1, 1.0])
    assert count_required_bcs(m, sup_in, (1.0, 0.0), "diagonal") == 4
    out = m.from_primitive([1.0, 0.3, 0.1, 1.0])
    assert count_required_bcs(m, out, (1.0, 0.0), "contracted") == 0
    assert count_required_bcs(SweModel(), np.array([4.0, -2.0, 1.0]), (1.0, 0.0), "w_form") == 2


@pytest.mark.parametrize("gamma,expected", [(np.sqrt(2.0), 1.0), (1.4, 0.8 / 0.84)])
def test_psi_switch(gamma, expected):
    assert psi_switch_mach2(gamma) == pytest.approx(expected, abs=1e-14)
    root = brentq(lambda m2: psi(m2, gamma), 0.1, 10.0, xtol=1e-16, rtol=8.9e-16)
    assert abs(root - expected) <= 1e-14


@pytest.mark.parametrize("gamma", [1.2, 1.4, 1.7])
def test_fourth_eigenvalue_sign_follows_switch(gamma):
    # lambda_4 from the split must agree with the flux identity on both sides of the switch
    m = CeeModel(gamma)
    s = psi_switch_mach2(gamma)
    for m2, sign in ((0.9 * s, -1.0), (1.1 * s, 1.0)):
        un = np.sqrt(m2 * gamma)  # rho = p = 1, so c^2 = gamma
        U = m.from_primitive([1.0, un, 0.0, 1.0])
        split = m.split(U, (1.0, 0.0), "diagonal")
        assert np.sign(split.lam[3]) == sign
        M = m.normal_flux_matrix(U, (1.0, 0.0))
        assert split.quadratic_form() == pytest.approx(U @ M @ U, rel=1e-13)


@pytest.mark.parametrize("gamma", [1.1, 1.4, np.sqrt(2.0), 1.9])
def test_psi_sign_sweep(gamma):
    s = psi_switch_mach2(gamma)
    m2 = np.linspace(1e-3, 5 * s, 1000)
    m2 = m2[np.abs(m2 - s) > 1e-9]
    vals = psi(m2, gamma)
    assert np.all(vals[m2 < s] < 0) and np.all(vals[m2 > s] > 0)


@pytest.mark.parametrize("name", ["iee", "swe", "cee"])
def test_all_formulations_match_flux(name):
    rng = np.random.default_rng(21)
    m = make_model(name)
    for _ in range(1000):
        U, n = random_state(m, rng)
        M = m.normal_flux_matrix(U, n)
        ref = U @ (0.5 * (M + M.T)) @ U
        for f in ALL_FORMULATIONS[name]:
            q = m.split(U, n, f).quadratic_form()
            assert abs(q - ref) <= 1e-12 * (1 + abs(q))


@pytest.mark.parametrize("name", ["iee", "swe", "cee"])
def test_rotation_is_linear_map_of_state(name):
    # W = T^{-1}(U) U for every formulation
    rng = np.random.default_rng(2)
    m = make_model(name)
    for _ in range(100):
        U, n = random_state(m, rng)
        for f in ALL_FORMULATIONS[name]:
            s = m.split(U, n, f)
            np.testing.assert_allclose(s.T_inv @ U, s.W, rtol=1e-12, atol=1e-12)


def test_swe_coriolis_beta_plane():
    m = SweModel(f0=1.0, f_beta=2.0)
    _, _, C = m.coefficients(np.ones((3, 2)), position=np.array([[0.0, 0.0], [0.0, 0.5]]))
    np.testing.assert_allclose(C[2, 1], [1.0, 2.0])
    np.testing.assert_allclose(C + C.transpose(1, 0, 2), 0.0)


@settings(max_examples=50, deadline=None)
@given(rho=st.floats(0.1, 5), u=st.floats(-3, 3), v=st.floats(-3, 3), p=st.floats(0.1, 5))
def test_cee_primitive_round_trip(rho, u, v, p):
    m = CeeModel()
    np.testing.assert_allclose(m.to_primitive(m.from_primitive([rho, u, v, p])), [rho, u, v, p], rtol=1e-12,
                               atol=1e-12)


def test_swe_primitive_round_trip():
    m = SweModel()
    np.testing.assert_allclose(m.to_primitive(m.from_primitive([2.0, -0.5, 0.25])), [2.0, -0.5, 0.25])


def test_admissibility_locations():
    m = CeeModel()
    U = np.ones((4, 5))
    U[3, 2] = 0.0
    with pytest.raises(Exception) as err:
        m.check_admissible(U)
    assert "sqrt(p)" in str(err.value) and "node 2" in str(err.value)
