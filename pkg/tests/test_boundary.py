import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewbc.boundary import (
    BoundaryCondition,
    InadmissibleBoundaryCondition,
    SingularSTilde,
    background_condition,
    boundary_energy_flux,
    boundary_flux_from_split,
    boundary_operator_data,
    check_R_condition,
    check_S_smallness,
    glancing_split,
    penalty_from_split,
    penalty_vector,
    rotate_boundary_state,
    sign_split,
)
from skewbc.core import DegenerateRotation, DimensionError
from skewbc.equations import CeeModel, IeeModel, SweModel

from helpers import ALL_FORMULATIONS, make_model, random_state


def test_iee_rotation_anchor():
    s = rotate_boundary_state(np.array([2.0, 3.0, 4.0]), (1.0, 0.0), IeeModel(), "standard")
    np.testing.assert_allclose(s.W, [4.0, 3.0, 2.0], rtol=1e-15)
    np.testing.assert_allclose(s.lam, [2.0, 2.0, -2.0], rtol=1e-15)
    assert s.quadratic_form() == pytest.approx(42.0, rel=1e-14)
    assert list(s.minus) == [2]


def test_swe_w_form_anchor():
    s = rotate_boundary_state(np.array([4.0, -2.0, 1.0]), (1.0, 0.0), SweModel(), "w_form")
    np.testing.assert_allclose(s.W, [16.0, 20.0, -2.0], rtol=1e-15)
    np.testing.assert_allclose(s.lam, [0.125, -0.125, -0.125], rtol=1e-15)
    assert s.quadratic_form() == pytest.approx(-18.5, rel=1e-14)


def test_cee_fourth_eigenvalue_anchor():
    # M_n^2 = 1/1.4, Psi = 1 - 0.8 / (1.4 * 0.6 / 1.4) = -1/3, lambda_4 = 0.6 * (-1/3)
    s = rotate_boundary_state(np.ones(4), (1.0, 0.0), CeeModel(1.4), "diagonal")
    assert s.lam[3] == pytest.approx(-0.2, rel=1e-14)
    np.testing.assert_allclose(s.W, [1.0, 3.0, 1.0, 1.0], rtol=1e-15)


def test_auto_formulation_and_degenerate_rotation():
    s = rotate_boundary_state(np.array([4.0, -2.0, 1.0]), (1.0, 0.0), SweModel())
    assert s.formulation_id == "w_form"
    with pytest.raises(DegenerateRotation):
        rotate_boundary_state(np.array([0.0, 1.0, 1.0]), (1.0, 0.0), IeeModel(), "standard")
    with pytest.raises(DegenerateRotation):
        rotate_boundary_state(np.array([1.0, 0.0, 1.0]), (1.0, 0.0), SweModel(), "w_form")


def test_sign_split_ties_go_to_plus():
    plus, minus = sign_split(np.array([0.0, -1.0, 1e-16, 2.0]))
    assert list(plus) == [0, 2, 3]
    assert list(minus) == [1]


def test_glancing_split_imposes_nothing():
    s = glancing_split(3, "standard")
    assert s.n_minus == 0 and s.glancing
    bc = BoundaryCondition()
    assert np.all(penalty_from_split(s, bc) == 0)


def _iee_inflow():
    return rotate_boundary_state(np.array([-2.0, 1.0, 4.0]), (1.0, 0.0), IeeModel(), "standard")


def test_r_condition_iee_dirichlet_marginal():
    s = _iee_inflow()
    R = IeeModel().dirichlet_R(s)
    np.testing.assert_array_equal(R, [[1.0], [0.0]])
    loose = check_R_condition(s, R)
    strict = check_R_condition(s, R, strict=True)
    assert loose.margin == 0.0
    assert loose.passed and not strict.passed


def test_r_condition_zero_coupling_margin_is_min_positive():
    U, n = np.array([2.0, 1.0, 3.0]), (1.0, 0.0)
    s = rotate_boundary_state(U, n, SweModel(), "u_form")
    # pure outflow: nothing is coupled, the margin is the smallest outgoing speed
    assert check_R_condition(s, np.zeros((0, 3)), strict=True).margin == pytest.approx(0.5 / np.sqrt(2))
    m = CeeModel()
    inflow = rotate_boundary_state(m.from_primitive([1.0, -1.0, 0.0, 1.0]), (1.0, 0.0), m, "contracted")
    assert check_R_condition(inflow, np.zeros((4, 0)), strict=True).margin == np.inf
    s = _iee_inflow()
    r = check_R_condition(s, np.zeros((2, 1)), strict=True)
    assert r.passed and r.margin == pytest.approx(2.0)


def test_r_condition_cee_dirichlet_inadmissible():
    m = CeeModel(1.4)
    U = m.from_primitive([1.0, -0.5, 0.1, 1.0])
    s = rotate_boundary_state(U, (1.0, 0.0), m, "diagonal")
    assert list(s.minus) == [0, 1, 2]
    R = m.dirichlet_R(s)
    res = check_R_condition(s, R)
    assert res.margin < 0 and not res.passed


def test_r_condition_dimension_error():
    with pytest.raises(DimensionError):
        check_R_condition(_iee_inflow(), np.zeros((1, 1)))


def _iee_outflow():
    return rotate_boundary_state(np.array([2.0, 1.0, 4.0]), (1.0, 0.0), IeeModel(), "standard")


def test_s_smallness_examples():
    s = _iee_outflow()
    R = np.zeros((1, 2))
    assert check_S_smallness(s, R, np.eye(1)).passed
    bad = check_S_smallness(s, R, 1.2 * np.eye(1))
    assert not bad.passed and bad.margin == pytest.approx(1 - 1.44)
    assert check_S_smallness(s, R, np.zeros((1, 1))).passed


def test_s_smallness_errors():
    s = _iee_outflow()
    with pytest.raises(SingularSTilde):
        check_S_smallness(s, np.zeros((1, 2)), np.zeros((1, 1)), inhomogeneous=True)
    s = _iee_inflow()
    with pytest.raises(InadmissibleBoundaryCondition):
        check_S_smallness(s, np.array([[1.0], [0.0]]), 0.5 * np.eye(2))


def test_penalty_iee_dirichlet_hand_value():
    # n = (-1, 0): u_n = -2, u_tau = -3, W^- = (-4, -3), R W^+ = (-2, 0), Sigma = diag(2, 2)
    m = IeeModel()
    bc = BoundaryCondition(R=m.dirichlet_R)
    p = penalty_vector(np.array([2.0, 3.0, 4.0]), (-1.0, 0.0), m, bc)
    np.testing.assert_allclose(p, [8.0, 12.0, 4.0], rtol=1e-14)


def test_penalty_zero_for_contracted_outflow():
    m = CeeModel(1.4)
    U = m.from_primitive([1.0, 0.5, 0.2, 1.0])
    bc = BoundaryCondition(G=lambda p, t, s: np.ones(s.n_minus))
    p = penalty_vector(U, (1.0, 0.0), m, bc, formulation_id="contracted")
    assert np.all(p == 0.0)


def test_penalty_requires_weak_mode():
    with pytest.raises(ValueError):
        penalty_vector(np.ones(3), (1.0, 0.0), SweModel(), BoundaryCondition(mode="strong"))


def _compliant(split, rng):
    R = rng.standard_normal((split.n_minus, split.n_plus))
    S_t = 0.5 * np.eye(split.n_minus)
    G0 = np.linalg.solve(S_t, np.sqrt(split.abs_lam_minus) * (split.W_minus - R @ split.W_plus))
    return BoundaryCondition(R=R, S_tilde=S_t, G=lambda p, t, s: G0)


@pytest.mark.parametrize("name", ["iee", "swe", "cee"])
def test_compliant_state_penalty_and_operator_vanish(name):
    rng = np.random.default_rng(5)
    m = make_model(name)
    checked = 0
    for _ in range(100):
        U, n = random_state(m, rng)
        split = rotate_boundary_state(U, n, m)
        if split.n_minus == 0:
            continue
        bc = _compliant(split, rng)
        pen = penalty_from_split(split, bc)
        assert np.max(np.abs(pen)) <= 1e-12 * (1 + np.max(np.abs(split.W))) * np.max(np.abs(split.lam))
        op = boundary_operator_data(split, bc)
        res = op.L @ U - op.g
        assert np.max(np.abs(res)) <= 1e-12 * (1 + np.max(np.abs(op.g)))
        checked += 1
    assert checked > 20


def test_operator_iee_outflow_structure():
    s = _iee_outflow()
    op = boundary_operator_data(s, BoundaryCondition(S_tilde=1.0))
    np.testing.assert_allclose(op.L, [[0.0, 0.0, np.sqrt(2.0) / 2.0]], rtol=1e-15)


def test_operator_empty_minus():
    m = CeeModel()
    s = rotate_boundary_state(m.from_primitive([1.0, 2.0, 0.0, 1.0]), (1.0, 0.0), m, "contracted")
    op = boundary_operator_data(s, BoundaryCondition())
    assert op.L.shape == (0, 4) and op.g.shape == (0,)


def _admissible_R(split, rng, strict=True):
    """Random R scaled into the (strict) admissible set."""
    R0 = rng.standard_normal((split.n_minus, split.n_plus))
    if split.n_plus == 0 or split.n_minus == 0:
        return R0
    lp = np.sqrt(split.lam_plus)
    M = (R0 / lp).T @ np.diag(split.abs_lam_minus) @ (R0 / lp)
    mu = np.max(np.linalg.eigvalsh(M))
    if mu <= 0:
        return R0
    cap = 0.95 if strict else 1.0
    return R0 * np.sqrt(cap * (rng.uniform(0.0, 1.0) if strict else 1.0) / mu)


@pytest.mark.parametrize("name", ["iee", "swe", "cee"])
def test_weak_homogeneous_flux_expansion(name):
    rng = np.random.default_rng(7)
    m = make_model(name)
    for _ in range(300):
        U, n = random_state(m, rng)
        split = rotate_boundary_state(U, n, m)
        R = _admissible_R(split, rng, strict=False)
        bc = BoundaryCondition(R=R)
        F = boundary_flux_from_split(split, bc, mode="weak")
        r = split.W_minus - R @ split.W_plus
        Wp = split.W_plus
        expansion = Wp @ (np.diag(split.lam_plus) - R.T @ np.diag(split.abs_lam_minus) @ R) @ Wp \
            + r @ (split.abs_lam_minus * r)
        assert abs(F - expansion) <= 1e-11 * (1 + abs(F) + abs(split.quadratic_form()))
        assert F >= -1e-11 * (1 + abs(split.quadratic_form()))


def test_compliant_flux_equals_reduced_form():
    rng = np.random.default_rng(8)
    m = SweModel()
    for _ in range(100):
        U, n = random_state(m, rng)
        split = rotate_boundary_state(U, n, m)
        if split.n_minus == 0:
            continue
        R = _admissible_R(split, rng)
        # state-independent check: strong homogeneous substitution
        F = boundary_flux_from_split(split, BoundaryCondition(R=R, mode="strong"))
        Wp = split.W_plus
        reduced = Wp @ (np.diag(split.lam_plus) - R.T @ np.diag(split.abs_lam_minus) @ R) @ Wp
        assert F == pytest.approx(reduced, rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(["iee", "swe", "cee"]),
       mode=st.sampled_from(["weak", "strong"]))
def test_inhomogeneous_flux_bounded_by_data(seed, name, mode):
    rng = np.random.default_rng(seed)
    m = make_model(name)
    U, n = random_state(m, rng)
    split = rotate_boundary_state(U, n, m)
    R = _admissible_R(split, rng)
    S_t = rng.uniform(0.0, 0.9) * np.eye(split.n_minus)
    if split.n_minus and not check_S_smallness(split, R, S_t).passed:
        return
    G = rng.standard_normal(split.n_minus) * rng.uniform(0, 5)
    bc = BoundaryCondition(R=R, S_tilde=S_t, G=lambda p, t, s: G, mode=mode)
    F = boundary_flux_from_split(split, bc)
    assert F + G @ G >= -1e-11 * (1 + abs(split.quadratic_form()))


def test_boundary_energy_flux_wrapper():
    m = IeeModel()
    U = np.array([2.0, 3.0, 4.0])
    assert boundary_energy_flux(U, (1.0, 0.0), m, BoundaryCondition(R=np.zeros((1, 2))), mode="weak") \
        == pytest.approx(42.0 + 2 * 2.0 * 2.0 * 2.0)


def test_background_condition_is_compliant_on_background():
    m = SweModel()
    Ubg = m.from_primitive([1.0, -0.3, 0.2])
    bc = background_condition(m, lambda p, t: Ubg)
    for normal in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]:
        p = penalty_vector(Ubg, normal, m, bc)
        assert np.max(np.abs(p)) < 1e-13


def test_bc_R_and_S_tilde_shapes():
    s = _iee_inflow()
    bc = BoundaryCondition(R=[1.0, 0.0], S_tilde=[0.5, 0.25])
    assert bc.R_matrix(s).shape == (2, 1)
    np.testing.assert_array_equal(bc.S_tilde_matrix(s), np.diag([0.5, 0.25]))
    with pytest.raises(DimensionError):
        BoundaryCondition(R=np.zeros(3)).R_matrix(s)
    with pytest.raises(DimensionError):
        BoundaryCondition(G=lambda p, t, s: np.zeros(3)).data(s, (0, 0), 0.0)
    with pytest.raises(ValueError):
        BoundaryCondition(mode="sideways")
