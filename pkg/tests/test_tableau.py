import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdae_lab.tableau import (
    HypothesisViolated,
    Regime,
    UnknownClassicalDaeOrder,
    UnsupportedStageCount,
    PoleOfR,
    ButcherTableau,
    backward_euler,
    by_name,
    check_hypotheses,
    check_simplifying_conditions,
    implicit_midpoint,
    predict_order,
    r_at_infinity,
    radau_iia,
    stability_function,
)

RADAU = [radau_iia(s) for s in (1, 2, 3)]


def test_backward_euler_stability_function():
    t = backward_euler()
    for z in (-1.0, 0.3j, -5 + 2j):
        assert stability_function(t, z) == pytest.approx(1 / (1 - z), rel=1e-14)
    assert stability_function(t, -1.0) == pytest.approx(0.5)
    assert r_at_infinity(t) == 0.0
    assert check_simplifying_conditions(t, 1, 1)
    assert not check_simplifying_conditions(t, 2, 1)


def test_radau_s1_is_backward_euler():
    a, b = radau_iia(1), backward_euler()
    np.testing.assert_array_equal(a.a, b.a)
    assert a.family == "backward-euler"


def test_radau3_nodes_and_conditions():
    t = radau_iia(3)
    r6 = np.sqrt(6.0)
    np.testing.assert_allclose(t.c, [(4 - r6) / 10, (4 + r6) / 10, 1.0], atol=1e-15)
    assert (t.p, t.q) == (5, 3)
    assert check_simplifying_conditions(t, 5, 3)
    assert not check_simplifying_conditions(t, 6, 3)


def test_radau3_against_closed_form_coefficients():
    # Hairer & Wanner closed form
    r6 = np.sqrt(6.0)
    a = np.array(
        [
            [(88 - 7 * r6) / 360, (296 - 169 * r6) / 1800, (-2 + 3 * r6) / 225],
            [(296 + 169 * r6) / 1800, (88 + 7 * r6) / 360, (-2 - 3 * r6) / 225],
            [(16 - r6) / 36, (16 + r6) / 36, 1 / 9],
        ]
    )
    np.testing.assert_allclose(radau_iia(3).a, a, atol=1e-14)


def test_radau2():
    t = radau_iia(2)
    np.testing.assert_allclose(t.c, [1 / 3, 1.0], atol=1e-15)
    np.testing.assert_allclose(t.a, [[5 / 12, -1 / 12], [3 / 4, 1 / 4]], atol=1e-15)
    assert check_simplifying_conditions(t, 3, 2)


def test_unsupported_stage_count():
    with pytest.raises(UnsupportedStageCount):
        radau_iia(4)


@pytest.mark.parametrize("t", RADAU + [implicit_midpoint()], ids=lambda t: t.label)
def test_row_sum_and_regular_a(t):
    np.testing.assert_allclose(t.a.sum(axis=1), t.c, atol=1e-12)
    assert abs(np.linalg.det(t.a)) > 1e-12


@pytest.mark.parametrize("t", RADAU, ids=lambda t: t.label)
def test_radau_conditions_and_infinity(t):
    assert check_simplifying_conditions(t, 2 * t.s - 1, t.s, tol=1e-10)
    assert abs(r_at_infinity(t)) <= 1e-12
    assert t.stiffly_accurate


def test_midpoint_infinity():
    assert r_at_infinity(implicit_midpoint()) == pytest.approx(-1.0)
    assert not implicit_midpoint().stiffly_accurate


@pytest.mark.parametrize("t", RADAU + [implicit_midpoint()], ids=lambda t: t.label)
def test_r_at_zero_is_one(t):
    assert stability_function(t, 0.0) == 1.0


def test_radau3_imaginary_axis():
    t = radau_iia(3)
    ys = np.concatenate([-np.geomspace(1e-3, 1e3, 500), np.geomspace(1e-3, 1e3, 500)])
    R = np.array([stability_function(t, 1j * y) for y in ys])
    assert np.all(np.abs(R) <= 1 + 1e-12)
    assert np.all(np.abs(R - 1) > 1e-14)


@given(st.floats(1e-3, 1e3), st.sampled_from([1, 2, 3]))
def test_radau_r_it_not_one(y, s):
    t = radau_iia(s)
    for sign in (1, -1):
        assert abs(stability_function(t, sign * 1j * y) - 1) > 1e-14


def test_pole_of_r():
    with pytest.raises(PoleOfR):
        stability_function(backward_euler(), 1.0)


def test_by_name():
    assert by_name("radau3").label == "radau-iia-3"
    assert by_name("euler").family == "backward-euler"
    with pytest.raises(ValueError):
        by_name("rk4")


def test_predictions_for_the_examples():
    be, r3 = backward_euler(), radau_iia(3)
    p = predict_order(be, 3, False)
    assert p.p_star == 1 and p.regime is Regime.HIGH_INDEX
    p = predict_order(r3, 1, False)
    assert p.p_star == pytest.approx(4.25) and p.epsilon_flag and p.regime is Regime.INDEX01_INHOMOG
    assert p.describe() == "4.25-eps"
    p = predict_order(r3, 1, True)
    assert p.p_star == 5 and not p.epsilon_flag and p.regime is Regime.INDEX01_HOMOG
    p = predict_order(r3, 2, False)
    assert p.p_star == 3 and p.p_nu == 3


def test_midpoint_hypotheses():
    mp = implicit_midpoint()
    assert all(v is not False for v in check_hypotheses(mp, 1).values())
    with pytest.raises(HypothesisViolated) as err:
        predict_order(mp, 2, False, p_nu=2)
    assert err.value.hypothesis == "L-stable"


def test_unknown_dae_order_needs_caller_value():
    mp = implicit_midpoint()
    with pytest.raises(UnknownClassicalDaeOrder):
        predict_order(mp, 1, False)
    assert predict_order(mp, 1, False, p_nu=2).p_star == 2


def test_stage_order_condition_recorded():
    h = check_hypotheses(backward_euler(), 4)
    assert h["q >= nu_dt - 2"] is False
    assert check_hypotheses(radau_iia(3), 5)["q >= nu_dt - 2"] is None
    with pytest.raises(HypothesisViolated):
        predict_order(backward_euler(), 4, False)


@pytest.mark.parametrize("t", RADAU, ids=lambda t: t.label)
@pytest.mark.parametrize("bc", [False, True])
def test_prediction_monotone_in_index(t, bc):
    stars = []
    for nu in range(0, 5):
        try:
            stars.append(predict_order(t, nu, bc).p_star)
        except HypothesisViolated:
            break
    assert len(stars) >= 3
    assert all(a >= b for a, b in zip(stars, stars[1:]))


def test_bad_shapes():
    with pytest.raises(ValueError):
        ButcherTableau(a=[[1.0]], b=[0.5, 0.5], c=[1.0], p=1, q=1, label="bad")
