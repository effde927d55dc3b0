import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrb.arm import (ArmParams, ImpossibleObservation, ReducibleChain,
                     expected_reward, gamma0, gamma1, gamma2, k_step_matrix,
                     stationary_q, success_prob)
from lrb.verify import GAMMA2_ROWS, bayes_then_propagate

prob = st.floats(0.0, 1.0)
inner = st.floats(0.01, 0.99)


def arm(p00=0.7, p10=0.2, rho0=0.0, rho1=1.0, R0=0.1, R1=1.0, K=1, **kw):
    return ArmParams(p00, p10, rho0, rho1, R0, R1, K=K, **kw)


# -- gamma1 / gamma0 point values ---------------------------------------------

def test_ack_reveals_state_one():
    assert gamma1(0.5, arm()) == pytest.approx(0.2)


def test_ack_at_certain_state_zero():
    a = arm(rho0=0.3, rho1=0.9, R0=0.3, R1=0.9)
    assert gamma1(1.0, a) == pytest.approx(a.p00)


def test_nack_reveals_state_zero():
    assert gamma0(0.5, arm()) == pytest.approx(0.7)


def test_nack_at_certain_state_one():
    a = arm(rho0=0.3, rho1=0.9, R0=0.3, R1=0.9)
    assert gamma0(0.0, a) == pytest.approx(a.p10)


def test_mixed_observation_matches_enumeration():
    a = arm(rho0=0.3, rho1=0.9, R0=0.3, R1=0.9)
    assert gamma1(0.5, a) == pytest.approx(bayes_then_propagate(0.5, a, 1), abs=1e-14)
    assert gamma0(0.5, a) == pytest.approx(bayes_then_propagate(0.5, a, 0), abs=1e-14)


def test_impossible_observation_raises():
    a = arm()  # rho0 = 0: an ACK from a certain state 0 cannot happen
    with pytest.raises(ImpossibleObservation):
        gamma1(1.0, a)
    with pytest.raises(ImpossibleObservation):
        gamma0(0.0, a)
    assert 0.0 <= gamma1(1.0, a, strict=False) <= 1.0


def test_k_step_feedback_propagation_matches_enumeration():
    a = arm(rho0=0.3, rho1=0.9, R0=0.3, R1=0.9, K=4, post_feedback_propagation="k_step")
    for pi in (0.0, 0.3, 0.8, 1.0):
        assert gamma1(pi, a) == pytest.approx(bayes_then_propagate(pi, a, 1), abs=1e-13)
        assert gamma0(pi, a) == pytest.approx(bayes_then_propagate(pi, a, 0), abs=1e-13)


@settings(max_examples=300, deadline=None)
@given(prob, prob, prob, prob, prob, st.integers(1, 30), st.booleans())
def test_belief_maps_match_enumeration(p00, p10, r_a, r_b, pi, K, kstep):
    r0, r1 = min(r_a, r_b), max(r_a, r_b)
    a = ArmParams(p00, p10, r0, r1, r0, r1, K=K,
                  post_feedback_propagation="k_step" if kstep else "one_step")
    for ack, g in ((1, gamma1), (0, gamma0)):
        lik = pi * (a.rho0 if ack else 1 - a.rho0) + (1 - pi) * (a.rho1 if ack else 1 - a.rho1)
        if lik < 1e-9:
            continue
        assert abs(g(pi, a) - bayes_then_propagate(pi, a, ack)) <= 1e-12


def test_vector_and_scalar_evaluation_agree_bitwise():
    a = arm(rho0=0.25, rho1=0.85, R0=0.2, R1=0.9, K=3)
    pis = np.linspace(0, 1, 37)
    for g in (gamma1, gamma0, gamma2):
        vec = g(pis, a, strict=False) if g is not gamma2 else g(pis, a)
        for p, v in zip(pis, vec):
            s = g(float(p), a, strict=False) if g is not gamma2 else g(float(p), a)
            assert s == v


# -- gamma2, q, rewards -------------------------------------------------------

@pytest.mark.parametrize("row", GAMMA2_ROWS)
def test_gamma2_reference_rows(row):
    p00, p10, r0, r1, K, g2, q = row
    a = ArmParams(p00, p10, r0, r1, r0, r1, K=K)
    pis = np.linspace(0, 1, 51)
    assert np.all(np.abs(gamma2(pis, a) - g2) < 0.005)
    assert stationary_q(a) == pytest.approx(q, abs=0.005)


def test_gamma2_last_reference_row_three_decimals():
    a = ArmParams(0.5, 0.3, 0.1, 0.9, 0.1, 0.9, K=5)
    assert round(gamma2(0.5, a), 3) == 0.375


def test_gamma2_one_step_from_state_one():
    assert gamma2(0.0, arm(K=1)) == pytest.approx(0.2)


def test_gamma2_equals_matrix_power():
    a = arm(p00=0.63, p10=0.3, K=7)
    P = k_step_matrix(a)
    for pi in (0.0, 0.4, 1.0):
        assert gamma2(pi, a) == pytest.approx(pi * P[0, 0] + (1 - pi) * P[1, 0], abs=1e-14)


def test_gamma2_degenerate_chains():
    assert gamma2(0.3, arm(p00=1.0, p10=0.0, K=5)) == 0.3  # identity
    assert gamma2(0.3, arm(p00=0.4, p10=0.4, K=5)) == pytest.approx(0.4)


def test_stationary_q_values():
    assert stationary_q(arm(p00=0.8, p10=0.3)) == pytest.approx(0.6)
    assert stationary_q(arm(p00=0.8, p10=0.6)) == pytest.approx(0.75)
    assert stationary_q(arm(p00=0.35, p10=0.35)) == pytest.approx(0.35)


def test_reducible_chain_has_no_stationary_belief():
    with pytest.raises(ReducibleChain):
        stationary_q(arm(p00=1.0, p10=0.0))


def test_expected_reward_endpoints_and_midpoint():
    a = arm()
    assert expected_reward(1.0, a) == pytest.approx(0.1)
    assert expected_reward(0.0, a) == pytest.approx(1.0)
    assert expected_reward(0.5, a) == pytest.approx(0.55)
    assert success_prob(0.25, arm(rho0=0.2, rho1=0.6, R0=0.2, R1=0.6)) == pytest.approx(0.5)


@pytest.mark.parametrize("bad", [dict(p00=1.2), dict(rho1=-0.1), dict(K=0), dict(K=1.5),
                                 dict(R0=-1.0), dict(R0=1.0, R1=0.5),
                                 dict(post_feedback_propagation="two_step")])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        arm(**bad)


def test_invalid_probability_names_field():
    with pytest.raises(ValueError, match="p00"):
        arm(p00=1.2)


# -- structural properties of the belief maps -----------------------------------

def _corr_arm(p_hi, p_lo, r_a, r_b, K, positive):
    r0, r1 = min(r_a, r_b), max(r_a, r_b)
    p00, p10 = (p_hi, p_lo) if positive else (p_lo, p_hi)
    return ArmParams(p00, p10, r0, r1, r0, r1, K=K)


pair = st.tuples(inner, inner).filter(lambda t: abs(t[0] - t[1]) > 1e-3).map(sorted)


@settings(max_examples=200, deadline=None)
@given(pair, inner, inner, st.integers(1, 20))
def test_positively_correlated_maps(ps, r_a, r_b, K):
    a = _corr_arm(ps[1], ps[0], r_a, r_b, K, True)
    pis = np.linspace(0, 1, 101)
    g1, g0, g2 = gamma1(pis, a, strict=False), gamma0(pis, a, strict=False), gamma2(pis, a)
    eps = 1e-12
    for g in (g1, g0, g2):
        assert np.all(np.diff(g) >= -eps)
    assert np.all(g1[:-2] + g1[2:] - 2 * g1[1:-1] >= -1e-10)   # convex
    assert np.all(g0[:-2] + g0[2:] - 2 * g0[1:-1] <= 1e-10)    # concave
    assert np.all(a.p10 - eps <= g1) and np.all(g1 <= g0 + eps) and np.all(g0 <= a.p00 + eps)


@settings(max_examples=200, deadline=None)
@given(pair, inner, inner, st.integers(1, 20))
def test_negatively_correlated_maps(ps, r_a, r_b, K):
    a = _corr_arm(ps[1], ps[0], r_a, r_b, K, False)
    pis = np.linspace(0, 1, 101)
    g1, g0 = gamma1(pis, a, strict=False), gamma0(pis, a, strict=False)
    eps = 1e-12
    assert np.all(np.diff(g1) <= eps) and np.all(np.diff(g0) <= eps)
    assert np.all(g1[:-2] + g1[2:] - 2 * g1[1:-1] <= 1e-10)    # concave
    assert np.all(g0[:-2] + g0[2:] - 2 * g0[1:-1] >= -1e-10)   # convex
    assert np.all(a.p00 - eps <= g0) and np.all(g0 <= g1 + eps) and np.all(g1 <= a.p10 + eps)


@settings(max_examples=200, deadline=None)
@given(prob, prob, prob, st.integers(1, 200))
def test_gamma2_contracts_towards_q(p00, p10, pi, K):
    a = ArmParams(p00, p10, 0.2, 0.8, 0.2, 0.8, K=K)
    if p00 == 1.0 and p10 == 0.0:
        return
    q = stationary_q(a)
    assert abs(gamma2(pi, a) - q) <= abs(pi - q) * abs(p00 - p10) ** K + 1e-12


def test_nearly_absorbing_chain_has_finite_stationary_belief():
    a = ArmParams(1.0, 1e-45, 0.2, 0.8, 0.2, 0.8, K=3)
    assert stationary_q(a) == 1.0
    assert gamma2(0.3, a) == pytest.approx(0.3)
