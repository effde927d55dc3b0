import numpy as np
import pytest

from lrb.arm import ArmParams, expected_reward, stationary_q
from lrb.config import bundled, load
from lrb.values import BeliefGrid, finite_horizon_values
from lrb.whittle import (A1, A2, A3, A4, CLOSED_CASE1, CLOSED_CASE2, NUMERIC,
                         IndexSearchError, NumericParams, PreconditionError,
                         _a2_alternative, _case2_a4_one_step, build_index_table, classify_region,
                         index_case1, index_case2, index_numeric,
                         modified_whittle)
from lrb.verify import THRESHOLD_ARM

BETA = 0.99
CASE1 = ArmParams(0.7, 0.2, 0.0, 1.0, 0.1, 1.0, K=10)
EX1_ARM2 = ArmParams(0.50, 0.41, 0.0, 0.9, 0.0, 0.9, K=1000)


def test_regions():
    q = stationary_q(CASE1)
    assert classify_region(0.1, CASE1) == A1
    assert classify_region(0.3, CASE1) == A2
    assert classify_region(q, CASE1) == A3
    assert classify_region(0.9, CASE1) == A4
    with pytest.raises(PreconditionError, match="numeric"):
        classify_region(0.5, THRESHOLD_ARM)


def test_case1_first_region_is_immediate_reward():
    assert index_case1(0.0, CASE1, BETA) == pytest.approx(1.0)
    assert index_case1(0.1, CASE1, BETA) == pytest.approx(0.91)
    assert index_case1(0.1, CASE1, BETA) == pytest.approx(
        index_numeric(0.1, CASE1, BETA, BeliefGrid(0.01)), abs=0.02)


@pytest.mark.parametrize("pi", [0.25, 0.35, 0.5, 0.65, 0.9])
def test_case1_matches_numeric(pi):
    g = BeliefGrid(0.01)
    assert index_case1(g.snap(pi), CASE1, BETA) == pytest.approx(
        index_numeric(pi, CASE1, BETA, g), abs=0.02)


def test_case1_preconditions():
    with pytest.raises(PreconditionError):
        index_case1(0.3, THRESHOLD_ARM, BETA)


def test_alternative_second_region_formula_disagrees():
    # the alternative A2 expression drifts from the numeric index; the one in
    # use stays within tolerance
    g = BeliefGrid(0.01)
    pi = 0.35
    num = index_numeric(pi, CASE1, BETA, g)
    assert abs(index_case1(pi, CASE1, BETA) - num) <= 0.02
    assert abs(_a2_alternative(pi, CASE1, BETA) - num) > 0.02


def test_case2_values():
    assert index_case2(0.0, EX1_ARM2, BETA) == pytest.approx(0.9)
    assert index_case2(0.46, EX1_ARM2, BETA) is None  # A3
    g = BeliefGrid(0.01)
    w = index_case2(0.42, EX1_ARM2, BETA)
    assert w is not None
    assert w == pytest.approx(index_numeric(0.42, EX1_ARM2, BETA, g), abs=0.02)


@pytest.mark.parametrize("pi", [0.5, 0.65, 0.8, 1.0])
def test_case2_fourth_region_matches_numeric(pi):
    g = BeliefGrid(0.01)
    w = index_case2(pi, EX1_ARM2, BETA)
    assert w == pytest.approx(index_numeric(pi, EX1_ARM2, BETA, g), abs=0.02)


def test_one_step_fourth_region_formula_disagrees():
    g = BeliefGrid(0.01)
    arm = EX1_ARM2.replace(p00=0.75, p10=0.2)
    pi = 0.87
    num = index_numeric(pi, arm, BETA, g)
    assert abs(index_case2(pi, arm, BETA) - num) <= 0.02
    assert _case2_a4_one_step(pi, arm, BETA) == pytest.approx(0.9 * (1 - pi))
    assert abs(_case2_a4_one_step(pi, arm, BETA) - num) > 0.1


def test_case2_preconditions():
    with pytest.raises(PreconditionError):
        index_case2(0.3, CASE1, BETA)


@pytest.mark.parametrize("pi, want", [(0.72, 0.5), (0.58, 0.6)])
def test_threshold_arm_index_inverts_threshold(pi, want):
    assert index_numeric(pi, THRESHOLD_ARM, BETA, BeliefGrid(0.005)) == pytest.approx(want, abs=0.03)


def test_iteration_cap_reports_last_iterate():
    with pytest.raises(IndexSearchError) as e:
        index_numeric(0.5, THRESHOLD_ARM, BETA, BeliefGrid(0.02), NumericParams(cap=2))
    assert np.isfinite(e.value.eta) and e.value.residual != 0


def test_table_methods():
    g = BeliefGrid(0.01)
    ex0 = load(bundled("example0"))
    for a in ex0.arms:
        assert build_index_table(a, BETA, g).methods == {CLOSED_CASE1}
    ex2 = load(bundled("example2"))
    assert build_index_table(ex2.arms[0], BETA, g).methods == {NUMERIC}
    flat = ArmParams(0.4, 0.4, 0.2, 0.8, 0.2, 0.8, K=2)
    assert build_index_table(flat, BETA, g).methods == {NUMERIC}
    mixed = build_index_table(EX1_ARM2, BETA, g)
    assert mixed.methods == {CLOSED_CASE2, NUMERIC}


def test_table_lookup_and_csv(tmp_path):
    g = BeliefGrid(0.1)
    t = build_index_table(CASE1, BETA, g)
    assert t.lookup(0.12) == t.w[1]
    t.to_csv(tmp_path / "w.csv")
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == "pi,w,method"


def test_modified_index_base_case():
    g = BeliefGrid(0.05)
    m = modified_whittle(THRESHOLD_ARM, BETA, g, 1)
    assert np.array_equal(m.m, expected_reward(g.points, THRESHOLD_ARM))


def test_modified_index_two_stages_by_hand():
    g = BeliefGrid(0.05)
    a = CASE1
    beta = 0.9
    m = modified_whittle(a, beta, g, 2).m

    def v1(p):
        return max(expected_reward(p, a), 0.0)

    for pi in (0.0, 0.5, 0.9):
        i = g.nna(pi)
        rho = 1 - pi
        v_s = expected_reward(pi, a) + beta * (rho * v1(0.2) + (1 - rho) * v1(0.7))
        g2 = 0.4 + (g.points[i] - 0.4) * 0.5 ** 10  # q = 0.4, p00 - p10 = 0.5
        v_ns = beta * v1(g.snap(g2))
        assert m[i] == pytest.approx(v_s - v_ns, abs=1e-12)


def test_modified_index_is_the_last_stage_difference():
    g = BeliefGrid(0.05)
    last = finite_horizon_values(THRESHOLD_ARM, 0.0, BETA, g, 7)[-1]
    assert np.array_equal(modified_whittle(THRESHOLD_ARM, BETA, g, 7).m, last.v_s - last.v_ns)


def test_case2_strongly_correlated_arm_on_a_fine_grid():
    # coarse grids are off by a few hundredths here; refining closes the gap
    arm = load(bundled("example1")).arms[9]
    num = index_numeric(0.94, arm, BETA, BeliefGrid(0.001))
    assert index_case2(0.94, arm, BETA) == pytest.approx(num, abs=0.02)
