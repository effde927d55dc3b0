import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrb import kernels
from lrb.arm import ArmParams, expected_reward, gamma0, gamma1, success_prob
from lrb.values import (BeliefGrid, ConvergenceError, StructureViolation,
                        Successors, ValueGrid, default_tolerance,
                        extract_threshold, finite_horizon_values, gsva,
                        indexability_sweep, lipschitz_constant, value_range)
from lrb.verify import THRESHOLD_ARM, random_arm

BETA = 0.99


def test_grid_validation():
    with pytest.raises(ValueError):
        BeliefGrid(0.2)
    with pytest.raises(ValueError):
        BeliefGrid(0.003)
    g = BeliefGrid(0.005)
    assert len(g) == 201 and g.points[0] == 0.0 and g.points[-1] == 1.0


def test_nearest_point_ties_go_low():
    g = BeliefGrid(0.01)
    assert g.nna(0.005) == 0
    assert g.nna(0.0051) == 1
    assert g.nna(-0.5) == 0 and g.nna(1.7) == 100
    assert list(g.nna(np.array([0.015, 0.994]))) == [1, 99]


def test_large_subsidy_means_never_play():
    a = ArmParams(0.7, 0.2, 0.1, 0.9, 0.2, 0.8, K=2)
    h = default_tolerance(BETA)
    vg = gsva(a, 0.9, BETA, BeliefGrid(0.01), h)
    assert np.allclose(vg.v, 0.9 / (1 - BETA), atol=2 * h)
    assert np.all(vg.v_ns >= vg.v_s)


def test_constant_reward_means_always_play():
    a = ArmParams(0.7, 0.2, 0.5, 0.5, 0.6, 0.6, K=2)
    h = default_tolerance(BETA)
    vg = gsva(a, 0.3, BETA, BeliefGrid(0.01), h)
    assert np.allclose(vg.v, 0.6 / (1 - BETA), atol=2 * h)


def test_threshold_arm_action_values_cross_near_072():
    vg = gsva(THRESHOLD_ARM, 0.5, BETA, BeliefGrid(0.005))
    adv = vg.advantage
    k = int(np.argmax(adv <= 1e-6))
    assert abs(vg.grid.points[k] - 0.72) <= 0.03
    assert np.all(adv[:k] > 0)


@pytest.mark.parametrize("eta, want", [(0.5, 0.72), (0.6, 0.58)])
def test_threshold_arm_thresholds(eta, want):
    th = extract_threshold(gsva(THRESHOLD_ARM, eta, BETA, BeliefGrid(0.005)))
    assert th.kind == "interior" and abs(th.pi_t - want) <= 0.03


def test_constant_actions():
    g = BeliefGrid(0.01)
    assert extract_threshold(gsva(THRESHOLD_ARM, 1.9, BETA, g)).kind == "never_play"
    assert extract_threshold(gsva(THRESHOLD_ARM, -0.1, BETA, g)).kind == "always_play"


def test_second_crossing_is_reported():
    g = BeliefGrid(0.1)
    v_s = np.array([3, 2, 0, 0, 2, 0, 0, 0, 0, 0, 0], dtype=float)
    vg = ValueGrid(g, 0.0, BETA, v_s, np.ones(11), np.maximum(v_s, 1))
    with pytest.raises(StructureViolation) as e:
        extract_threshold(vg)
    assert e.value.points.tolist() == [pytest.approx(0.4)]
    assert extract_threshold(vg, strict=False).pi_t == pytest.approx(0.2)


def test_threshold_arm_sweep_is_monotone():
    sr = indexability_sweep(THRESHOLD_ARM, BETA, BeliefGrid(0.005), None,
                            np.round(np.arange(0.1, 0.91, 0.1), 2))
    assert sr.monotone and not sr.violations
    keys = [t.order_key() for t in sr.thresholds]
    assert keys == sorted(keys, reverse=True)


def test_sweep_needs_increasing_subsidies():
    with pytest.raises(ValueError):
        indexability_sweep(THRESHOLD_ARM, BETA, BeliefGrid(0.01), None, [0.5, 0.4])


def test_sweep_cap_raises_with_residual():
    with pytest.raises(ConvergenceError) as e:
        gsva(THRESHOLD_ARM, 0.5, BETA, BeliefGrid(0.01), 1e-12, max_sweeps=3)
    assert e.value.residual > 0


def test_gauss_seidel_and_jacobi_share_the_fixed_point():
    g = BeliefGrid(0.01)
    h = 1e-9
    a = gsva(THRESHOLD_ARM, 0.55, 0.95, g, h)
    b = gsva(THRESHOLD_ARM, 0.55, 0.95, g, h, jacobi=True)
    assert np.max(np.abs(a.v - b.v)) < 1e-7
    assert a.sweeps < b.sweeps


def test_backends_agree():
    g = BeliefGrid(0.01)
    s = Successors.build(THRESHOLD_ARM, g)
    out = []
    for name in ("cython", "python"):
        be = kernels.get_backend(name)
        v = np.full(len(g), 0.3 / (1 - 0.95))
        sweeps, _ = be.gsva_solve(v, s.rs, 0.5, s.rho, s.j1, s.j0, s.j2, s.s1,
                                  s.s0, s.s2, 0.95, 1e-6, 100000, False)
        out.append((sweeps, v))
    assert out[0][0] == out[1][0]
    assert np.max(np.abs(out[0][1] - out[1][1])) < 1e-10


# -- finite horizon ---------------------------------------------------------------

def test_horizon_one_is_the_immediate_reward():
    g = BeliefGrid(0.01)
    a = ArmParams(0.7, 0.2, 0.0, 1.0, 0.1, 1.0, K=3)
    (vg,) = finite_horizon_values(a, 0.4, BETA, g, 1)
    assert np.array_equal(vg.v_s, expected_reward(g.points, a))
    assert np.all(vg.v_ns == 0.4)


def test_horizon_two_by_hand():
    # rho0 = 0, rho1 = 1: ACK moves the belief to p10, NACK to p00, both on the grid
    g = BeliefGrid(0.05)
    a = ArmParams(0.7, 0.2, 0.0, 1.0, 0.1, 1.0, K=3)
    beta, eta = 0.9, 0.0
    vgs = finite_horizon_values(a, eta, beta, g, 2)

    def v1(p):
        return max(1.0 - 0.9 * p, eta)  # R_S(p) = 0.1 p + 1.0 (1 - p)

    for pi in (0.0, 0.5, 0.9):
        i = g.nna(pi)
        rho = 1 - pi
        want = (1 - 0.9 * pi) + beta * (rho * v1(0.2) + (1 - rho) * v1(0.7))
        assert vgs[1].v_s[i] == pytest.approx(want, abs=1e-12)


def test_long_horizon_matches_infinite_horizon():
    g = BeliefGrid(0.01)
    beta, T = 0.9, 300
    a = ArmParams(0.63, 0.3, 0.2, 0.9, 0.1, 0.8, K=4)
    h = 1e-9
    inf = gsva(a, 0.45, beta, g, h)
    (fin,) = finite_horizon_values(a, 0.45, beta, g, T, keep_all=False)
    lo, hi = value_range(a, 0.45, beta)
    assert np.max(np.abs(inf.v - fin.v)) <= h + beta ** T * (hi - lo)


def test_value_table_csv(tmp_path):
    vg = gsva(THRESHOLD_ARM, 0.5, BETA, BeliefGrid(0.1))
    p = tmp_path / "v.csv"
    vg.to_csv(p)
    lines = p.read_bytes().split(b"\n")
    assert lines[0] == b"pi,v_s,v_ns,v"
    assert len(lines) == 13 and lines[-1] == b""
    assert b"\r" not in p.read_bytes()


# -- properties -----------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_value_nondecreasing_and_convex_in_subsidy(seed):
    arm, beta = random_arm(np.random.default_rng(seed))
    g = BeliefGrid(0.02)
    s = Successors.build(arm, g)
    etas = np.linspace(-0.2, 1.2, 15)
    h = default_tolerance(beta) * 1e-3
    vs = np.array([gsva(arm, e, beta, g, h, succ=s).v for e in etas])
    tol = 1e-6
    assert np.diff(vs, axis=0).min() >= -tol
    assert (vs[:-2] + vs[2:] - 2 * vs[1:-1]).min() >= -tol
    slope = np.diff(vs, axis=0) / (etas[1] - etas[0])
    assert slope.max() <= 1 / (1 - beta) + 1e-4


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_positively_correlated_values_decrease(seed):
    rng = np.random.default_rng(seed)
    arm, beta = random_arm(rng, "pos_small_corr" if seed % 2 else "pos_large_k")
    vg = gsva(arm, float(rng.random()), beta, BeliefGrid(0.01))
    lo, hi = value_range(arm, vg.eta, beta)
    for f in (vg.v, vg.v_s, vg.v_ns):
        assert np.diff(f).max() <= 1e-3 * (hi - lo)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_lipschitz_bound_with_snapping_slack(seed):
    rng = np.random.default_rng(seed)
    arm, beta = random_arm(rng)
    B = lipschitz_constant(arm, beta)
    if B is None:
        return
    g = BeliefGrid(0.01)
    vg = gsva(arm, float(rng.random()), beta, g)
    slack = beta * B * g.delta / (1 - beta)
    dpi = np.abs(g.points[:, None] - g.points[None, :])
    for f in (vg.v, vg.v_s, vg.v_ns):
        assert (np.abs(f[:, None] - f[None, :]) - B * dpi).max() <= slack


def test_lipschitz_constant_condition():
    assert lipschitz_constant(ArmParams(0.5, 0.3, 0.2, 0.8, 0.2, 0.8), 0.99) is not None
    # strongly correlated, patient: neither condition holds
    assert lipschitz_constant(ArmParams(0.95, 0.05, 0.2, 0.8, 0.2, 0.4), 0.99) is None


def test_successor_table_uses_belief_maps():
    a = ArmParams(0.7, 0.2, 0.3, 0.9, 0.3, 0.9, K=2)
    g = BeliefGrid(0.01)
    s = Successors.build(a, g)
    i = g.nna(0.37)
    assert s.j1[i] == g.nna(gamma1(0.37, a)) and s.j0[i] == g.nna(gamma0(0.37, a))
    assert s.rho[i] == pytest.approx(success_prob(0.37, a))
