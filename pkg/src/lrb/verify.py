"""Acceptance checks.

Each check reproduces one acceptance criterion and returns a CheckResult.
The CLI ``verify`` command and the test-suite both call into this module, so
a criterion is defined in exactly one place.
"""
from __future__ import annotations

import functools
import itertools
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import experiment
from .arm import (ArmParams, gamma0, gamma1, gamma2, k_step_matrix,
                  stationary_q)
from .sim import evolve_state
from .values import (BeliefGrid, Successors, extract_threshold, gsva,
                     indexability_sweep, lipschitz_constant, value_range)
from .whittle import build_index_table, index_case1

THRESHOLD_ARM = ArmParams(0.2, 0.9, 0.3, 0.9, 0.3, 0.9, K=3)
DEMO_THRESHOLDS = {0.5: 0.72, 0.6: 0.58}

# (p00, p10, rho0, rho1, K, gamma2, q) as printed
GAMMA2_ROWS = [
    (0.9, 0.4, 0.0, 0.95, 10, 0.80, 0.8),
    (0.95, 0.45, 0.0, 0.95, 10, 0.9, 0.9),
    (0.8, 0.3, 0.2, 0.95, 10, 0.6, 0.6),
    (0.8, 0.6, 0.2, 0.95, 5, 0.75, 0.75),
    (0.5, 0.3, 0.1, 0.9, 5, 0.375, 0.375),
]

EXAMPLE1_VALUES = dict(L_b=72.0, WI=65.52, MWI=65.44, MP=61.73, NUR=50.53, RR=49.88, UR=49.91)
EXAMPLE3_VALUES = dict(L_b=62.49, WI=60.48, MWI=58.00, MP=55.48, NUR=45.35, RR=44.25, UR=44.22)

PROPERTY_DRAWS = 200
PROPERTY_DELTA = 0.001
ETA_GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.criterion:>2} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(criterion, name):
    def deco(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            t = time.perf_counter()
            ok, detail = fn(*a, **kw)
            return CheckResult(criterion, name, bool(ok), detail, time.perf_counter() - t)
        run.criterion = criterion
        return run
    return deco


# -- random parameter draws ---------------------------------------------------

def random_arm(rng: np.random.Generator, kind: str | None = None):
    """(arm, beta) with rho0 < rho1 and R0 < R1.

    ``kind`` forces one of the advantage-monotonicity condition classes:
    ``pos_large_k``, ``pos_small_corr``, ``pos_small_beta``,
    ``neg_small_corr``, ``neg_small_beta``.
    """
    while True:
        p00, p10 = rng.random(2)
        rho = np.sort(rng.random(2))
        R = np.sort(rng.random(2))
        K = int(rng.integers(1, 21))
        beta = float(rng.choice([0.5, 0.9, 0.95, 0.99]))
        if rho[1] - rho[0] < 0.05 or R[1] - R[0] < 0.01:
            continue
        b = min(1.0, (R[1] - R[0]) / (rho[1] - rho[0]))
        if kind == "pos_large_k":
            K = 1000
        if kind in ("pos_small_corr", "neg_small_corr"):
            d = rng.random() * b / 5
            p10 = rng.random() * (1 - d)
            p00 = p10 + d
            K = int(rng.integers(2, 21))
        if kind in ("pos_small_beta", "neg_small_beta"):
            beta = float(rng.random() * b / 5)
            K = int(rng.integers(2, 21))
        if kind and kind.startswith("pos"):
            p00, p10 = max(p00, p10), min(p00, p10)
        if kind and kind.startswith("neg"):
            p00, p10 = min(p00, p10), max(p00, p10)
        if p00 == p10 or beta <= 0:
            continue
        return ArmParams(float(p00), float(p10), float(rho[0]), float(rho[1]),
                         float(R[0]), float(R[1]), K=K), beta


# -- belief-update oracle -----------------------------------------------------

def bayes_then_propagate(pi, arm: ArmParams, ack: int) -> float:
    """Next-session belief by enumerating (start state, next state) pairs."""
    P = np.array([[arm.p00, 1 - arm.p00], [arm.p10, 1 - arm.p10]])
    if arm.post_feedback_propagation == "k_step":
        P = np.linalg.matrix_power(P, arm.K)
    prior = (pi, 1 - pi)
    lik = [(arm.rho0 if ack else 1 - arm.rho0), (arm.rho1 if ack else 1 - arm.rho1)]
    joint = np.zeros(2)
    for i, j in itertools.product(range(2), range(2)):
        joint[j] += prior[i] * lik[i] * P[i, j]
    return joint[0] / joint.sum()


# -- criteria -----------------------------------------------------------------

@_timed(1, "threshold demo arm")
def check_thresholds():
    grid = BeliefGrid(0.005)
    succ = Successors.build(THRESHOLD_ARM, grid)
    parts, ok = [], True
    for eta, want in DEMO_THRESHOLDS.items():
        th = extract_threshold(gsva(THRESHOLD_ARM, eta, 0.99, grid, succ=succ))
        good = th.kind == "interior" and abs(th.pi_t - want) <= 0.03
        ok &= good
        parts.append(f"eta={eta}: {th.pi_t} (want {want}+-0.03)")
    return ok, "; ".join(parts)


@_timed(2, "gamma2 and q reference rows")
def check_gamma2_rows():
    worst = 0.0
    for p00, p10, r0, r1, K, g2, q in GAMMA2_ROWS:
        arm = ArmParams(p00, p10, r0, r1, r0, r1, K=K)
        pis = np.linspace(0, 1, 101)
        worst = max(worst, np.abs(gamma2(pis, arm) - g2).max(),
                    abs(stationary_q(arm) - q))
    return worst < 0.005, f"max deviation {worst:.2e} over 5 rows x 101 beliefs"


@_timed(3, "threshold monotone in subsidy")
def check_indexability(n_random=20, seed=2024):
    grid = BeliefGrid(0.005)
    rng = np.random.default_rng(seed)
    arms = [(THRESHOLD_ARM, 0.99)]
    while len(arms) < n_random + 1:
        arm, _ = random_arm(rng)
        arms.append((arm, 0.99))
    bad = []
    for n, (arm, beta) in enumerate(arms):
        sr = indexability_sweep(arm, beta, grid, None, ETA_GRID)
        if not sr.monotone:
            bad.append((n, sr.violations))
    return not bad, f"{len(arms)} arms x {len(ETA_GRID)} subsidies, non-monotone: {bad or 'none'}"


@_timed(4, "closed form vs numeric index (Example 0)")
def check_closed_vs_numeric():
    cfg = cfgmod.load(cfgmod.bundled("example0"))
    grid = BeliefGrid(0.01)
    worst = 0.0
    for arm in cfg.arms:
        num = build_index_table(arm, cfg.beta, grid, closed_forms=False).w
        cf = np.array([index_case1(float(p), arm, cfg.beta) for p in grid.points])
        worst = max(worst, float(np.abs(num - cf).max()))
    return worst <= 0.02, f"max |closed - numeric| = {worst:.4f} (limit 0.02)"


@functools.lru_cache(maxsize=None)
def example_results(name: str, k_e: int | None = None):
    """(bound, {policy: SimResult}) for a bundled example, cached per process."""
    cfg = cfgmod.load(cfgmod.bundled(name))
    tabs = experiment.index_tables(cfg, cfg.decision_arms(k_e)) if "WI" in cfg.policies else None
    lb = experiment.bound(cfg, k_e)
    return lb, experiment.simulate(cfg, k_e, tabs)


def _ordering(values: dict, chain: list, tail: list, slack: float):
    """chain[0] >= chain[1] >= ... >= max(tail) - slack."""
    seq = [values[k] for k in chain]
    ok = all(a >= b for a, b in zip(seq, seq[1:]))
    ok &= seq[-1] >= max(values[k] for k in tail) - slack
    return ok


def _values(lb, res):
    out = {"L_b": lb.bound}
    out.update({k: r.final_value for k, r in res.items()})
    return out


def _band_report(vals, bands):
    parts, ok = [], True
    for k, (want, tol) in bands.items():
        good = abs(vals[k] - want) <= tol
        ok &= good
        parts.append(f"{k}={vals[k]:.2f}{'' if good else '!'} (want {want}+-{tol:g})")
    return ok, parts


@_timed(5, "Example 1 values and ordering")
def check_example1():
    vals = _values(*example_results("example1"))
    ok, parts = _band_report(vals, {"L_b": (72.0, 2.0), "WI": (65.52, 3.0),
                                    "MP": (61.73, 3.0), "UR": (49.91, 3.0)})
    order = _ordering(vals, ["L_b", "WI", "MWI", "MP"], ["NUR", "RR", "UR"], 1.0)
    parts.append("ordering " + ("ok" if order else "violated: " + ", ".join(
        f"{k}={vals[k]:.2f}" for k in ("WI", "MWI", "MP", "NUR", "RR", "UR"))))
    return ok and order, "; ".join(parts)


@_timed(6, "Example 3 values and ordering")
def check_example3():
    vals = _values(*example_results("example3"))
    ok, parts = _band_report(vals, {"L_b": (62.49, 2.0), "WI": (60.48, 0.1 * 60.48)})
    order = _ordering(vals, ["L_b", "WI", "MWI", "MP"], ["NUR", "RR", "UR"], 0.0)
    parts.append("ordering " + ("ok" if order else "violated: " + ", ".join(
        f"{k}={vals[k]:.2f}" for k in ("WI", "MWI", "MP", "NUR", "RR", "UR"))))
    return ok and order, "; ".join(parts)


BUNDLED_WITH_POLICIES = ["example0", "example0_one_step", "example1", "example2",
                         "example3", "example4"]


@_timed(7, "bound dominance on every bundled example")
def check_dominance(names=BUNDLED_WITH_POLICIES):
    bad, n = [], 0
    for name in names:
        cfg = cfgmod.load(cfgmod.bundled(name))
        for k_e in (cfg.K_e or [None]):
            lb, res = example_results(name, k_e)
            for pol, r in res.items():
                n += 1
                if r.final_value - 2 * r.final_stderr > lb.bound:
                    bad.append(f"{name}{'' if k_e is None else f'/K_e={k_e}'} {pol} "
                               f"{r.final_value:.2f} > {lb.bound:.2f}")
    return not bad, f"{n} policy runs, violations: {bad or 'none'}"


def property_violations(draws=PROPERTY_DRAWS, delta=PROPERTY_DELTA, seed=7) -> dict:
    """Counts of violated value-function properties over random arms.

    Tolerances: convexity in pi and monotonicity in pi at 1e-3 of the value
    range; Lipschitz differences within B*|dpi| plus twice the snapping error
    bound beta*B*delta/(2(1-beta)); in eta, nondecreasing and convex to 1e-5
    of the value range (solver tolerance) and slopes at most
    (1 + 1e-4)/(1-beta); advantage nonincreasing to 1e-3 of the value range.
    """
    rng = np.random.default_rng(seed)
    grid = BeliefGrid(delta)
    pts = grid.points
    dpi = np.abs(pts[:, None] - pts[None, :])
    viol = dict(convex_pi=0, decreasing_pi=0, lipschitz=0, eta_monotone=0,
                eta_convex=0, eta_slope=0)
    classes = ("pos_large_k", "pos_small_corr", "pos_small_beta",
               "neg_small_corr", "neg_small_beta")
    viol.update({f"advantage_{c}": 0 for c in classes})
    etas = np.linspace(0.0, 1.0, 21)
    coarse = BeliefGrid(0.01)
    for _ in range(draws):
        arm, beta = random_arm(rng)
        eta = float(rng.random())
        vg = gsva(arm, eta, beta, grid)
        lo, hi = value_range(arm, eta, beta)
        tol = 1e-3 * (hi - lo)
        B = lipschitz_constant(arm, beta)
        for f in (vg.v, vg.v_s, vg.v_ns):
            if (f[:-2] + f[2:] - 2 * f[1:-1]).min() < -tol:
                viol["convex_pi"] += 1
            if arm.positively_correlated and np.diff(f).max() > tol:
                viol["decreasing_pi"] += 1
            if B is not None:
                slack = 2 * beta * B * delta / (2 * (1 - beta))
                if (np.abs(f[:, None] - f[None, :]) - B * dpi).max() > slack:
                    viol["lipschitz"] += 1
        succ = Successors.build(arm, coarse)
        vs, v0 = [], None
        for e in etas:
            x = gsva(arm, e, beta, coarse, succ=succ, v0=v0)
            v0 = x.v
            vs.append(x.v)
        vs = np.array(vs)
        step = etas[1] - etas[0]
        etol = 1e-5 * (hi - lo)
        d = np.diff(vs, axis=0)
        viol["eta_monotone"] += int(d.min() < -etol)
        viol["eta_convex"] += int((vs[:-2] + vs[2:] - 2 * vs[1:-1]).min() < -etol)
        viol["eta_slope"] += int(d.max() / step > (1 + 1e-4) / (1 - beta))
    for c in classes:
        for _ in range(draws):
            arm, beta = random_arm(rng, c)
            eta = float(rng.random())
            vg = gsva(arm, eta, beta, grid)
            lo, hi = value_range(arm, eta, beta)
            if np.diff(vg.advantage).max() > 1e-3 * (hi - lo):
                viol[f"advantage_{c}"] += 1
    return viol


@_timed(8, "value-function property suites")
def check_properties(draws=PROPERTY_DRAWS):
    viol = property_violations(draws)
    bad = {k: v for k, v in viol.items() if v}
    return not bad, f"{draws} draws per suite ({len(viol)} suites), violations: {bad or 'none'}"


@_timed(9, "belief updates vs Bayes enumeration; state law vs P^K")
def check_belief_oracle(pairs=10_000, samples=100_000, seed=11):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        p00, p10, r0, r1 = rng.random(4)
        r0, r1 = min(r0, r1), max(r0, r1)
        mode = "k_step" if rng.random() < 0.5 else "one_step"
        arm = ArmParams(p00, p10, r0, r1, r0, r1, K=int(rng.integers(1, 30)),
                        post_feedback_propagation=mode)
        pi = float(rng.random())
        worst = max(worst, abs(gamma1(pi, arm) - bayes_then_propagate(pi, arm, 1)),
                    abs(gamma0(pi, arm) - bayes_then_propagate(pi, arm, 0)))
    oracle_ok = worst <= 1e-12
    z_worst = 0.0
    cases = [(ArmParams(0.2, 0.9, 0.3, 0.9, 0.3, 0.9, K=3), s) for s in (0, 1)]
    cases += [(ArmParams(0.7, 0.2, 0, 1, 0.1, 1, K=10), s) for s in (0, 1)]
    cases += [(ArmParams(0.95, 0.45, 0, 0.95, 0, 0.95, K=2), s) for s in (0, 1)]
    gen = np.random.Generator(np.random.Philox(key=[seed, 0]))
    for arm, s in cases:
        p = k_step_matrix(arm)[s, 0]
        draws = evolve_state(np.full(samples, s), arm, gen)
        freq = float(np.mean(draws == 0))
        sd = np.sqrt(p * (1 - p) / samples)
        z = abs(freq - p) / sd if sd > 0 else (0.0 if freq == p else np.inf)
        z_worst = max(z_worst, z)
    return oracle_ok and z_worst <= 3, (f"max |gamma - Bayes| = {worst:.1e} over {pairs} pairs; "
                                        f"max |z| = {z_worst:.2f} over {len(cases)} state laws")


def _small_config(out: Path) -> Path:
    text = cfgmod.bundled("example1").read_text()
    text = text.replace("L = 500", "L = 24").replace("S_max = 1000", "S_max = 200")
    text = text.replace("grid_delta = 0.005", "grid_delta = 0.02")
    p = out / "small.cfg"
    p.write_text(text + "\n")
    return p


@_timed(10, "byte-identical reruns")
def check_determinism():
    tmp = Path(tempfile.mkdtemp(prefix="lrb-det-"))
    try:
        cfg = cfgmod.load(_small_config(tmp))
        cfg.etas = [0.3, 0.6]
        experiment.run_experiment(cfg, tmp / "a", trace=True)
        experiment.run_experiment(cfg, tmp / "b", trace=True)
        a = sorted(p.relative_to(tmp / "a") for p in (tmp / "a").rglob("*.csv"))
        b = sorted(p.relative_to(tmp / "b") for p in (tmp / "b").rglob("*.csv"))
        diff = [str(p) for p in a if (tmp / "a" / p).read_bytes() != (tmp / "b" / p).read_bytes()]
        ok = a == b and not diff and len(a) > 0
        return ok, f"{len(a)} files compared, differing: {diff or 'none'}"
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


CHECKS = [check_thresholds, check_gamma2_rows, check_indexability, check_closed_vs_numeric,
          check_example1, check_example3, check_dominance, check_properties,
          check_belief_oracle, check_determinism]


def run_checks(criteria=None, report=print) -> list[CheckResult]:
    out = []
    for chk in CHECKS:
        if criteria and chk.criterion not in criteria:
            continue
        res = chk()
        if report:
            report(res.line())
        out.append(res)
    return out
