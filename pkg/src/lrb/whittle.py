"""Whittle indices: closed forms for two special arm classes, the
subsidy-iteration solver for everything else, and the finite-horizon
(modified) index.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .arm import (ArmParams, expected_reward, gamma0, gamma2, stationary_q,
                  success_prob)
from .values import (MAX_SWEEPS, BeliefGrid, ConvergenceError, Successors,
                     default_tolerance, finite_horizon_values, write_csv)

log = logging.getLogger(__name__)

A1, A2, A3, A4 = "A1", "A2", "A3", "A4"
CLOSED_CASE1 = "closed_case1"
CLOSED_CASE2 = "closed_case2"
NUMERIC = "numeric"

# beyond this many K-step propagations the chain is treated as mixed
_T_CAP = 10_000


class PreconditionError(ValueError):
    pass


def classify_region(pi: float, arm: ArmParams) -> str:
    """Which of [0,p10), [p10,q), [q,p00), [p00,1] contains ``pi``."""
    if not arm.positively_correlated:
        raise PreconditionError(
            "region classification needs p00 > p10; use index_numeric")
    q = stationary_q(arm)
    if pi < arm.p10:
        return A1
    if pi < q:
        return A2
    if pi < arm.p00:
        return A3
    return A4


def is_case1(arm: ArmParams) -> bool:
    return arm.rho0 == 0.0 and arm.rho1 == 1.0 and arm.p00 > arm.p10


def is_case2(arm: ArmParams) -> bool:
    return (arm.R0 == 0.0 and arm.rho0 == 0.0 and arm.R1 == arm.rho1
            and 0.0 < arm.rho1 < 1.0 and arm.p00 > arm.p10)


def _a2_index(pi, arm, beta):
    a = expected_reward(arm.p10, arm) / (1 - beta * (1 - arm.p10))
    b = beta * arm.p10 / (1 - beta * (1 - arm.p10))
    rs = expected_reward(pi, arm)
    return (1 - beta) * (rs + beta * (1 - pi) * a) / (1 - beta * (pi + (1 - pi) * b))


def _a2_alternative(pi, arm, beta):
    # alternative A2 expression; disagrees with the numeric solver and is kept
    # only for comparison (see tests)
    rs = expected_reward(pi, arm)
    x = pi - arm.p10
    return rs * (1 - beta) * (1 - beta * x) / (1 - beta * (1 + (1 - beta) * x))


def case1_a3_constants(pi: float, arm: ArmParams, beta: float) -> dict:
    """Constants of the A3 expression (first-hit time t and friends)."""
    a = expected_reward(arm.p10, arm) / (1 - beta * (1 - arm.p10))
    b = beta * arm.p10 / (1 - beta * (1 - arm.p10))
    g = arm.p00
    t = 0
    for t in range(1, _T_CAP + 1):
        g = gamma2(g, arm)
        if g <= pi:
            break
        if beta ** t < 1e-300:
            t = None  # never hits pi (pi == q); use the t -> inf limit
            break
    else:
        if pi > stationary_q(arm):
            raise ConvergenceError(
                "K-step belief from p00 did not reach pi within the step cap")
        t = None
    if t is None:
        a1 = b1 = 0.0
        f = 1.0 / (1 - beta)
    else:
        bt = beta ** t
        den = 1 - beta * bt * g
        a1 = bt * expected_reward(g, arm) / den
        b1 = beta * bt * (1 - g) / den
        f = (1 - bt) / ((1 - beta) * den)
    c = f / (1 - b * b1)
    d = (a1 + b1 * a) / (1 - b * b1)
    return dict(a=a, b=b, a1=a1, b1=b1, c=c, d=d, f=f, t=t)


def index_case1(pi: float, arm: ArmParams, beta: float) -> float:
    """Closed-form index for rho0 = 0, rho1 = 1, p00 > p10, any K."""
    if not is_case1(arm):
        raise PreconditionError("case 1 needs rho0 = 0, rho1 = 1 and p00 > p10")
    region = classify_region(pi, arm)
    if region == A1:
        return float(expected_reward(pi, arm))
    if region == A2:
        return float(_a2_index(pi, arm, beta))
    if region == A3:
        k = case1_a3_constants(pi, arm, beta)

        def B(x):
            return beta * k["c"] * (x * (1 - k["b"]) + k["b"])

        def D(x):
            return expected_reward(x, arm) + beta * (
                (1 - x) * (k["a"] + k["b"] * k["d"]) + x * k["d"])

        g2 = gamma2(pi, arm)
        return float((D(pi) - beta * D(g2)) / (1 + beta * B(g2) - B(pi)))
    m = (arm.R0 - arm.R1) / (1 - beta * (arm.p00 - arm.p10))
    c1 = (arm.R1 + m * beta * arm.p10) / (1 - beta)
    return float(m * pi + c1 - beta * (m * gamma2(pi, arm) + c1))


def index_case2(pi: float, arm: ArmParams, beta: float) -> float | None:
    """Closed-form index for large K with R0 = rho0 = 0 and R1 = rho1 in (0,1).

    Returns None where no expression exists (A3, and A2 beyond two NACK
    steps from p10).
    """
    if not is_case2(arm):
        raise PreconditionError(
            "case 2 needs R0 = rho0 = 0, 0 < R1 = rho1 < 1 and p00 > p10")
    region = classify_region(pi, arm)
    rho = success_prob(pi, arm)
    if region == A1:
        return float(rho)
    if region == A2:
        g0 = gamma0(arm.p10, arm)
        if g0 >= pi:
            return float(rho / (1 - beta * (success_prob(arm.p10, arm) - rho)))
        if gamma0(g0, arm) >= pi:
            r10 = success_prob(arm.p10, arm)
            rg = success_prob(g0, arm)
            C1 = (1 - beta * (r10 - rho) - beta ** 2 * (rg - rho)
                  + beta ** 2 * rg * r10)
            return float(rho / C1)
        return None
    if region == A3:
        return None
    m, c = _case2_a4_constants(arm, beta)
    return float(m * (pi - beta * gamma2(pi, arm)) + (1 - beta) * c)


def _case2_a4_constants(arm, beta):
    dp = arm.p00 - arm.p10
    m = -arm.rho1 / (1 - beta * dp)
    c = (arm.rho1 + (-beta * arm.p10 * arm.rho1) / (1 - beta * dp)) / (1 - beta)
    return m, c


def _case2_a4_one_step(pi, arm, beta):
    # same constants with the resting belief moved one step instead of K;
    # reduces to rho(pi) and disagrees with the numeric index (see tests)
    m, c = _case2_a4_constants(arm, beta)
    dp = arm.p00 - arm.p10
    return m * pi * (1 - beta * dp) + (1 - beta) * c - beta * arm.p10 * m


@dataclass
class NumericParams:
    """Settings of the subsidy iteration.

    ``alpha`` defaults to 0.05 times the arm's reward range, ``h`` is the
    stopping tolerance on |V_S - V_NS| at the target point and ``h_inner``
    the L1 tolerance of each inner value solve.
    """

    eta0: float | None = None
    alpha: float | None = None
    h: float = 1e-5
    h_inner: float | None = None
    cap: int = 10_000
    max_sweeps: int = MAX_SWEEPS

    def resolved(self, arm: ArmParams, beta: float) -> "NumericParams":
        rr = abs(arm.R1 - arm.R0) or max(arm.R0, arm.R1, 1.0)
        return NumericParams(
            self.eta0,
            0.05 * rr if self.alpha is None else self.alpha,
            self.h,
            default_tolerance(beta) * 1e-3 if self.h_inner is None else self.h_inner,
            self.cap,
            self.max_sweeps)


class IndexSearchError(RuntimeError):
    def __init__(self, msg, eta, residual):
        super().__init__(msg)
        self.eta = eta
        self.residual = residual


def index_numeric(pi: float, arm: ArmParams, beta: float,
                  grid: BeliefGrid | None = None,
                  params: NumericParams | None = None, *,
                  succ: Successors | None = None, v0=None,
                  return_values: bool = False):
    """Index at ``pi`` by fixed-step subsidy iteration.

    eta_{t+1} = eta_t + alpha * (V_S(pi, eta_t) - V_NS(pi, eta_t)), where the
    action values come from a converged grid value solve at eta_t.  Stops
    when |V_S - V_NS| <= h.  ``pi`` is snapped to the grid.
    """
    grid = grid or BeliefGrid()
    succ = succ or Successors.build(arm, grid)
    p = (params or NumericParams()).resolved(arm, beta)
    i = grid.nna(pi)
    eta0 = float(succ.rs[i]) if p.eta0 is None else float(p.eta0)
    if v0 is None:
        lo = min(float(succ.rs.min()), eta0)
        v = np.full(len(grid), lo / (1.0 - beta))
    else:
        v = np.array(v0, dtype=float)
    eta, steps, adv, status = kernels.subsidy_search(
        i, v, succ.rs, succ.rho, succ.j1, succ.j0, succ.j2, succ.s1, succ.s0,
        succ.s2, float(beta), eta0, float(p.alpha), float(p.h),
        float(p.h_inner), int(p.max_sweeps), int(p.cap))
    if status == 2:
        raise ConvergenceError("inner value solve did not converge", adv)
    if status == 1:
        raise IndexSearchError(
            f"subsidy iteration hit the {p.cap}-step cap at pi={grid.points[i]:.4f} "
            f"(eta={eta:.6g}, advantage={adv:.3g})", eta, adv)
    if return_values:
        return float(eta), v
    return float(eta)


@dataclass
class IndexTable:
    grid: BeliefGrid
    w: np.ndarray
    method: list
    arm: ArmParams | None = None

    def lookup(self, pi):
        return self.w[self.grid.nna(pi)]

    @property
    def methods(self) -> set:
        return set(self.method)

    def to_csv(self, path):
        write_csv(path, ["pi", "w", "method"],
                  zip(self.grid.points, self.w, self.method))


def closed_form(pi: float, arm: ArmParams, beta: float):
    """(value, method) from a closed form if one applies at ``pi``, else None."""
    if is_case1(arm):
        return index_case1(pi, arm, beta), CLOSED_CASE1
    if is_case2(arm):
        w = index_case2(pi, arm, beta)
        if w is not None:
            return w, CLOSED_CASE2
    return None


def build_index_table(arm: ArmParams, beta: float,
                      grid: BeliefGrid | None = None,
                      numeric_params: NumericParams | None = None,
                      closed_forms: bool = True) -> IndexTable:
    """Index at every grid point, closed form where available.

    Numeric points are solved in increasing belief order, each warm-started
    from the previous point's subsidy and value vector.
    """
    grid = grid or BeliefGrid()
    w = np.empty(len(grid))
    method = [NUMERIC] * len(grid)
    todo = []
    for i, pi in enumerate(grid.points):
        cf = closed_form(float(pi), arm, beta) if closed_forms else None
        if cf is None:
            todo.append(i)
        else:
            w[i], method[i] = cf
    if todo:
        succ = Successors.build(arm, grid)
        base = numeric_params or NumericParams()
        v = None
        eta_prev = None
        for i in todo:
            p = base
            if base.eta0 is None and eta_prev is not None:
                p = NumericParams(eta_prev, base.alpha, base.h, base.h_inner,
                                  base.cap, base.max_sweeps)
            w[i], v = index_numeric(grid.points[i], arm, beta, grid, p,
                                    succ=succ, v0=v, return_values=True)
            eta_prev = w[i]
    return IndexTable(grid, w, method, arm)


@dataclass
class MwiTable:
    grid: BeliefGrid
    T: int
    m: np.ndarray = field(repr=False)

    def lookup(self, pi):
        return self.m[self.grid.nna(pi)]

    def to_csv(self, path):
        write_csv(path, ["pi", "m"], zip(self.grid.points, self.m))


def modified_whittle(arm: ArmParams, beta: float, grid: BeliefGrid | None,
                     T: int) -> MwiTable:
    """m_T(pi) = V_S,T(pi) - V_NS,T(pi) of the zero-subsidy T-stage recursion."""
    grid = grid or BeliefGrid()
    last = finite_horizon_values(arm, 0.0, beta, grid, T, keep_all=False)[0]
    return MwiTable(grid, T, last.v_s - last.v_ns)
