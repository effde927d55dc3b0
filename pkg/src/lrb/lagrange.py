"""Lagrangian upper bound on the optimal multi-arm value.

Relaxing "exactly N arms per session" with a multiplier lambda decouples the
arms: each arm solves its own problem with play reward R_S(pi) - lambda and
zero reward for resting, and the relaxed value is
N*lambda/(1-beta) + sum_m V_m(pi_m).  That value is convex and piecewise
linear in lambda; its minimum over lambda >= 0 bounds every policy.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .arm import ArmParams
from .values import BeliefGrid, Successors, default_tolerance, gsva, write_csv

log = logging.getLogger(__name__)


class BoundError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


class DecoupledValue:
    """lambda -> relaxed value for a fixed arm set and initial beliefs.

    Successor tables and the last value vector of each arm are cached so that
    consecutive multipliers warm-start the value solves.
    """

    def __init__(self, arms: Sequence[ArmParams], initial_beliefs: Sequence[float],
                 beta: float, grid: BeliefGrid | None = None,
                 h: float | None = None, n_play: int = 1):
        if len(arms) != len(initial_beliefs):
            raise ValueError("need one initial belief per arm")
        self.arms = list(arms)
        self.beta = float(beta)
        self.grid = grid or BeliefGrid()
        self.h = default_tolerance(beta) if h is None else h
        self.n_play = n_play
        self.succ = [Successors.build(a, self.grid) for a in self.arms]
        self.idx = [self.grid.nna(p) for p in initial_beliefs]
        self._warm = [None] * len(self.arms)
        self.evaluations = 0

    def arm_values(self, lam: float) -> np.ndarray:
        out = np.empty(len(self.arms))
        for m, (arm, s) in enumerate(zip(self.arms, self.succ)):
            vg = gsva(arm, 0.0, self.beta, self.grid, self.h, succ=s,
                      play_reward=s.rs - lam, v0=self._warm[m])
            self._warm[m] = vg.v
            out[m] = vg.v[self.idx[m]]
        return out

    def __call__(self, lam: float) -> float:
        if lam < 0:
            raise ValueError("multiplier must be nonnegative")
        self.evaluations += 1
        return self.n_play * lam / (1.0 - self.beta) + float(self.arm_values(lam).sum())


def decoupled_value(lam: float, arms: Sequence[ArmParams],
                    initial_beliefs: Sequence[float], beta: float,
                    grid: BeliefGrid | None = None, h: float | None = None) -> float:
    """N*lam/(1-beta) + sum of per-arm penalised values at the initial beliefs (N = 1)."""
    return DecoupledValue(arms, initial_beliefs, beta, grid, h)(lam)


def default_steps(alpha0: float, tau: float = 50.0) -> Callable[[int], float]:
    """alpha_t = alpha0 / (1 + t / tau)."""
    return lambda t: alpha0 / (1.0 + t / tau)


@dataclass
class LagrangeResult:
    lambda_star: float
    bound: float
    trace: list = field(default_factory=list)  # (t, lambda, value, subgradient)
    converged: bool = True
    golden_lambda: float | None = None
    golden_bound: float | None = None

    def to_csv(self, path):
        write_csv(path, ["t", "lambda", "value", "subgradient"], self.trace)


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-4, max_iter: int = 200):
    """Minimise a convex function on [lo, hi]; returns (x, f(x))."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    cands = [(fc, c), (fd, d), (f(lo), lo)]
    fx, x = min(cands)
    return x, fx


def lagrange_bound(arms: Sequence[ArmParams], initial_beliefs: Sequence[float],
                   beta: float, grid: BeliefGrid | None = None, *,
                   lambda0: float | None = None,
                   steps: Callable[[int], float] | None = None,
                   tol: float = 0.5, h: float | None = None,
                   cap: int = 2000, fd_eps: float = 1e-3,
                   cross_check: bool = True) -> LagrangeResult:
    """Minimise the relaxed value over lambda >= 0 by finite-difference descent.

    g_t = (V(lambda_t) - V(lambda_{t-1})) / (lambda_t - lambda_{t-1}) and
    lambda_{t+1} = max(0, lambda_t - alpha_t * g_t); stops once |g_t| <= tol.
    When two consecutive multipliers coincide the second is nudged by
    ``fd_eps`` so the difference quotient stays defined.

    With ``cross_check`` a golden-section search over [0, max R] is run as
    well and the smaller of the two values is reported as the bound.
    """
    f = DecoupledValue(arms, initial_beliefs, beta, grid, h)
    rmax = max(max(a.R0, a.R1) for a in arms)
    lam_prev = rmax / 2 if lambda0 is None else float(lambda0)
    # step size: a unit subgradient moves lambda by a small fraction of the
    # reward scale
    steps = steps or default_steps(0.02 * rmax * (1.0 - beta))
    v_prev = f(lam_prev)
    lam = lam_prev + fd_eps
    trace = [(0, lam_prev, v_prev, float("nan"))]
    best = (v_prev, lam_prev)
    converged = False
    for t in range(1, cap + 1):
        if lam == lam_prev:
            lam = lam_prev + fd_eps
        v = f(lam)
        g = (v - v_prev) / (lam - lam_prev)
        trace.append((t, lam, v, g))
        best = min(best, (v, lam))
        if abs(g) <= tol:
            converged = True
            break
        lam_prev, v_prev = lam, v
        lam = max(0.0, lam - steps(t) * g)
    res = LagrangeResult(lam, v, trace, converged)
    if cross_check:
        gl, gv = golden_section(f, 0.0, rmax)
        res.golden_lambda, res.golden_bound = gl, gv
        if gv < best[0]:
            best = (gv, gl)
    if not converged and not cross_check:
        raise BoundError(f"subgradient iteration hit the {cap}-step cap", trace)
    if not converged:
        log.warning("finite-difference descent did not meet |g| <= %g in %d steps; "
                    "using the golden-section minimum", tol, cap)
    res.bound, res.lambda_star = best
    return res
