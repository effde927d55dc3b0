"""Grid value iteration for the subsidised single-arm problem.

The belief interval is replaced by a uniform grid and every successor belief
is snapped to its nearest grid point.  That turns the arm into a finite MDP
whose successor table does not depend on the subsidy, so it is built once per
(arm, grid) and reused across subsidy values.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .arm import ArmParams, expected_reward, gamma0, gamma1, gamma2, success_prob

DEFAULT_DELTA = 0.005
DEFAULT_TIE_TOL = 1e-6
MAX_SWEEPS = 100_000


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class StructureViolation(RuntimeError):
    """The play-minus-not-play advantage changes sign more than once."""

    def __init__(self, msg, points):
        super().__init__(msg)
        self.points = points


def default_tolerance(beta: float) -> float:
    """L1 sweep tolerance used when none is given."""
    return 1e-6 / (1.0 - beta)


class BeliefGrid:
    """Uniform grid {0, delta, ..., 1} with nearest-neighbour snapping."""

    def __init__(self, delta: float = DEFAULT_DELTA):
        if not (0.0 < delta <= 0.1):
            raise ValueError(f"grid delta must be in (0, 0.1], got {delta!r}")
        n = int(round(1.0 / delta))
        if abs(n * delta - 1.0) > 1e-9:
            raise ValueError(f"1/delta must be an integer, got delta={delta!r}")
        self.delta = 1.0 / n
        self.n = n
        self.points = np.linspace(0.0, 1.0, n + 1)

    def __len__(self):
        return self.n + 1

    def __eq__(self, other):
        return isinstance(other, BeliefGrid) and other.n == self.n

    def __hash__(self):
        return hash(self.n)

    def __repr__(self):
        return f"BeliefGrid(delta={self.delta!r})"

    def nna(self, x):
        """Index of the nearest grid point; exact ties go to the lower one."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        lo = np.clip(np.floor(x * self.n).astype(np.int64), 0, self.n - 1)
        hi = lo + 1
        pick_hi = np.abs(self.points[hi] - x) < np.abs(x - self.points[lo])
        idx = np.where(pick_hi, hi, lo)
        return int(idx) if idx.ndim == 0 else idx

    def snap(self, x):
        return self.points[self.nna(x)]


@dataclass
class Successors:
    """Snapped successor table of one arm on one grid."""

    arm: ArmParams
    grid: BeliefGrid
    rs: np.ndarray
    rho: np.ndarray
    j1: np.ndarray
    j0: np.ndarray
    j2: np.ndarray
    s1: np.ndarray
    s0: np.ndarray
    s2: np.ndarray

    @classmethod
    def build(cls, arm: ArmParams, grid: BeliefGrid) -> "Successors":
        pts = grid.points
        g1 = gamma1(pts, arm, strict=False)
        g0 = gamma0(pts, arm, strict=False)
        g2 = gamma2(pts, arm)
        j1, j0, j2 = grid.nna(g1), grid.nna(g0), grid.nna(g2)
        idx = np.arange(len(pts))
        # a self-successor counts as "already updated" only if the raw
        # successor belief does not exceed the point itself
        flags = [((j == idx) & (g <= pts)).astype(np.uint8)
                 for j, g in ((j1, g1), (j0, g0), (j2, g2))]
        return cls(arm, grid, np.ascontiguousarray(expected_reward(pts, arm)),
                   np.ascontiguousarray(success_prob(pts, arm)),
                   j1.astype(np.int64), j0.astype(np.int64), j2.astype(np.int64),
                   *flags)


@dataclass
class ValueGrid:
    """Converged (V_S, V_NS, V) on a grid for one subsidy."""

    grid: BeliefGrid
    eta: float
    beta: float
    v_s: np.ndarray
    v_ns: np.ndarray
    v: np.ndarray
    sweeps: int = 0
    residual: float = 0.0

    def at(self, pi):
        i = self.grid.nna(pi)
        return self.v_s[i], self.v_ns[i], self.v[i]

    @property
    def advantage(self):
        return self.v_s - self.v_ns

    def to_csv(self, path):
        write_csv(path, ["pi", "v_s", "v_ns", "v"],
                  zip(self.grid.points, self.v_s, self.v_ns, self.v))


def fmt(x) -> str:
    """12-significant-digit decimal rendering used for every CSV value."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def _solve(succ: Successors, r1, r0, beta, h, v0=None, jacobi=False,
           max_sweeps=MAX_SWEEPS):
    if v0 is None:
        lo = min(float(np.min(r1)), r0)
        v = np.full(len(succ.grid), lo / (1.0 - beta))
    else:
        v = np.array(v0, dtype=float)
    sweeps, resid = kernels.gsva_solve(
        v, r1, float(r0), succ.rho, succ.j1, succ.j0, succ.j2,
        succ.s1, succ.s0, succ.s2, float(beta), float(h), int(max_sweeps),
        bool(jacobi))
    if sweeps < 0:
        raise ConvergenceError(
            f"value iteration did not converge in {max_sweeps} sweeps "
            f"(last L1 change {resid:.3g})", resid)
    return v, sweeps, resid


def successors(arm: ArmParams, grid: BeliefGrid) -> Successors:
    return Successors.build(arm, grid)


def gsva(arm: ArmParams, eta: float, beta: float, grid: BeliefGrid | None = None,
         h: float | None = None, *, succ: Successors | None = None,
         play_reward=None, v0=None, jacobi: bool = False,
         max_sweeps: int = MAX_SWEEPS) -> ValueGrid:
    """Gauss-Seidel value approximation on the belief grid.

    Sweeps run in increasing belief order; successors at or below the
    current point use values already updated in the sweep.  Stops when the
    L1 change between sweeps is at most ``h``.

    ``play_reward`` overrides the per-grid-point reward for playing (used by
    the Lagrangian relaxation); ``v0`` warm-starts the iteration.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    grid = grid or BeliefGrid()
    h = default_tolerance(beta) if h is None else h
    if h <= 0:
        raise ValueError("tolerance h must be positive")
    succ = succ or Successors.build(arm, grid)
    r1 = succ.rs if play_reward is None else np.ascontiguousarray(play_reward, dtype=float)
    v, sweeps, resid = _solve(succ, r1, eta, beta, h, v0, jacobi, max_sweeps)
    v_s = r1 + beta * (succ.rho * v[succ.j1] + (1.0 - succ.rho) * v[succ.j0])
    v_ns = eta + beta * v[succ.j2]
    return ValueGrid(grid, float(eta), float(beta), v_s, v_ns,
                     np.maximum(v_s, v_ns), sweeps, resid)


def finite_horizon_values(arm: ArmParams, eta: float, beta: float,
                          grid: BeliefGrid, T: int, *,
                          succ: Successors | None = None,
                          keep_all: bool = True):
    """Synchronous T-stage recursion starting from V_S,1 = R_S, V_NS,1 = eta.

    Returns the list of ValueGrid for t = 1..T (only the last one if
    ``keep_all`` is False).
    """
    if T < 1:
        raise ValueError("horizon T must be >= 1")
    succ = succ or Successors.build(arm, grid)
    v_s = succ.rs.copy()
    v_ns = np.full(len(grid), float(eta))
    v = np.maximum(v_s, v_ns)
    out = [ValueGrid(grid, eta, beta, v_s, v_ns, v)]
    for _ in range(1, T):
        v_s = succ.rs + beta * (succ.rho * v[succ.j1] + (1.0 - succ.rho) * v[succ.j0])
        v_ns = eta + beta * v[succ.j2]
        v = np.maximum(v_s, v_ns)
        vg = ValueGrid(grid, eta, beta, v_s, v_ns, v)
        if keep_all:
            out.append(vg)
        else:
            out[0] = vg
    return out


@dataclass
class Threshold:
    """Play iff belief <= pi_t (``interior``), or a constant action."""

    kind: str
    pi_t: float | None = None
    index: int | None = None

    def order_key(self) -> float:
        # always_play behaves like a threshold just above 1, never_play below 0
        if self.kind == "always_play":
            return 1.0 + 1e-9
        if self.kind == "never_play":
            return -1e-9
        return self.pi_t


def extract_threshold(vg: ValueGrid, tie_tol: float = DEFAULT_TIE_TOL,
                      strict: bool = True) -> Threshold:
    """Smallest grid point where not playing is at least as good as playing.

    With ``strict`` a second crossing (playing strictly better somewhere above
    the threshold) raises StructureViolation.
    """
    adv = vg.v_s - vg.v_ns
    np_mask = adv <= tie_tol  # v_ns >= v_s - tie_tol
    if not np_mask.any():
        return Threshold("always_play")
    k = int(np.argmax(np_mask))
    bad = np.nonzero(adv[k:] > tie_tol)[0] + k
    if strict and bad.size:
        raise StructureViolation(
            f"advantage crosses zero more than once; threshold at "
            f"{vg.grid.points[k]:.4f} but playing is better at "
            f"{vg.grid.points[bad[:5]].round(4).tolist()}",
            vg.grid.points[bad])
    if k == 0:
        return Threshold("never_play", 0.0, 0)
    return Threshold("interior", float(vg.grid.points[k]), k)


@dataclass
class SweepResult:
    etas: list
    thresholds: list
    monotone: bool
    violations: list


def indexability_sweep(arm: ArmParams, beta: float, grid: BeliefGrid,
                       h: float | None, etas: Sequence[float],
                       tie_tol: float = DEFAULT_TIE_TOL) -> SweepResult:
    """Thresholds over an increasing subsidy list and a monotonicity verdict."""
    etas = [float(e) for e in etas]
    if any(b <= a for a, b in zip(etas, etas[1:])):
        raise ValueError("etas must be strictly increasing")
    succ = Successors.build(arm, grid)
    ths = []
    v0 = None
    for eta in etas:
        vg = gsva(arm, eta, beta, grid, h, succ=succ, v0=v0)
        v0 = vg.v
        ths.append(extract_threshold(vg, tie_tol, strict=False))
    violations = [(etas[i], etas[i + 1]) for i in range(len(ths) - 1)
                  if ths[i + 1].order_key() > ths[i].order_key()]
    return SweepResult(etas, ths, not violations, violations)


def lipschitz_constant(arm: ArmParams, beta: float) -> float | None:
    """kappa * c * (rho1 - rho0) when its validity condition holds, else None."""
    dr = arm.rho1 - arm.rho0
    if dr <= 0:
        return None
    ratio = (arm.R1 - arm.R0) / dr
    b, c = min(1.0, ratio), max(1.0, ratio)
    d = abs(arm.p00 - arm.p10)
    if not (beta < (1 + b) / 4 or 0 < d < (1 + b) / 4):
        return None
    return c * dr / (1.0 - beta * d)


def value_range(arm: ArmParams, eta: float, beta: float):
    lo = min(eta, arm.R0, arm.R1) / (1.0 - beta)
    hi = max(eta, arm.R0, arm.R1) / (1.0 - beta)
    return lo, hi
