"""Two-state hidden-Markov arm: parameters, belief maps and per-session means.

Beliefs are the probability that an arm sits in state 0 at the start of a
session.  All belief maps accept scalars or numpy arrays and are evaluated
with identical floating-point expressions in both cases, so a vectorised
simulator and a scalar replay produce the same bits.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

ONE_STEP = "one_step"
K_STEP = "k_step"


class ImpossibleObservation(ValueError):
    """Feedback that has zero probability under the current belief."""


class ReducibleChain(ValueError):
    """The chain has no unique stationary law (p00 = 1 and p10 = 0)."""


def _check_prob(name, value):
    if not (0.0 <= value <= 1.0) or value != value:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ArmParams:
    """One arm.

    ``p00`` and ``p10`` are one-step transition probabilities into state 0,
    ``rho0``/``rho1`` the ACK probabilities and ``R0``/``R1`` the mean session
    rewards for a session that starts in state 0/1.  ``K`` is the number of
    state transitions per session.
    """

    p00: float
    p10: float
    rho0: float
    rho1: float
    R0: float
    R1: float
    K: int = 1
    post_feedback_propagation: str = ONE_STEP

    def __post_init__(self):
        for name in ("p00", "p10", "rho0", "rho1"):
            _check_prob(name, getattr(self, name))
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        object.__setattr__(self, "K", int(self.K))
        if self.R0 < 0 or self.R1 < 0:
            raise ValueError("rewards R0, R1 must be nonnegative")
        # rewards and success probabilities must be ordered the same way
        if np.sign(self.R1 - self.R0) != np.sign(self.rho1 - self.rho0):
            raise ValueError(
                "ordering of (R0, R1) must match ordering of (rho0, rho1)")
        if self.post_feedback_propagation not in (ONE_STEP, K_STEP):
            raise ValueError(
                f"post_feedback_propagation must be {ONE_STEP!r} or {K_STEP!r}")

    @property
    def corr(self) -> float:
        """p00 - p10; positive for state-clinging arms."""
        return self.p00 - self.p10

    @property
    def positively_correlated(self) -> bool:
        return self.p00 > self.p10

    @property
    def negatively_correlated(self) -> bool:
        return self.p00 < self.p10

    def replace(self, **changes) -> "ArmParams":
        return dataclasses.replace(self, **changes)

    def feedback_targets(self):
        """(to-0 probability from state 0, from state 1) used by gamma0/gamma1."""
        if self.post_feedback_propagation == ONE_STEP:
            return self.p00, self.p10
        return k_step_matrix(self)[:, 0]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def k_step_matrix(arm: ArmParams, steps: int | None = None) -> np.ndarray:
    """Transition matrix after ``steps`` (default K) one-step transitions."""
    P = np.array([[arm.p00, 1.0 - arm.p00], [arm.p10, 1.0 - arm.p10]])
    return np.linalg.matrix_power(P, arm.K if steps is None else steps)


def _clip(x):
    return np.clip(x, 0.0, 1.0)


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def gamma1(pi, arm: ArmParams, strict: bool = True):
    """Belief at the next session start after playing and receiving an ACK."""
    a00, a10 = arm.feedback_targets()
    pi = np.asarray(pi, dtype=float)
    den = arm.rho1 * (1.0 - pi) + arm.rho0 * pi
    bad = den <= 0.0
    if np.any(bad):
        if strict:
            raise ImpossibleObservation("ACK has zero probability under this belief")
        # successor is never reached; any belief will do
        den = np.where(bad, 1.0, den)
    num = (1.0 - pi) * arm.rho1 * a10 + pi * arm.rho0 * a00
    return _ret(_clip(num / den))


def gamma0(pi, arm: ArmParams, strict: bool = True):
    """Belief at the next session start after playing and receiving a NACK."""
    a00, a10 = arm.feedback_targets()
    pi = np.asarray(pi, dtype=float)
    den = (1.0 - arm.rho1) * (1.0 - pi) + (1.0 - arm.rho0) * pi
    bad = den <= 0.0
    if np.any(bad):
        if strict:
            raise ImpossibleObservation("NACK has zero probability under this belief")
        # successor is never reached; any belief will do
        den = np.where(bad, 1.0, den)
    num = (1.0 - pi) * (1.0 - arm.rho1) * a10 + pi * (1.0 - arm.rho0) * a00
    return _ret(_clip(num / den))


def gamma2(pi, arm: ArmParams):
    """Belief after K unobserved transitions (arm not played)."""
    pi = np.asarray(pi, dtype=float)
    d = arm.p00 - arm.p10
    dk = np.power(d, arm.K)
    if d == 0.0:
        out = np.full_like(pi, arm.p10) if pi.ndim else np.float64(arm.p10)
    elif d == 1.0:
        out = pi  # p00 = 1, p10 = 0: both states absorbing
    else:
        out = dk * pi + arm.p10 * (1.0 - dk) / ((1.0 - arm.p00) + arm.p10)
    return _ret(_clip(out))


def stationary_q(arm: ArmParams) -> float:
    """Stationary probability of state 0."""
    if arm.p00 == 1.0 and arm.p10 == 0.0:
        raise ReducibleChain("p00 = 1 and p10 = 0: no unique stationary belief")
    return arm.p10 / ((1.0 - arm.p00) + arm.p10)  # no cancellation near p00 = 1


def expected_reward(pi, arm: ArmParams):
    """Mean session reward pi*R0 + (1-pi)*R1."""
    pi = np.asarray(pi, dtype=float)
    return _ret(pi * arm.R0 + (1.0 - pi) * arm.R1)


def success_prob(pi, arm: ArmParams):
    """ACK probability pi*rho0 + (1-pi)*rho1."""
    pi = np.asarray(pi, dtype=float)
    return _ret(pi * arm.rho0 + (1.0 - pi) * arm.rho1)
