"""Monte-Carlo simulation of the M-armed lazy restless bandit.

Runs are vectorised: a chunk of sample paths advances one session at a time.
Every run owns a Philox stream keyed by (seed, run) from which it draws, in
this order, the initial-state uniforms, the per-session state uniforms, the
feedback uniforms and the policy uniforms.  Because every arm evolves every
session whatever is played, two policies run with the same seed see the same
hidden-state paths (common random numbers).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .arm import (ArmParams, expected_reward, gamma0, gamma1, gamma2,
                  k_step_matrix, stationary_q)
from .values import BeliefGrid, write_csv
from .whittle import (IndexTable, MwiTable, NumericParams, build_index_table,
                      modified_whittle)

POLICIES = ("WI", "MWI", "MP", "UR", "NUR", "RR")
REWARD_ACCOUNTING = ("state", "belief")
CHUNK = 64


def n_threads() -> int:
    """Worker count from LRB_THREADS (0 or unset = one per CPU)."""
    n = int(os.environ.get("LRB_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class PolicySpec:
    kind: str
    tables: list | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")
        if self.kind in ("WI", "MWI"):
            if not self.tables:
                raise ValueError(f"{self.kind} needs one table per arm")
            grids = {t.grid for t in self.tables}
            if len(grids) != 1:
                raise ValueError("index tables must share one grid")
        self.name = self.name or self.kind

    @property
    def grid(self) -> BeliefGrid | None:
        return self.tables[0].grid if self.tables else None


def whittle_policy(arms, beta, grid=None, numeric_params=None) -> PolicySpec:
    grid = grid or BeliefGrid()
    tabs = _parallel_map(
        lambda a: build_index_table(a, beta, grid, numeric_params), arms)
    return PolicySpec("WI", tabs)


def mwi_policy(arms, beta, grid=None, T: int = 1000) -> PolicySpec:
    grid = grid or BeliefGrid()
    return PolicySpec("MWI", [modified_whittle(a, beta, grid, T) for a in arms])


def _parallel_map(fn, items):
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


@dataclass
class SimConfig:
    """Simulation settings.

    ``initial_beliefs`` is ``"stationary"``, ``"uniform_random"`` (one vector
    drawn from the seed and shared by all runs) or an explicit list.
    ``decision_arms`` are the models the decision maker believes in (for
    example with a wrong K); the true ``arms`` drive states, rewards and
    feedback.

    ``reward_accounting`` picks what a play earns: ``"state"`` credits R of
    the played arm's realised start state, ``"belief"`` credits the expected
    reward R_S(pi) at the decision maker's belief (the hidden states still
    drive feedback).
    """

    arms: list
    beta: float = 0.99
    S_max: int = 1000
    L: int = 500
    seed: int = 0
    initial_beliefs: str | list = "stationary"
    decision_arms: list | None = None
    reward_accounting: str = "state"

    def __post_init__(self):
        if self.reward_accounting not in REWARD_ACCOUNTING:
            raise ValueError(f"reward_accounting must be one of {REWARD_ACCOUNTING}, "
                             f"got {self.reward_accounting!r}")
        if self.S_max < 1 or self.L < 1:
            raise ValueError("S_max and L must be >= 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.decision_arms is not None and len(self.decision_arms) != len(self.arms):
            raise ValueError("decision_arms must match arms in length")
        if not isinstance(self.initial_beliefs, str):
            if len(self.initial_beliefs) != len(self.arms):
                raise ValueError("need one initial belief per arm")
        elif self.initial_beliefs not in ("stationary", "uniform_random"):
            raise ValueError(f"unknown initial belief mode {self.initial_beliefs!r}")

    @property
    def M(self) -> int:
        return len(self.arms)

    @property
    def model_arms(self) -> list:
        return self.decision_arms or self.arms

    def beliefs0(self) -> np.ndarray:
        if isinstance(self.initial_beliefs, str):
            if self.initial_beliefs == "stationary":
                return np.array([stationary_q(a) for a in self.model_arms])
            rng = np.random.Generator(np.random.Philox(key=[self.seed, 2**63]))
            return rng.random(self.M)
        return np.asarray(self.initial_beliefs, dtype=float)


@dataclass
class SimResult:
    policy: str
    mean_discounted_cum_reward: np.ndarray
    stderr: np.ndarray
    choice_fraction: np.ndarray
    trace: dict | None = field(default=None, repr=False)

    @property
    def final_value(self) -> float:
        return float(self.mean_discounted_cum_reward[-1])

    @property
    def final_stderr(self) -> float:
        return float(self.stderr[-1])

    def to_csv(self, path):
        n = len(self.mean_discounted_cum_reward)
        write_csv(path, ["session", "mean_discounted_cum_reward", "stderr"],
                  zip(range(1, n + 1), self.mean_discounted_cum_reward, self.stderr))

    def choice_csv(self, path):
        write_csv(path, ["arm", "choice_fraction"],
                  zip(range(1, len(self.choice_fraction) + 1), self.choice_fraction))

    def trace_csv(self, path):
        if self.trace is None:
            raise ValueError("simulation was run without trace=True")
        t = self.trace
        L, S = t["actions"].shape
        rows = ((l, s + 1, t["actions"][l, s] + 1, t["feedback"][l, s], t["rewards"][l, s])
                for l in range(L) for s in range(S))
        write_csv(path, ["run", "session", "arm", "feedback", "reward"], rows)


def run_stream(seed: int, run: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, run]))


def draw_run(seed: int, run: int, M: int, S_max: int):
    """The uniforms one run consumes, in a fixed order."""
    rng = run_stream(seed, run)
    return (rng.random(M), rng.random((S_max, M)), rng.random(S_max),
            rng.random(S_max))


def evolve_state(state, arm: ArmParams, rng_or_u, steps: int | None = None):
    """Advance hidden state(s) by ``steps`` (default K) transitions.

    Sampling uses the corresponding row of P^steps, which is the law of the
    state after that many independent one-step transitions.  The third
    argument is a Generator or pre-drawn uniforms shaped like ``state``.
    """
    state = np.asarray(state)
    to0 = k_step_matrix(arm, steps)[:, 0]
    u = (rng_or_u.random(state.shape) if isinstance(rng_or_u, np.random.Generator)
         else np.asarray(rng_or_u))
    out = np.where(u < to0[state], 0, 1)
    return int(out) if out.ndim == 0 else out


def sample_feedback(start_state, arm: ArmParams, rng_or_u):
    """ACK (1) with probability rho of the session's start state."""
    start_state = np.asarray(start_state)
    rho = np.array([arm.rho0, arm.rho1])[start_state]
    u = (rng_or_u.random(start_state.shape) if isinstance(rng_or_u, np.random.Generator)
         else np.asarray(rng_or_u))
    out = (u < rho).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def select_arm(policy: PolicySpec, beliefs, session: int, model_arms, u=None):
    """Arm chosen for each row of ``beliefs`` (shape (runs, M) or (M,)).

    ``session`` counts from 1.  ``u`` supplies the per-run uniform used by the
    randomised policies.  Ties go to the lowest arm id.
    """
    b = np.atleast_2d(np.asarray(beliefs, dtype=float))
    n, M = b.shape
    if policy.kind in ("WI", "MWI"):
        g = policy.grid
        score = np.empty_like(b)
        for m, tab in enumerate(policy.tables):
            vals = tab.w if isinstance(tab, IndexTable) else tab.m
            score[:, m] = vals[g.nna(b[:, m])]
        out = np.argmax(score, axis=1)
    elif policy.kind == "MP":
        score = np.column_stack([expected_reward(b[:, m], a) for m, a in enumerate(model_arms)])
        out = np.argmax(score, axis=1)
    elif policy.kind == "RR":
        out = np.full(n, (session - 1) % M)
    else:
        u = np.broadcast_to(np.asarray(u, dtype=float), (n,))
        if policy.kind == "UR":
            out = np.minimum((u * M).astype(np.int64), M - 1)
        else:
            w = np.column_stack([expected_reward(b[:, m], a) for m, a in enumerate(model_arms)])
            tot = w.sum(axis=1, keepdims=True)
            flat = tot[:, 0] <= 0
            w = np.where(flat[:, None], 1.0, w)
            cdf = np.cumsum(w, axis=1)
            cdf /= cdf[:, -1:]
            out = np.minimum((u[:, None] >= cdf).sum(axis=1), M - 1)
    out = out.astype(np.int64)
    return int(out[0]) if np.ndim(beliefs) == 1 else out


def update_beliefs(b, played, feedback, model_arms):
    """Next-session beliefs for a (runs, M) array, in place."""
    for m, arm in enumerate(model_arms):
        mask = played == m
        col = b[:, m]
        new = gamma2(col, arm)
        if mask.any():
            ack = mask & (feedback == 1)
            nack = mask & (feedback == 0)
            if ack.any():
                new[ack] = gamma1(col[ack], arm)
            if nack.any():
                new[nack] = gamma0(col[nack], arm)
        b[:, m] = new
    return b


def _simulate_chunk(cfg: SimConfig, policy: PolicySpec, runs: range, trace: bool):
    M, S = cfg.M, cfg.S_max
    n = len(runs)
    draws = [draw_run(cfg.seed, r, M, S) for r in runs]
    u_init = np.stack([d[0] for d in draws])
    u_state = np.stack([d[1] for d in draws])
    u_fb = np.stack([d[2] for d in draws])
    u_pol = np.stack([d[3] for d in draws])

    b0 = cfg.beliefs0()
    b = np.tile(b0, (n, 1))
    state = np.where(u_init < b0, 0, 1)
    to0 = np.stack([k_step_matrix(a)[:, 0] for a in cfg.arms])      # (M, 2)
    R = np.array([[a.R0, a.R1] for a in cfg.arms])
    rho = np.array([[a.rho0, a.rho1] for a in cfg.arms])
    disc = cfg.beta ** np.arange(S)
    rows = np.arange(n)
    arm_ids = np.arange(M)
    by_belief = cfg.reward_accounting == "belief"

    cum = np.zeros((n, S))
    counts = np.zeros((n, M))
    total = np.zeros(n)
    if trace:
        t_actions = np.empty((n, S), dtype=np.int64)
        t_feedback = np.empty((n, S), dtype=np.int64)
        t_rewards = np.empty((n, S))
        t_beliefs = np.empty((n, S + 1, M))
        t_states = np.empty((n, S, M), dtype=np.int64)
        t_beliefs[:, 0] = b
    for s in range(S):
        a = select_arm(policy, b, s + 1, cfg.model_arms, u_pol[:, s])
        y = state[rows, a]
        if by_belief:
            ba = b[rows, a]
            r = ba * R[a, 0] + (1.0 - ba) * R[a, 1]
        else:
            r = R[a, y]
        fb = (u_fb[:, s] < rho[a, y]).astype(np.int64)
        total += disc[s] * r
        cum[:, s] = total
        counts[rows, a] += 1
        if trace:
            t_actions[:, s] = a
            t_feedback[:, s] = fb
            t_rewards[:, s] = r
            t_states[:, s] = state
        state = np.where(u_state[:, s] < to0[arm_ids, state], 0, 1)
        update_beliefs(b, a, fb, cfg.model_arms)
        if trace:
            t_beliefs[:, s + 1] = b
    out = dict(cum=cum, frac=counts / S)
    if trace:
        out["trace"] = dict(actions=t_actions, feedback=t_feedback,
                            rewards=t_rewards, beliefs=t_beliefs,
                            states=t_states)
    return out


def run_policy(cfg: SimConfig, policy: PolicySpec, trace: bool = False) -> SimResult:
    """Simulate ``cfg.L`` runs of ``cfg.S_max`` sessions under ``policy``."""
    chunks = [range(i, min(i + CHUNK, cfg.L)) for i in range(0, cfg.L, CHUNK)]
    parts = _parallel_map(lambda rs: _simulate_chunk(cfg, policy, rs, trace), chunks)
    cum = np.concatenate([p["cum"] for p in parts])
    frac = np.concatenate([p["frac"] for p in parts])
    mean = cum.mean(axis=0)
    se = (cum.std(axis=0, ddof=1) / np.sqrt(cfg.L)) if cfg.L > 1 else np.zeros(cfg.S_max)
    tr = None
    if trace:
        tr = {k: np.concatenate([p["trace"][k] for p in parts])
              for k in parts[0]["trace"]}
        tr["initial_beliefs"] = cfg.beliefs0()
    return SimResult(policy.name, mean, se, frac.mean(axis=0), tr)


def compare_policies(cfg: SimConfig, policies: Sequence[PolicySpec],
                     trace: bool = False) -> dict:
    """run_policy for each policy on the same seed; keyed by policy name."""
    return {p.name: run_policy(cfg, p, trace) for p in policies}
