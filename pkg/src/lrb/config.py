"""Experiment configuration files.

Flat ``key = value`` lines for experiment-wide settings followed by one
``[arm]`` block per arm.  ``#`` starts a comment.  Lists are comma separated.

    name = example1
    beta = 0.99
    grid_delta = 0.005
    policies = WI, MWI, MP, NUR, RR, UR

    [arm]
    p00 = 0.45
    p10 = 0.45
    rho0 = 0
    rho1 = 0.9
    R0 = 0
    R1 = 0.9
    K = 1000

Every problem found while parsing is collected and reported together in a
single ConfigError.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .arm import ONE_STEP, ArmParams
from .sim import POLICIES, REWARD_ACCOUNTING, SimConfig
from .values import BeliefGrid, default_tolerance
from .whittle import NumericParams

ARM_KEYS = ("p00", "p10", "rho0", "rho1", "R0", "R1")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class ExperimentConfig:
    arms: list
    name: str = "experiment"
    beta: float = 0.99
    grid_delta: float = 0.005
    h: float | None = None
    # subsidy iteration
    eta0: float | None = None
    alpha: float | None = None
    index_h: float = 1e-5
    index_cap: int = 10_000
    # multiplier descent
    lambda0: float | None = None
    lambda_alpha0: float | None = None
    lambda_tau: float = 50.0
    lambda_tol: float = 0.5
    lambda_cap: int = 2000
    # simulation
    S_max: int = 1000
    L: int = 500
    seed: int = 0
    initial_beliefs: str | list = "stationary"
    reward_accounting: str = "state"
    policies: list = field(default_factory=lambda: list(POLICIES))
    mwi_T: int = 1000
    K_e: list | None = None
    etas: list = field(default_factory=list)
    out_dir: str = "out"

    @property
    def grid(self) -> BeliefGrid:
        return BeliefGrid(self.grid_delta)

    @property
    def tolerance(self) -> float:
        return default_tolerance(self.beta) if self.h is None else self.h

    @property
    def numeric_params(self) -> NumericParams:
        return NumericParams(self.eta0, self.alpha, self.index_h, None, self.index_cap)

    def decision_arms(self, k_e: int | None = None) -> list:
        """Arms as the decision maker models them (K replaced by ``k_e``)."""
        if k_e is None:
            return list(self.arms)
        return [a.replace(K=int(k_e)) for a in self.arms]

    def sim_config(self, k_e: int | None = None) -> SimConfig:
        dec = None if k_e is None else self.decision_arms(k_e)
        return SimConfig(self.arms, self.beta, self.S_max, self.L, self.seed,
                         self.initial_beliefs, dec, self.reward_accounting)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        out = dataclasses.replace(self, **kw)
        validate(out)
        return out


# key -> (converter, dataclass field)
def _float(s):
    return float(s)


def _int(s):
    f = float(s)
    if f != int(f):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(f)


def _opt_float(s):
    return None if s.lower() in ("none", "auto", "") else float(s)


def _list(conv):
    def parse(s):
        return [conv(x.strip()) for x in s.split(",") if x.strip()]
    return parse


def _beliefs(s):
    if s.strip() in ("stationary", "uniform_random"):
        return s.strip()
    return _list(float)(s)


def _policies(s):
    return [x.strip().upper() for x in s.split(",") if x.strip()]


GLOBAL_KEYS = {
    "name": str,
    "beta": _float,
    "grid_delta": _float,
    "h": _opt_float,
    "eta0": _opt_float,
    "alpha": _opt_float,
    "index_h": _float,
    "index_cap": _int,
    "lambda0": _opt_float,
    "lambda_alpha0": _opt_float,
    "lambda_tau": _float,
    "lambda_tol": _float,
    "lambda_cap": _int,
    "S_max": _int,
    "L": _int,
    "seed": _int,
    "initial_beliefs": _beliefs,
    "reward_accounting": str,
    "policies": _policies,
    "mwi_T": _int,
    "K_e": _list(_int),
    "etas": _list(float),
    "out_dir": str,
}

ARM_CONVERTERS = {**{k: _float for k in ARM_KEYS}, "K": _int,
                  "post_feedback_propagation": str}


def parse(text: str, source: str = "<string>") -> ExperimentConfig:
    problems = []
    glob = {}
    arm_blocks = []
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("["):
            if line.lower() != "[arm]":
                problems.append(f"{where}: unknown section {line}")
                cur = {}
                continue
            cur = {"_where": where}
            arm_blocks.append(cur)
            continue
        if "=" not in line:
            problems.append(f"{where}: expected 'key = value', got {line!r}")
            continue
        key, val = (x.strip() for x in line.split("=", 1))
        table = GLOBAL_KEYS if cur is None else ARM_CONVERTERS
        if key not in table:
            scope = "experiment" if cur is None else "arm"
            problems.append(f"{where}: unknown {scope} field {key!r}")
            continue
        try:
            value = table[key](val)
        except ValueError as e:
            problems.append(f"{where}: field {key!r}: {e}")
            continue
        (glob if cur is None else cur)[key] = value

    arms = []
    for n, blk in enumerate(arm_blocks, 1):
        where = blk.pop("_where")
        missing = [k for k in ARM_KEYS if k not in blk]
        if missing:
            problems.append(f"{where}: arm {n} is missing field(s) {', '.join(missing)}")
            continue
        blk.setdefault("K", 1)
        blk.setdefault("post_feedback_propagation", ONE_STEP)
        try:
            arms.append(ArmParams(**blk))
        except ValueError as e:
            problems.append(f"{where}: arm {n}: {e}")
    if not arm_blocks:
        problems.append(f"{source}: no [arm] blocks")
    cfg = ExperimentConfig(arms=arms, **glob)
    # range checks run even after line errors so one pass reports everything
    whole = len(arms) == len(arm_blocks)
    problems += [f"{source}: {p}" for p in _field_problems(cfg, whole)]
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    problems = _field_problems(cfg)
    if problems:
        raise ConfigError(problems)


def _field_problems(cfg: ExperimentConfig, arms_complete: bool = True) -> list:
    problems = []
    if not 0 < cfg.beta < 1:
        problems.append(f"field 'beta': must lie in (0, 1), got {cfg.beta}")
    try:
        BeliefGrid(cfg.grid_delta)
    except ValueError as e:
        problems.append(f"field 'grid_delta': {e}")
    if cfg.h is not None and cfg.h <= 0:
        problems.append("field 'h': must be positive")
    for key in ("S_max", "L", "mwi_T", "index_cap", "lambda_cap"):
        if getattr(cfg, key) < 1:
            problems.append(f"field {key!r}: must be >= 1")
    if cfg.reward_accounting not in REWARD_ACCOUNTING:
        problems.append(f"field 'reward_accounting': must be one of {REWARD_ACCOUNTING}")
    bad = [p for p in cfg.policies if p not in POLICIES]
    if bad:
        problems.append(f"field 'policies': unknown policy {', '.join(bad)}")
    if cfg.K_e is not None and any(k < 1 for k in cfg.K_e):
        problems.append("field 'K_e': every value must be >= 1")
    if not isinstance(cfg.initial_beliefs, str):
        if arms_complete and len(cfg.initial_beliefs) != len(cfg.arms):
            problems.append(f"field 'initial_beliefs': need {len(cfg.arms)} values, "
                            f"got {len(cfg.initial_beliefs)}")
        if any(not 0 <= b <= 1 for b in cfg.initial_beliefs):
            problems.append("field 'initial_beliefs': values must lie in [0, 1]")
    return problems


def load(path) -> ExperimentConfig:
    p = Path(path)
    return parse(p.read_text(), str(p))


def bundled(name: str) -> Path:
    """Path of a bundled example config (``threshold_demo``, ``example0`` ... ``example4``)."""
    p = Path(__file__).parent / "configs" / f"{name}.cfg"
    if not p.exists():
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return p


def resolve(name_or_path) -> Path:
    p = Path(name_or_path)
    return p if p.exists() else bundled(str(name_or_path))
