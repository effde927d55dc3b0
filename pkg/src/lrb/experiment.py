"""Experiment orchestration: index tables, value tables, the Lagrangian bound
and policy simulations, each written as CSV into an output directory.

File layout (``m`` counts arms from 1):

    index_arm{m}.csv           pi,w,method
    mwi_arm{m}.csv             pi,m
    value_arm{m}.csv           eta,pi,v_s,v_ns,v
    thresholds.csv             arm,eta,kind,pi_t
    bound.csv                  lambda_star,bound,golden_lambda,golden_bound,converged
    bound_trace.csv            t,lambda,value,subgradient
    sim_{policy}.csv           session,mean_discounted_cum_reward,stderr
    choice_{policy}.csv        arm,choice_fraction
    trace_{policy}.csv         run,session,arm,feedback,reward   (with trace)
    summary.csv                policy,final_value,stderr

With a K_e list each estimate gets its own ``K_e{k}`` subdirectory.
"""
from __future__ import annotations

import logging
from pathlib import Path

from .config import ExperimentConfig
from .lagrange import LagrangeResult, default_steps, lagrange_bound
from .sim import PolicySpec, _parallel_map, run_policy
from .values import Successors, extract_threshold, gsva, write_csv
from .whittle import IndexTable, MwiTable, build_index_table, modified_whittle

log = logging.getLogger(__name__)


def _out(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def index_tables(cfg: ExperimentConfig, arms=None) -> list[IndexTable]:
    arms = cfg.arms if arms is None else arms
    grid, npar = cfg.grid, cfg.numeric_params
    return _parallel_map(lambda a: build_index_table(a, cfg.beta, grid, npar), arms)


def mwi_tables(cfg: ExperimentConfig, arms=None) -> list[MwiTable]:
    arms = cfg.arms if arms is None else arms
    return [modified_whittle(a, cfg.beta, cfg.grid, cfg.mwi_T) for a in arms]


def write_index(cfg: ExperimentConfig, out, arms=None) -> list[IndexTable]:
    out = _out(out)
    tabs = index_tables(cfg, arms)
    for m, t in enumerate(tabs, 1):
        t.to_csv(out / f"index_arm{m}.csv")
    return tabs


def write_values(cfg: ExperimentConfig, out) -> None:
    out = _out(out)
    grid = cfg.grid
    th_rows = []
    for m, arm in enumerate(cfg.arms, 1):
        succ = Successors.build(arm, grid)
        rows = []
        v0 = None
        for eta in cfg.etas:
            vg = gsva(arm, eta, cfg.beta, grid, cfg.tolerance, succ=succ, v0=v0)
            v0 = vg.v
            rows.extend((eta, p, s, n, v) for p, s, n, v
                        in zip(grid.points, vg.v_s, vg.v_ns, vg.v))
            th = extract_threshold(vg, strict=False)
            th_rows.append((m, eta, th.kind, "" if th.pi_t is None else th.pi_t))
        write_csv(out / f"value_arm{m}.csv", ["eta", "pi", "v_s", "v_ns", "v"], rows)
    write_csv(out / "thresholds.csv", ["arm", "eta", "kind", "pi_t"], th_rows)


def bound(cfg: ExperimentConfig, k_e=None) -> LagrangeResult:
    """Bound for the arms as modelled with estimate ``k_e`` (true K if None)."""
    sc = cfg.sim_config(k_e)
    steps = None
    if cfg.lambda_alpha0 is not None:
        steps = default_steps(cfg.lambda_alpha0, cfg.lambda_tau)
    return lagrange_bound(sc.model_arms, sc.beliefs0(), cfg.beta, cfg.grid,
                          lambda0=cfg.lambda0, steps=steps, tol=cfg.lambda_tol,
                          h=cfg.tolerance, cap=cfg.lambda_cap)


def write_bound(cfg: ExperimentConfig, out, k_e=None) -> LagrangeResult:
    out = _out(out)
    res = bound(cfg, k_e)
    res.to_csv(out / "bound_trace.csv")
    write_csv(out / "bound.csv",
              ["lambda_star", "bound", "golden_lambda", "golden_bound", "converged"],
              [(res.lambda_star, res.bound, res.golden_lambda, res.golden_bound,
                int(res.converged))])
    return res


def policy_specs(cfg: ExperimentConfig, model_arms, index=None,
                 mwi=None) -> list[PolicySpec]:
    specs = []
    for kind in cfg.policies:
        if kind == "WI":
            specs.append(PolicySpec("WI", index or index_tables(cfg, model_arms)))
        elif kind == "MWI":
            specs.append(PolicySpec("MWI", mwi or mwi_tables(cfg, model_arms)))
        else:
            specs.append(PolicySpec(kind))
    return specs


def simulate(cfg: ExperimentConfig, k_e=None, index=None, mwi=None,
             trace=False) -> dict:
    sc = cfg.sim_config(k_e)
    return {p.name: run_policy(sc, p, trace)
            for p in policy_specs(cfg, sc.model_arms, index, mwi)}


def write_simulation(results: dict, out, trace=False) -> None:
    out = _out(out)
    rows = []
    for name, r in results.items():
        r.to_csv(out / f"sim_{name}.csv")
        r.choice_csv(out / f"choice_{name}.csv")
        if trace:
            r.trace_csv(out / f"trace_{name}.csv")
        rows.append((name, r.final_value, r.final_stderr))
    write_csv(out / "summary.csv", ["policy", "final_value", "stderr"], rows)


def run_experiment(cfg: ExperimentConfig, out=None, trace=False) -> dict:
    """Everything for one config; returns {subdir or "": (bound, results)}."""
    out = _out(out or cfg.out_dir)
    runs = {}
    for k_e in (cfg.K_e or [None]):
        sub = out if k_e is None else _out(out / f"K_e{k_e}")
        model = cfg.decision_arms(k_e)
        log.info("%s%s: index tables", cfg.name, "" if k_e is None else f" K_e={k_e}")
        tabs = write_index(cfg, sub, model)
        mwi = None
        if "MWI" in cfg.policies:
            mwi = mwi_tables(cfg, model)
            for m, t in enumerate(mwi, 1):
                t.to_csv(sub / f"mwi_arm{m}.csv")
        if cfg.etas:
            write_values(cfg, sub)
        log.info("%s: bound", cfg.name)
        lb = write_bound(cfg, sub, k_e)
        log.info("%s: simulating %s", cfg.name, ", ".join(cfg.policies) or "no policies")
        res = simulate(cfg, k_e, tabs, mwi, trace)
        write_simulation(res, sub, trace)
        runs["" if k_e is None else f"K_e{k_e}"] = (lb, res)
    return runs

