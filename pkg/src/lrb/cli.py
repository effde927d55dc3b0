"""Command-line front end.

    lrb run CONFIG        index tables, bound and simulations
    lrb index CONFIG      index tables only
    lrb value CONFIG      value tables for the config's subsidy list (--eta overrides)
    lrb bound CONFIG      Lagrangian bound and its trace
    lrb simulate CONFIG   policy simulations only
    lrb verify            acceptance checks; nonzero exit if any fails

CONFIG is a path or the name of a bundled example (threshold_demo, example0 ...
example4).
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import config as cfgmod
from . import experiment
from .config import ConfigError


def _load(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(cfgmod.resolve(args.config))
    return cfg.with_overrides(seed=args.seed, beta=args.beta,
                              grid_delta=args.grid_delta, out_dir=args.out_dir)


def cmd_run(args):
    cfg = _load(args)
    runs = experiment.run_experiment(cfg, cfg.out_dir, trace=args.trace)
    for sub, (lb, res) in runs.items():
        head = f"[{sub}] " if sub else ""
        print(f"{head}L_b = {lb.bound:.4f}")
        for name, r in res.items():
            print(f"{head}{name:>4} {r.final_value:.4f} +- {r.final_stderr:.4f}")
    return 0


def cmd_index(args):
    cfg = _load(args)
    for k_e in (cfg.K_e or [None]):
        out = cfg.out_dir if k_e is None else f"{cfg.out_dir}/K_e{k_e}"
        experiment.write_index(cfg, out, cfg.decision_arms(k_e))
    return 0


def cmd_value(args):
    cfg = _load(args)
    if args.eta is not None:
        cfg.etas = args.eta
    experiment.write_values(cfg, cfg.out_dir)
    return 0


def cmd_bound(args):
    cfg = _load(args)
    for k_e in (cfg.K_e or [None]):
        out = cfg.out_dir if k_e is None else f"{cfg.out_dir}/K_e{k_e}"
        res = experiment.write_bound(cfg, out, k_e)
        print(f"{'' if k_e is None else f'K_e={k_e}: '}L_b = {res.bound:.4f} "
              f"at lambda = {res.lambda_star:.4f}")
    return 0


def cmd_simulate(args):
    cfg = _load(args)
    for k_e in (cfg.K_e or [None]):
        out = cfg.out_dir if k_e is None else f"{cfg.out_dir}/K_e{k_e}"
        experiment.write_simulation(experiment.simulate(cfg, k_e, trace=args.trace),
                                    out, args.trace)
    return 0


def cmd_verify(args):
    from .verify import run_checks
    results = run_checks(set(args.criteria) if args.criteria else None)
    failed = [r.criterion for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrb", description="Lazy restless bandit experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, fn, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="config file or bundled example name")
        s.add_argument("--seed", type=int)
        s.add_argument("--beta", type=float)
        s.add_argument("--grid-delta", type=float)
        s.add_argument("--out-dir")
        s.set_defaults(fn=fn)
        return s

    s = with_config("run", cmd_run, "full experiment")
    s.add_argument("--trace", action="store_true", help="also write per-run traces")
    with_config("index", cmd_index, "index tables")
    s = with_config("value", cmd_value, "value tables")
    s.add_argument("--eta", type=float, nargs="*", help="subsidies (overrides the config)")
    with_config("bound", cmd_bound, "Lagrangian bound")
    s = with_config("simulate", cmd_simulate, "policy simulations")
    s.add_argument("--trace", action="store_true")
    s = sub.add_parser("verify", help="acceptance checks")
    s.add_argument("criteria", type=int, nargs="*", help="criterion numbers (default all)")
    s.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
