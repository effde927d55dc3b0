"""Time the compiled value-iteration kernels against the pure-Python ones.

    python3 bench/benchmark.py [--repeat N]

Both backends solve the same grid problems from the same starting vector;
the script checks that the results agree before reporting timings.
"""
import argparse
import time

import numpy as np

from lrb import kernels
from lrb.values import BeliefGrid, Successors
from lrb.verify import THRESHOLD_ARM
from lrb.whittle import NumericParams

BETA = 0.99


def solve(be, s, n, eta):
    v = np.full(n, min(float(s.rs.min()), eta) / (1 - BETA))
    sweeps, _ = be.gsva_solve(v, s.rs, eta, s.rho, s.j1, s.j0, s.j2, s.s1, s.s0, s.s2,
                              BETA, 1e-6 / (1 - BETA), 1_000_000, False)
    return sweeps, v


def search(be, s, n, i):
    p = NumericParams().resolved(THRESHOLD_ARM, BETA)
    v = np.full(n, float(s.rs.min()) / (1 - BETA))
    eta, *_ = be.subsidy_search(i, v, s.rs, s.rho, s.j1, s.j0, s.j2, s.s1, s.s0, s.s2,
                                BETA, float(s.rs[i]), float(p.alpha), float(p.h),
                                float(p.h_inner), int(p.max_sweeps), int(p.cap))
    return eta


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        backends = {"cython": kernels.get_backend("cython")}
    except ImportError:
        print("compiled extension not built; only the Python backend is available")
        backends = {}
    backends["python"] = kernels.get_backend("python")

    print(f"{'task':<34}{'backend':<9}{'seconds':>10}{'speedup':>10}")
    for delta in (0.01, 0.005):
        g = BeliefGrid(delta)
        s = Successors.build(THRESHOLD_ARM, g)
        tasks = {f"value solve, delta={delta}": lambda be: solve(be, s, len(g), 0.5),
                 f"index at pi=0.5, delta={delta}": lambda be: search(be, s, len(g), g.nna(0.5))}
        for name, task in tasks.items():
            res = {b: best_of(lambda: task(be), args.repeat) for b, be in backends.items()}
            base = res["python"][0]
            outs = [np.asarray(o[1] if isinstance(o, tuple) else o) for _, o in res.values()]
            assert all(np.allclose(o, outs[0], atol=1e-8) for o in outs), "backends disagree"
            for b, (t, _) in res.items():
                print(f"{name:<34}{b:<9}{t:>10.4f}{base / t:>9.1f}x")


if __name__ == "__main__":
    main()
