"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the simplex projection, one inner solve, the brute-force grid and a
full nested fit on a simulated panel under each backend. The first numba
call per kernel is excluded (compilation, or loading the on-disk cache).
"""

import argparse
import time
from dataclasses import replace

import numpy as np

from scmkit import _kernels, simlab
from scmkit.solver import brute_force_inner, fit, solve_inner
from scmkit.study import PredictorSpec


def best_of(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    y = rng.normal(size=200)
    X0 = rng.uniform(-2, 2, (20, 14))
    X1 = X0 @ rng.dirichlet(np.ones(14)) + rng.normal(scale=0.3, size=20)
    v = rng.dirichlet(np.ones(20))
    G0 = rng.uniform(-2, 2, (4, 5))
    g1 = rng.uniform(-2, 2, 4)
    gv = np.ones(4) / 4
    cfg = simlab.SimConfig(J=10, seed=3)
    panel, _ = simlab.generate_panel(cfg)
    spec = simlab.default_study(cfg, v_strategy="nested", lagged=False)
    spec = replace(spec, predictors=spec.predictors + (PredictorSpec("gdp_pc", (2005, 2010)),))
    return {
        "project_simplex (n=200)": lambda: _kernels.active().project_simplex(y),
        "solve_inner (K=20, J=14)": lambda: solve_inner(X1, X0, v),
        "brute_force_inner (J=5, 0.02)": lambda: brute_force_inner(g1, G0, gv, 0.02),
        "fit nested (K=4, J=10)": lambda: fit(spec, panel),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = ["numpy"] + (["numba"] if _kernels.NUMBA_AVAILABLE else [])
    rows = {}
    for name in names:
        with _kernels.use_backend(name):
            for label, fn in cases().items():
                rows.setdefault(label, {})[name] = best_of(fn, args.repeat)
    width = max(map(len, rows))
    print(f"{'kernel':<{width}}  " + "  ".join(f"{n:>10}" for n in names) + "     speedup")
    for label, t in rows.items():
        cols = "  ".join(f"{t[n] * 1e3:>8.3f}ms" for n in names)
        speed = f"{t['numpy'] / t['numba']:>9.1f}x" if "numba" in t else ""
        print(f"{label:<{width}}  {cols}  {speed}")


if __name__ == "__main__":
    main()
