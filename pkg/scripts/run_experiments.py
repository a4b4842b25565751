#!/usr/bin/env python3
"""Run the Monte Carlo experiments at acceptance scale and write CSV/JSON reports.

    python3 scripts/run_experiments.py --out results            # everything
    python3 scripts/run_experiments.py --skip-slow hurst clt    # a subset
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np
from scipy import stats

from chaoslab.chaos import ChaosVar
from chaoslab.experiments import (
    CounterexampleSum,
    breuer_major_run,
    clt_run,
    density_run,
    exact_rate_run,
    poisson_bounds_run,
    qv_hurst_run,
    qv_kolmogorov_sweep,
    universality_run,
)
from chaoslab.gaussproc import CovSeq
from chaoslab.hermite import HermiteSeries
from chaoslab.kernels import Kernel

LAM = 1 / math.sqrt(2)


def _chi_grid():
    lo, hi = stats.chi2(1).ppf([0.05, 0.95])
    return np.linspace(LAM * (lo - 1), LAM * (hi - 1), 201)


def _experiments(seed: int, threads: int | None):
    z = stats.norm.ppf(0.95)
    return {
        "breuer_major": lambda: [breuer_major_run(HermiteSeries.basis(2), CovSeq.fbm(0.3), 2**14, 2000, seed, threads=threads)],
        "hurst": lambda: [qv_hurst_run(H, 2**14, 500, seed, threads=threads) for H in (0.3, 0.5, 0.7)],
        "qv_sweep": lambda: [qv_kolmogorov_sweep(0.3, [2**k for k in range(8, 14)], 10_000, seed, threads=threads)],
        "clt": lambda: [clt_run("rademacher", n, 100_000, seed, threads=threads) for n in (100, 400, 1600)],
        "poisson": lambda: [poisson_bounds_run([4.0, 16.0, 64.0], 100_000, seed, threads=threads)],
        "universality": lambda: [
            universality_run(CounterexampleSum(10_000), ["gaussian", "rademacher"], 100_000, seed, threads=threads)
        ],
        "density": lambda: [
            density_run([LAM], 100_000, _chi_grid(), seed, threads=threads,
                        reference=lambda x: stats.chi2.pdf(x / LAM + 1, 1) / LAM),
            density_run(ChaosVar(Kernel(np.array([0.6, 0.8]))), 100_000, np.linspace(-z, z, 201), seed,
                        threads=threads, reference=stats.norm().pdf),
        ],
        "exact_rate": lambda: [exact_rate_run(0.3, [0.0], 2**10, 10**6, seed, threads=threads)],
    }


SLOW = {"exact_rate"}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", help="experiments to run (default: all)")
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--skip-slow", action="store_true")
    args = ap.parse_args()
    table = _experiments(args.seed, args.threads)
    names = args.names or list(table)
    unknown = set(names) - set(table)
    if unknown:
        ap.error(f"unknown experiments: {', '.join(sorted(unknown))}; choose from {', '.join(table)}")
    for name in names:
        if args.skip_slow and name in SLOW:
            continue
        t0 = time.perf_counter()
        for i, rep in enumerate(table[name]()):
            if i:
                rep.name = f"{rep.name}_{i}"
            csv_path, _ = rep.write(args.out)
            flags = ", ".join(f"{k}={'ok' if f.passed else 'FAIL'}" for k, f in rep.pass_flags.items())
            print(f"{rep.name}: {csv_path}  [{flags}]")
        print(f"  {name} took {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
