#!/usr/bin/env python3
"""Tabulate the two difference bounds for the Poisson Stein solution f_C.

For random (C, lambda) this reports how often sup|Df| <= (1 - e^-lambda)/lambda
and sup|D^2 f| <= (2/lambda) sup|Df| hold, by lambda range, and prints the
closed-form case C = {0}, lambda = 20 where the second bound fails.
"""

from __future__ import annotations

import math

import numpy as np

from chaoslab.stein import chen_solve

RANGES = [(0.05, 1.0), (1.0, 2.0), (2.0, 5.0), (5.0, 20.0)]


def main(trials: int = 200, seed: int = 1) -> None:
    rng = np.random.default_rng(seed)
    print("lambda range   trials  |Df| bound fails  |D2f| bound fails")
    for lo, hi in RANGES:
        bad1 = bad2 = 0
        for _ in range(trials):
            lam = float(np.exp(rng.uniform(math.log(lo), math.log(hi))))
            C = set(np.flatnonzero(rng.random(int(3 * lam) + 10) < rng.uniform(0.1, 0.6)).tolist())
            s = chen_solve(C, lam)
            d1 = float(np.max(np.abs(s.delta())))
            d2 = float(np.max(np.abs(s.delta2())))
            bad1 += d1 > (1 - math.exp(-lam)) / lam * (1 + 1e-12)
            bad2 += d2 > 2 / lam * d1 * (1 + 1e-12)
        print(f"[{lo:5.2f}, {hi:5.2f})  {trials:6d}  {bad1:16d}  {bad2:17d}")
    s = chen_solve({0}, 20.0)
    d1 = float(np.max(np.abs(s.delta())))
    print(f"C={{0}}, lambda=20: D2f(1) = {s.delta2()[1]:.6f}, (2/lambda) sup|Df| = {2 / 20 * d1:.6f}")


if __name__ == "__main__":
    main()
