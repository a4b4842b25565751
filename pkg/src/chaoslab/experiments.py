"""Reproducible Monte Carlo harnesses.

Every harness draws its replicates in fixed-size blocks. Block b of stream
``tag`` uses the Philox generator keyed by (seed, tag, b), so results do not
depend on how many worker threads process the blocks. Blocks are concatenated
in index order before any reduction.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .chaos import ChaosVar, malliavin_gamma_batch, sample_chaos_batch, sample_cumulants
from .distances import kolmogorov, kolmogorov_two_sample, wasserstein1
from .errors import CoverageError, DomainError, PreconditionError
from .gaussproc import (
    CirculantEmbedding,
    CovSeq,
    finite_n_variance,
    rho_conv_inner,
    rho_power_sum,
    sigma_n_sq_exact,
)
from .hermite import HermiteSeries, hermite_rank, hermite_table, l2_norm_sq
from .kernels import Kernel
from .rng import GENERATOR_ID, make_rng
from .stein import (
    LinearPoissonFunctional,
    berry_esseen_bound,
    moo_bound,
    poisson_tv_bound,
    poisson_wasserstein_bound,
    tv_between_pmfs,
)

SCHEMA_VERSION = "1.0"
DEFAULT_BLOCK = 512


# -------------------------------------------------------------------- report


@dataclass
class PassFlag:
    passed: bool
    criterion: str
    tolerance: float | str


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    exact_quantities: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)  # name -> {"value": v, "se": se}
    bounds: dict = field(default_factory=dict)
    distances: dict = field(default_factory=dict)
    pass_flags: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def estimate(self, key: str, value: float, se: float) -> None:
        self.estimates[key] = {"value": float(value), "se": float(se)}

    def flag(self, key: str, passed: bool, criterion: str, tolerance) -> None:
        self.pass_flags[key] = PassFlag(bool(passed), criterion, tolerance)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.pass_flags.values())

    def summary(self, timestamp: str | None = None) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "name": self.name,
            "parameters": self.parameters,
            "exact_quantities": self.exact_quantities,
            "estimates": self.estimates,
            "bounds": self.bounds,
            "distances": self.distances,
            "pass_flags": {k: asdict(v) for k, v in self.pass_flags.items()},
            "tables": self.tables,
            "metadata": self.metadata,
            "csv_columns": self.columns,
        }
        if timestamp is not None:
            out["timestamp"] = timestamp
        return out

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def write(self, outdir, timestamp: str | None = None, extra: dict | None = None) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / f"{self.name}.csv"
        json_path = outdir / f"{self.name}.json"
        csv_path.write_text(self.csv_text())
        summary = self.summary(timestamp)
        if extra:
            summary.update(extra)
        json_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# --------------------------------------------------------------- replicates


def default_threads() -> int:
    return os.cpu_count() or 1


def run_blocks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    R: int,
    seed: int,
    tag: int = 0,
    block: int = DEFAULT_BLOCK,
    threads: int | None = None,
) -> np.ndarray:
    """Evaluate ``fn(rng, count)`` on consecutive blocks and concatenate in order."""
    R = int(R)
    if R < 1:
        raise DomainError("R must be positive")
    nblocks = (R + block - 1) // block
    counts = [min(block, R - b * block) for b in range(nblocks)]

    def task(b):
        return np.asarray(fn(make_rng(seed, tag, b), counts[b]))

    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or nblocks == 1:
        parts = [task(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(task, range(nblocks)))
    return np.concatenate(parts, axis=0)


def mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def variance_se(x: np.ndarray) -> tuple[float, float]:
    """Sample variance and its delta-method standard error."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    v = float(np.mean(d * d)) * x.size / (x.size - 1)
    se = float(np.std(d * d, ddof=1) / math.sqrt(x.size))
    return v, se


def kolmogorov_mc_error(R: int) -> float:
    """Monte Carlo scale of an empirical Kolmogorov distance: 1/sqrt(R)."""
    return 1.0 / math.sqrt(R)


# ------------------------------------------------------------------- laws


@dataclass(frozen=True)
class Law:
    """A standardized (mean 0, variance 1) law with known moments."""

    name: str
    fourth_moment: float
    third_abs_moment: float
    draw: Callable[[np.random.Generator, tuple], np.ndarray]
    # Exact-in-law sampler for sums of m i.i.d. copies, when a closed form exists.
    draw_sum: Callable[[np.random.Generator, int, int], np.ndarray] | None = None


def _rademacher(rng, shape):
    return 2.0 * rng.integers(0, 2, size=shape).astype(float) - 1.0


LAWS: dict[str, Law] = {
    "gaussian": Law(
        "gaussian",
        3.0,
        2.0 * math.sqrt(2.0 / math.pi),
        lambda rng, shape: rng.standard_normal(shape),
        lambda rng, m, count: math.sqrt(m) * rng.standard_normal(count),
    ),
    "rademacher": Law(
        "rademacher",
        1.0,
        1.0,
        _rademacher,
        lambda rng, m, count: 2.0 * rng.binomial(m, 0.5, size=count).astype(float) - m,
    ),
    # sqrt(3) U(-1, 1): E X^4 = 9/5, E|X|^3 = 3 sqrt(3) / 4
    "uniform": Law(
        "uniform",
        9.0 / 5.0,
        3.0 * math.sqrt(3.0) / 4.0,
        lambda rng, shape: math.sqrt(3.0) * rng.uniform(-1.0, 1.0, size=shape),
        None,
    ),
    # Exp(1) - 1: E X^4 = 9, E|X|^3 = 12/e - 2
    "shifted_exponential": Law(
        "shifted_exponential",
        9.0,
        12.0 / math.e - 2.0,
        lambda rng, shape: rng.standard_exponential(shape) - 1.0,
        lambda rng, m, count: rng.standard_gamma(m, size=count) - m,
    ),
}


def get_law(name: str) -> Law:
    try:
        return LAWS[name]
    except KeyError:
        raise DomainError(f"unknown law {name!r}; choose from {sorted(LAWS)}") from None


def _sum_of_iid(law: Law, rng, m: int, count: int, chunk_cells: int = 4_000_000) -> np.ndarray:
    if law.draw_sum is not None:
        return law.draw_sum(rng, m, count)
    out = np.empty(count)
    step = max(1, chunk_cells // max(m, 1))
    for b in range(0, count, step):
        c = min(step, count - b)
        out[b : b + c] = law.draw(rng, (c, m)).sum(axis=1)
    return out


# ----------------------------------------------------------- Breuer-Major


def breuer_major_run(
    phi: HermiteSeries,
    rho: CovSeq,
    n: int,
    R: int,
    seed: int,
    K: int = 100_000,
    threads: int | None = None,
    block: int = 64,
) -> ExperimentReport:
    """V_n = n^{-1/2} sum_k phi(X_k) over a stationary Gaussian sequence."""
    norm = math.sqrt(l2_norm_sq(phi))
    eps = 1e-10 * max(norm, 1.0)
    if abs(phi.coeffs[0]) > eps:
        raise PreconditionError(f"phi must be centered (a_0 = {phi.coeffs[0]:.3g})")
    d = hermite_rank(phi)
    rho_power_sum(rho, d, K)  # raises DivergenceError when not summable
    sigma2 = 0.0
    tail = 0.0
    sigma2_2K = 0.0
    for q, a in enumerate(phi.coeffs):
        if q == 0 or a == 0.0:
            continue
        v, t = rho_power_sum(rho, q, K)
        v2, _ = rho_power_sum(rho, q, 2 * K)
        sigma2 += math.factorial(q) * a * a * v
        sigma2_2K += math.factorial(q) * a * a * v2
        tail += math.factorial(q) * a * a * t
    var_n = finite_n_variance(phi.coeffs, rho, n)
    emb = CirculantEmbedding.build(rho, n)
    coeffs = phi.array

    orders = [q for q, a in enumerate(phi.coeffs) if q > 0 and a != 0.0]

    def fn(rng, count):
        x = emb.draw(rng, count)
        tab = hermite_table(phi.qmax, x)
        # per-order components a_q n^{-1/2} sum_k H_q(X_k)
        return np.stack([coeffs[q] * tab[q].sum(axis=1) / math.sqrt(n) for q in orders], axis=1)

    parts = run_blocks(fn, R, seed, block=block, threads=threads)
    V = parts.sum(axis=1)
    rep = ExperimentReport(
        "breuer_major",
        {"phi": list(phi.coeffs), "rho": rho.describe(), "n": n, "R": R, "seed": seed, "K": K},
    )
    rep.exact_quantities.update(
        hermite_rank=d, sigma2=sigma2, sigma2_tail_estimate=tail, sigma2_at_2K=sigma2_2K, variance_finite_n=var_n
    )
    m, se_m = mean_se(V)
    v, se_v = variance_se(V)
    rep.estimate("mean", m, se_m)
    rep.estimate("variance", v, se_v)
    kap, kse = sample_cumulants(V, 4)
    rep.estimate("kappa3", kap[2], kse[2])
    rep.estimate("kappa4", kap[3], kse[3])
    # different chaos orders are uncorrelated, so their cross moments vanish
    for i, p in enumerate(orders):
        for j in range(i + 1, len(orders)):
            c, cse = mean_se(parts[:, i] * parts[:, j])
            rep.estimate(f"cross_moment_{p}_{orders[j]}", c, cse)
    rep.distances["kolmogorov_to_limit"] = kolmogorov(V, stats.norm(0.0, math.sqrt(sigma2)))
    rep.distances["kolmogorov_mc_error"] = kolmogorov_mc_error(R)
    rep.flag("variance_matches_finite_n", abs(v - var_n) <= 4 * se_v, "|Var(V_n) - exact| <= 4 SE", "4 SE")
    rep.columns = ["replicate", "value"]
    rep.rows = [(i, float(x)) for i, x in enumerate(V)]
    rep.metadata.update(emb.metadata, generator_id=GENERATOR_ID)
    return rep


# -------------------------------------------------- quadratic variation / Hurst


def rate_regime(H: float) -> str | None:
    if H < 5 / 8:
        return "n^-1/2"
    if H == 5 / 8:
        return "(log n)^3/2 n^-1/2"
    if H < 3 / 4:
        return "n^(4H-3)"
    if H == 3 / 4:
        return "1/log n"
    return None


def hurst_estimate(S_n, n: int):
    """H_hat = 1/2 - log S_n / (2 log n)."""
    return 0.5 - np.log(S_n) / (2.0 * math.log(n))


def qv_hurst_run(
    H: float, n: int, R: int, seed: int, threads: int | None = None, block: int = 64
) -> ExperimentReport:
    """Quadratic variation of fBm on [0, 1], the Hurst estimator, and F_n."""
    rho = CovSeq.fbm(H)
    emb = CirculantEmbedding.build(rho, n)
    sig2 = sigma_n_sq_exact(rho, n)
    scale = float(n) ** (-2.0 * H)

    def fn(rng, count):
        x = emb.draw(rng, count)
        ss = np.einsum("ij,ij->i", x, x)
        return np.stack([ss, ss - n], axis=1)

    out = run_blocks(fn, R, seed, block=block, threads=threads)
    S = scale * out[:, 0]
    Hhat = hurst_estimate(S, n)
    Fn = out[:, 1] / math.sqrt(sig2)
    Z = math.sqrt(n) * math.log(n) * (Hhat - H)
    rep = ExperimentReport("qv_hurst", {"H": H, "n": n, "R": R, "seed": seed})
    rep.exact_quantities["sigma_n_sq"] = sig2
    regime = rate_regime(H)
    if regime is not None:
        rep.exact_quantities["rate_regime"] = regime
    m, se = mean_se(Hhat)
    rep.estimate("H_hat_mean", m, se)
    a, ase = mean_se(np.abs(Hhat - H))
    rep.estimate("mean_abs_error", a, ase)
    v, vse = variance_se(Z)
    rep.estimate("var_scaled_error", v, vse)
    fv, fvse = variance_se(Fn)
    rep.estimate("var_F_n", fv, fvse)
    if H < 0.75:
        s2, tail = rho_power_sum(rho, 2)
        rep.exact_quantities["clt_variance_limit"] = 0.5 * s2
        rep.exact_quantities["sum_rho_sq"] = s2
    rep.distances["kolmogorov_F_n"] = kolmogorov(Fn, stats.norm())
    rep.distances["kolmogorov_mc_error"] = kolmogorov_mc_error(R)
    rep.flag("variance_F_n_is_one", abs(fv - 1.0) <= 4 * fvse, "|Var(F_n) - 1| <= 4 SE", "4 SE")
    rep.columns = ["replicate", "S_n", "H_hat", "F_n"]
    rep.rows = [(i, float(s), float(h), float(f)) for i, (s, h, f) in enumerate(zip(S, Hhat, Fn))]
    rep.metadata.update(emb.metadata, generator_id=GENERATOR_ID)
    return rep


def qv_kolmogorov_sweep(
    H: float, ns: Sequence[int], R: int, seed: int, threads: int | None = None
) -> ExperimentReport:
    """Kolmogorov distance of F_n to N(0,1) along a grid of n, and the successive ratios."""
    rep = ExperimentReport("qv_sweep", {"H": H, "ns": list(ns), "R": R, "seed": seed})
    ds = []
    rows = []
    for j, n in enumerate(ns):
        rho = CovSeq.fbm(H)
        emb = CirculantEmbedding.build(rho, n)
        sig = math.sqrt(sigma_n_sq_exact(rho, n))

        def fn(rng, count, emb=emb, n=n, sig=sig):
            x = emb.draw(rng, count)
            return (np.einsum("ij,ij->i", x, x) - n) / sig

        Fn = run_blocks(fn, R, seed, tag=j, block=64, threads=threads)
        d = kolmogorov(Fn, stats.norm())
        ds.append(d)
        rows.append((n, d))
        rep.distances[f"kolmogorov_n{n}"] = d
    ratios = [b / a for a, b in zip(ds[:-1], ds[1:])]
    gm = float(np.exp(np.mean(np.log(ratios)))) if ratios else float("nan")
    rep.estimate("geometric_mean_ratio", gm, float("nan"))
    rep.exact_quantities["ratio_under_n_half_rate"] = 1.0 / math.sqrt(2.0)
    if rate_regime(H):
        rep.exact_quantities["rate_regime"] = rate_regime(H)
    rep.columns = ["n", "kolmogorov"]
    rep.rows = rows
    return rep


# --------------------------------------------------------------- exact rates


def exact_rate_prediction(H: float, W: int = 2**16) -> dict:
    """Limit of sqrt(n)(P(F_n <= x) - Phi(x)) through the third/fourth cumulant route.

    kappa_s(F_n) ~ n^{1-s/2} 2^{s/2-1} (s-1)! <rho^{*(s-1)}, rho> / |rho|^s, so
    alpha = lim kappa_3 / sqrt(kappa_4) and the limit is
    sqrt(n kappa_4) alpha / (6 sqrt(2 pi)) (1 - x^2) exp(-x^2/2).
    """
    rho = CovSeq.fbm(H)
    norm2, _ = rho_power_sum(rho, 2)
    c3 = rho_conv_inner(rho, 2, W)
    c4 = rho_conv_inner(rho, 3, W)
    k3n = math.sqrt(2.0) * 2.0 * c3 / norm2**1.5  # sqrt(n) kappa_3
    k4n = 2.0 * 6.0 * c4 / norm2**2  # n kappa_4
    alpha = k3n / math.sqrt(k4n)
    amp = math.sqrt(k4n) * alpha / (6.0 * math.sqrt(2.0 * math.pi))
    return {
        "norm_sq": norm2,
        "conv2_inner": c3,
        "conv3_inner": c4,
        "alpha": alpha,
        "sqrt_n_kappa3_limit": k3n,
        "n_kappa4_limit": k4n,
        "amplitude": amp,
        # the printed corollary constant, kept for comparison only
        "corollary_display_amplitude": c3 / (3.0 * norm2),
    }


def toeplitz_cumulants(rho: CovSeq, n: int, s_values=(2, 3, 4)) -> dict:
    """Exact cumulants of F_n = sigma_n^{-1} sum (X_k^2 - 1) from the covariance spectrum."""
    from scipy.linalg import toeplitz

    mu = np.linalg.eigvalsh(toeplitz(rho(np.arange(n))))
    sig = math.sqrt(2.0 * float(np.sum(mu**2)))
    m = mu / sig
    return {s: 2.0 ** (s - 1) * math.factorial(s - 1) * float(np.sum(m**s)) for s in s_values}


def exact_rate_run(
    H: float,
    x_grid: Sequence[float],
    n: int,
    R: int,
    seed: int,
    threads: int | None = None,
    block: int = 256,
    W: int = 2**16,
    exact_cumulants: bool = True,
) -> ExperimentReport:
    """sqrt(n)(P(F_n <= x) - Phi(x)) against its second-chaos limit."""
    if not H < 0.5:
        raise DomainError("the exact-rate prediction needs H < 1/2")
    rho = CovSeq.fbm(H)
    emb = CirculantEmbedding.build(rho, n)
    sig = math.sqrt(sigma_n_sq_exact(rho, n))

    def fn(rng, count):
        x = emb.draw(rng, count)
        return (np.einsum("ij,ij->i", x, x) - n) / sig

    Fn = run_blocks(fn, R, seed, block=block, threads=threads)
    pred = exact_rate_prediction(H, W)
    rep = ExperimentReport("exact_rate", {"H": H, "x_grid": list(x_grid), "n": n, "R": R, "seed": seed, "W": W})
    rep.exact_quantities.update(pred)
    if exact_cumulants and n <= 4096:
        kap = toeplitz_cumulants(rho, n)
        rep.exact_quantities["kappa3_exact"] = kap[3]
        rep.exact_quantities["kappa4_exact"] = kap[4]
        rep.flag("kappa4_positive", kap[4] > 0, "kappa_4(F_n) > 0", 0.0)
    m3, m3se = mean_se(Fn**3)
    rep.estimate("third_moment", m3, m3se)
    xs, ests, ses, preds, ratios = [], [], [], [], []
    for x in x_grid:
        p = float(np.mean(Fn <= x))
        se = math.sqrt(max(p * (1 - p), 1e-300) / R)
        est = math.sqrt(n) * (p - stats.norm.cdf(x))
        pr = pred["amplitude"] * (1 - x * x) * math.exp(-0.5 * x * x)
        rep.estimate(f"scaled_gap_x{x:g}", est, math.sqrt(n) * se)
        rep.exact_quantities[f"prediction_x{x:g}"] = pr
        ratio = est / pr if pr != 0 else float("nan")
        rep.exact_quantities[f"ratio_x{x:g}"] = ratio
        xs.append(x)
        ests.append(est)
        ses.append(math.sqrt(n) * se)
        preds.append(pr)
        ratios.append(ratio)
    rep.tables["by_x"] = {"x": xs, "estimate": ests, "se": ses, "prediction": preds, "ratio": ratios}
    rep.columns = ["replicate", "F_n"]
    rep.rows = [(i, float(v)) for i, v in enumerate(Fn)]
    rep.metadata.update(emb.metadata, generator_id=GENERATOR_ID)
    return rep


# ------------------------------------------------------------- universality


class HomogeneousSum:
    """Q_d(g, x) = sum over i_1..i_d of g(i_1..i_d) x_{i_1} ... x_{i_d}."""

    d: int
    n: int

    def tau(self) -> float:
        raise NotImplementedError

    def evaluate(self, law: Law, rng, count: int) -> np.ndarray:
        raise NotImplementedError

    def kernel(self) -> Kernel | None:
        return None

    def describe(self) -> dict:
        return {"d": self.d, "n": self.n}


class DenseHomogeneousSum(HomogeneousSum):
    """Dense coefficient table; validates symmetry, vanishing diagonals and d! sum g^2 = 1."""

    def __init__(self, g, tol: float = 1e-9):
        g = np.asarray(g, dtype=float)
        self.g = g
        self.d = g.ndim
        self.n = g.shape[0]
        k = Kernel(g)
        if not k.symmetric:
            raise PreconditionError("g must be symmetric")
        if self.d >= 2:
            idx = np.indices(g.shape).reshape(self.d, -1)
            diag = np.zeros(idx.shape[1], dtype=bool)
            for a in range(self.d):
                for b in range(a + 1, self.d):
                    diag |= idx[a] == idx[b]
            if np.any(g.ravel()[diag] != 0.0):
                raise PreconditionError("g must vanish on diagonals")
        total = math.factorial(self.d) * float(np.sum(g * g))
        if abs(total - 1.0) > tol:
            raise PreconditionError(f"d! sum g^2 = {total:.12g}, expected 1")

    def tau(self) -> float:
        g2 = (self.g**2).reshape(self.n, -1).sum(axis=1)
        return float(g2.max())

    def kernel(self) -> Kernel:
        return Kernel(self.g)

    def evaluate(self, law, rng, count):
        x = law.draw(rng, (count, self.n))
        t = x
        out = np.tensordot(x, self.g, axes=(1, 0))  # (count, n, ..., n)
        for _ in range(self.d - 1):
            out = np.einsum("bi,bi...->b...", t, out)
        return out if out.ndim == 1 else out.ravel()


class CounterexampleSum(HomogeneousSum):
    """g(i, j) = 1/(2 sqrt(n-1)) when exactly one of i, j equals 1.

    Q_2 = x_1 (x_2 + ... + x_n) / sqrt(n-1). The inner sum is drawn exactly in law
    for laws that have a closed-form sum sampler.
    """

    def __init__(self, n: int):
        if n < 2:
            raise DomainError("need n >= 2")
        self.d = 2
        self.n = int(n)

    def tau(self) -> float:
        return 0.25

    def dense(self) -> np.ndarray:
        g = np.zeros((self.n, self.n))
        v = 1.0 / (2.0 * math.sqrt(self.n - 1))
        g[0, 1:] = v
        g[1:, 0] = v
        return g

    def kernel(self) -> Kernel | None:
        return Kernel(self.dense()) if self.n <= 3000 else None

    def evaluate(self, law, rng, count):
        x1 = law.draw(rng, (count,))
        s = _sum_of_iid(law, rng, self.n - 1, count)
        return x1 * s / math.sqrt(self.n - 1)

    def describe(self):
        return {"d": 2, "n": self.n, "kind": "counterexample"}


def universality_run(
    g: HomogeneousSum,
    laws: Sequence[str],
    R: int,
    seed: int,
    threads: int | None = None,
    block: int = 4096,
) -> ExperimentReport:
    """Moments and distances of Q_d(g, X) across input laws, with the smooth-function bound.

    The test function is cos, whose third derivative is bounded by 1. A Gaussian
    reference sample is always drawn (stream tag 0) to estimate E cos(Q(G)).
    """
    laws = list(laws)
    for name in laws:
        get_law(name)
    tau = g.tau()
    rep = ExperimentReport("universality", {"g": g.describe(), "laws": laws, "R": R, "seed": seed})
    rep.exact_quantities["tau"] = tau
    all_names = ["gaussian"] + [name for name in laws if name != "gaussian"]
    samples = {}
    for tag, name in enumerate(all_names):
        law = get_law(name)
        samples[name] = run_blocks(lambda rng, c, law=law: g.evaluate(law, rng, c), R, seed, tag=tag, block=block, threads=threads)
    ref_cos = np.cos(samples["gaussian"])
    ref_m, ref_se = mean_se(ref_cos)
    rows = []
    for name in all_names:
        law = get_law(name)
        Q = samples[name]
        m, mse = mean_se(Q)
        m2, m2se = mean_se(Q**2)
        m4, m4se = mean_se(Q**4)
        rep.estimate(f"{name}_mean", m, mse)
        rep.estimate(f"{name}_second_moment", m2, m2se)
        rep.estimate(f"{name}_fourth_moment", m4, m4se)
        rep.distances[f"{name}_kolmogorov"] = kolmogorov(Q, stats.norm())
        if name != "gaussian":
            c, cse = mean_se(np.cos(Q))
            gap = abs(c - ref_m)
            err = math.sqrt(cse**2 + ref_se**2)
            bound = moo_bound(g.d, max(3.0, law.fourth_moment), 1.0, tau)
            rep.estimate(f"{name}_cos_gap", gap, err)
            rep.bounds[f"{name}_moo"] = bound
            rep.flag(f"{name}_moo_dominates", gap <= bound + 3 * err, "|E cos Q(X) - E cos Q(G)| <= bound + 3 MC error", "3 SE")
        if name in laws:
            rows.extend((i, name, float(v)) for i, v in enumerate(Q))
    k = g.kernel()
    if k is not None and k.q <= 4:
        F = ChaosVar(k)
        ch = run_blocks(lambda rng, c: sample_chaos_batch(F, rng.standard_normal((c, k.n))), R, seed, tag=len(all_names), block=block, threads=threads)
        ks = kolmogorov_two_sample(samples["gaussian"], ch)
        rep.distances["gaussian_vs_chaos_ks"] = ks
        rep.flag("gaussian_matches_chaos", ks <= 3.0 / math.sqrt(R), "two-sample KS <= 3 R^-1/2", 3.0 / math.sqrt(R))
    rep.columns = ["replicate", "law", "value"]
    rep.rows = rows
    rep.metadata["generator_id"] = GENERATOR_ID
    return rep


# ------------------------------------------------------------------ density


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1))
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * x.size ** (-0.2)


class _BinnedRegression:
    """Kernel regression of y on x from per-bin sufficient statistics.

    Each sample is assigned to a fine bin; the Gaussian weight of a sample is
    taken at its bin centre, while the first and second moments of x within the
    bin are kept exactly. With ``local_linear`` the fit reproduces any response
    that is exactly linear in x.
    """

    def __init__(self, x, y, h, nbins=8192, method="nadaraya_watson"):
        self.h = float(h)
        self.method = method
        lo, hi = float(x.min()), float(x.max())
        span = hi - lo or 1.0
        self.lo, self.width = lo, span / nbins
        b = np.minimum(((x - lo) / self.width).astype(np.int64), nbins - 1)
        self.centres = lo + (np.arange(nbins) + 0.5) * self.width
        self.n0 = np.bincount(b, minlength=nbins).astype(float)
        self.sx = np.bincount(b, weights=x, minlength=nbins)
        self.sxx = np.bincount(b, weights=x * x, minlength=nbins)
        self.sy = np.bincount(b, weights=y, minlength=nbins)
        self.sxy = np.bincount(b, weights=x * y, minlength=nbins)
        self.nbins = nbins

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        reach = int(math.ceil(7.0 * self.h / self.width)) + 1
        for j, v in enumerate(t):
            c = int((v - self.lo) / self.width)
            a, b = max(0, c - reach), min(self.nbins, c + reach + 1)
            w = np.exp(-0.5 * ((self.centres[a:b] - v) / self.h) ** 2)
            s0 = w @ self.n0[a:b]
            t0 = w @ self.sy[a:b]
            if self.method == "local_linear":
                s1 = w @ self.sx[a:b] - v * s0
                s2 = w @ self.sxx[a:b] - 2 * v * (w @ self.sx[a:b]) + v * v * s0
                t1 = w @ self.sxy[a:b] - v * t0
                den = s0 * s2 - s1 * s1
                out[j] = (s2 * t0 - s1 * t1) / den if den > 0 else t0 / s0
            else:
                out[j] = t0 / s0
        return out


def density_from_g(grid, g_func: Callable, mean_abs: float, points: int = 20001) -> tuple[np.ndarray, np.ndarray]:
    """rho(x) = E|F| / (2 g(x)) exp(-int_0^x y / g(y) dy), integrated by the trapezoid rule."""
    grid = np.asarray(grid, dtype=float)
    a, b = min(0.0, grid.min()), max(0.0, grid.max())
    fine = np.union1d(np.linspace(a, b, points), np.append(grid, 0.0))
    gf = g_func(fine)
    integrand = fine / gf
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(fine))])
    i0 = int(np.searchsorted(fine, 0.0))
    cum -= cum[i0]
    dens_f = mean_abs / (2.0 * gf) * np.exp(-cum)
    pos = np.searchsorted(fine, grid)
    return dens_f[pos], gf[pos]


def density_run(
    F,
    R: int,
    grid: Sequence[float],
    seed: int,
    method: str = "local_linear",
    threads: int | None = None,
    block: int = 8192,
    reference: Callable | None = None,
) -> ExperimentReport:
    """Density of a chaos variable from the g_F formula with a regression estimate of g_F.

    ``F`` is a ChaosVar or a list of eigenvalues for a diagonal second-chaos
    variable sum_i lambda_i (X_i^2 - 1). ``method`` selects "nadaraya_watson" or
    "local_linear" regression of |DF|^2/q on F.
    """
    if not isinstance(F, ChaosVar):
        lam = np.asarray(F, dtype=float)
        if abs(2.0 * float(np.sum(lam**2)) - 1.0) > 1e-9:
            raise PreconditionError("eigenvalues must satisfy 2 sum lambda^2 = 1")
        F = ChaosVar(Kernel(np.diag(lam)))
    if method not in ("nadaraya_watson", "local_linear"):
        raise DomainError(f"unknown regression method {method!r}")
    n = F.n

    def fn(rng, count):
        rows = rng.standard_normal((count, n))
        return np.stack([sample_chaos_batch(F, rows), malliavin_gamma_batch(F, rows)], axis=1)

    out = run_blocks(fn, R, seed, block=block, threads=threads)
    x, gam = out[:, 0], out[:, 1]
    q01, q99 = np.quantile(x, [0.01, 0.99])
    grid = np.asarray(grid, dtype=float)
    if grid.min() < q01 or grid.max() > q99 or not q01 < 0 < q99:
        raise CoverageError(f"grid [{grid.min():.4g}, {grid.max():.4g}] leaves the central range [{q01:.4g}, {q99:.4g}]")
    h = silverman_bandwidth(x)
    reg = _BinnedRegression(x, gam, h, method=method)
    mean_abs = float(np.mean(np.abs(x)))
    dens, ghat = density_from_g(grid, reg, mean_abs)
    central = x[(x >= q01) & (x <= q99)]
    sub = central[:: max(1, central.size // 20000)]
    levy = float(np.var(reg(sub)))
    rep = ExperimentReport(
        "density", {"q": F.q, "n": n, "R": R, "seed": seed, "grid": grid.tolist(), "method": method}
    )
    rep.estimate("mean_abs_F", mean_abs, float(np.std(np.abs(x), ddof=1) / math.sqrt(R)))
    rep.exact_quantities["bandwidth"] = h
    rep.exact_quantities["central_range"] = [float(q01), float(q99)]
    rep.estimates["levy_score"] = {"value": levy, "se": float("nan")}
    rep.tables["grid"] = {"x": grid.tolist(), "density": dens.tolist(), "g_hat": ghat.tolist()}
    if reference is not None:
        ref = np.asarray(reference(grid), dtype=float)
        rep.tables["grid"]["reference"] = ref.tolist()
        rep.distances["sup_error"] = float(np.max(np.abs(dens - ref)))
    rep.columns = ["replicate", "F", "gamma"]
    rep.rows = [(i, float(a), float(b)) for i, (a, b) in enumerate(zip(x, gam))]
    rep.metadata["generator_id"] = GENERATOR_ID
    return rep


# ---------------------------------------------------------------------- CLT


def clt_run(law: str, n: int, R: int, seed: int, threads: int | None = None, block: int = 8192) -> ExperimentReport:
    """Kolmogorov distance of V_n = n^{-1/2} sum X_i to N(0,1) against Berry-Esseen."""
    L = get_law(law)
    V = run_blocks(lambda rng, c: _sum_of_iid(L, rng, n, c) / math.sqrt(n), R, seed, block=block, threads=threads)
    d = kolmogorov(V, stats.norm())
    err = kolmogorov_mc_error(R)
    rep = ExperimentReport("clt", {"law": law, "n": n, "R": R, "seed": seed})
    rep.exact_quantities["third_abs_moment"] = L.third_abs_moment
    rep.distances["kolmogorov"] = d
    rep.distances["kolmogorov_mc_error"] = err
    for mode in ("proven_33", "sharp_04784"):
        rep.bounds[mode] = berry_esseen_bound(n, L.third_abs_moment, mode)
        rep.flag(f"within_{mode}", d <= rep.bounds[mode] + 3 * err, "distance <= bound + 3 MC error", 3 * err)
    rep.columns = ["replicate", "value"]
    rep.rows = [(i, float(v)) for i, v in enumerate(V)]
    rep.metadata["generator_id"] = GENERATOR_ID
    return rep


def clt_trend(law: str, ns: Sequence[int], R: int, seed: int, threads: int | None = None) -> ExperimentReport:
    """Distances along a dyadic grid of n with a monotone-trend flag."""
    rep = ExperimentReport("clt_trend", {"law": law, "ns": list(ns), "R": R, "seed": seed})
    ds = []
    for j, n in enumerate(ns):
        L = get_law(law)
        V = run_blocks(lambda rng, c, n=n: _sum_of_iid(L, rng, n, c) / math.sqrt(n), R, seed, tag=j, block=8192, threads=threads)
        ds.append(kolmogorov(V, stats.norm()))
        rep.distances[f"kolmogorov_n{n}"] = ds[-1]
    err = kolmogorov_mc_error(R)
    decreasing = all(b <= a + 2 * err for a, b in zip(ds[:-1], ds[1:]))
    rep.flag("decreasing_in_n", decreasing, "d(2n) <= d(n) + 2 MC error", 2 * err)
    rep.columns = ["n", "kolmogorov"]
    rep.rows = list(zip(ns, ds))
    return rep


# ------------------------------------------------------------------ Poisson


def poisson_pmf_scaled(c: int, lam: float, kmax: int) -> np.ndarray:
    """pmf of c * Po(lam) on 0..kmax."""
    p = np.zeros(kmax + 1)
    j = np.arange(kmax // c + 1)
    p[c * j] = stats.poisson.pmf(j, lam)
    return p


def poisson_bounds_run(lams: Sequence[float], R: int, seed: int, threads: int | None = None) -> ExperimentReport:
    """TV bound checks for c eta(B), and the Wasserstein bound for standardized Poisson samples."""
    rep = ExperimentReport("poisson_bounds", {"lams": list(lams), "R": R, "seed": seed})
    b1 = poisson_tv_bound(LinearPoissonFunctional((1.0,), (1.0,)))
    rep.bounds["tv_eta"] = b1
    rep.flag("tv_eta_zero", b1 == 0.0, "bound for eta(B) is exactly 0", 0.0)
    b2 = poisson_tv_bound(LinearPoissonFunctional((2.0,), (1.0,)))
    kmax = 200
    exact = tv_between_pmfs(poisson_pmf_scaled(2, 1.0, kmax), stats.poisson.pmf(np.arange(kmax + 1), 2.0))
    rep.bounds["tv_2eta"] = b2
    rep.exact_quantities["tv_2eta_exact"] = exact
    rep.flag("tv_2eta_dominates", b2 >= exact, "bound >= exact d_TV(2 Po(1), Po(2))", 0.0)
    rows = []
    for tag, lam in enumerate(lams):
        x = run_blocks(lambda rng, c, lam=lam: rng.poisson(lam, size=c).astype(float), R, seed, tag=tag, block=16384, threads=threads)
        z = (x - lam) / math.sqrt(lam)
        w = wasserstein1(z, stats.norm())
        parts = np.array([wasserstein1(p, stats.norm()) for p in np.array_split(z, 20)])
        err = float(parts.std(ddof=1) / math.sqrt(20))
        bound = poisson_wasserstein_bound(lam)
        rep.distances[f"wasserstein_lam{lam:g}"] = w
        rep.distances[f"wasserstein_mc_error_lam{lam:g}"] = err
        rep.bounds[f"wasserstein_lam{lam:g}"] = bound
        rep.flag(f"wasserstein_lam{lam:g}", w <= bound + 3 * err, "d_W <= 1/sqrt(lam) + 3 MC error", 3 * err)
        rows.append((lam, w, err, bound))
    rep.columns = ["lambda", "wasserstein", "mc_error", "bound"]
    rep.rows = rows
    rep.metadata["generator_id"] = GENERATOR_ID
    return rep
