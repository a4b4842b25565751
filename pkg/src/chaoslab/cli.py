"""Command-line entry point.

Every subcommand writes ``<name>.csv`` and ``<name>.json`` into ``--out``.
Exit codes: 0 success, 2 precondition or usage error, 3 capacity error,
4 parse or I/O error. Errors print one line on stderr.

Config files (``--config``) are flat ``key = value`` text; ``#`` starts a
comment, keys are the long option names (dashes or underscores), list values
are comma separated. Command-line flags override the file, which overrides the
defaults. Unknown keys are rejected.
"""

from __future__ import annotations

import datetime as _dt
import functools
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource
from scipy import integrate, stats

from .chaos import ChaosVar, cumulant_exact
from .errors import CapacityError, ChaosLabError, DomainError, ParseError, PreconditionError
from .experiments import (
    CounterexampleSum,
    DenseHomogeneousSum,
    ExperimentReport,
    breuer_major_run,
    clt_run,
    density_run,
    exact_rate_run,
    poisson_bounds_run,
    qv_hurst_run,
    universality_run,
)
from .free import FreeChaosVar, free_fourth, free_moment
from .gaussproc import CovSeq
from .hermite import HermiteSeries
from .kernels import Kernel, load_kernel
from .rng import GENERATOR_ID
from .stein import (
    LinearPoissonFunctional,
    chen_solve,
    poisson_tv_bound,
    stein_eval,
    stein_inner,
    stein_residual,
)

COMMON = {"seed", "generator_id", "out", "threads", "config", "no_timestamp"}


@dataclass
class RunConfig:
    command: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    generator_id: str = GENERATOR_ID
    out: str = "out"
    threads: int | None = None


# ------------------------------------------------------------------ parsing


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise DomainError(f"cannot parse number list {text!r}") from exc


def parse_grid(text: str) -> list[float]:
    """Either ``lo:hi:count`` or a comma-separated list."""
    if ":" in text:
        try:
            lo, hi, cnt = text.split(":")
            return np.linspace(float(lo), float(hi), int(cnt)).tolist()
        except ValueError as exc:
            raise DomainError(f"cannot parse grid {text!r}") from exc
    return parse_floats(text)


def read_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc.strerror}") from exc
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", line=i)
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise ParseError("empty key", line=i)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line=i)
        out[key] = value
    return out


def _resolve(ctx: click.Context, params: dict) -> dict:
    """Merge the config file beneath command-line flags."""
    path = params.get("config")
    if not path:
        return params
    cfg = read_config(path)
    by_name = {p.name: p for p in ctx.command.params}
    for key, value in cfg.items():
        if key not in by_name or key == "config":
            raise DomainError(f"unknown config key {key!r}")
        if ctx.get_parameter_source(key) == ParameterSource.COMMANDLINE:
            continue
        p = by_name[key]
        if p.is_flag:
            params[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            try:
                params[key] = p.type.convert(value, p, ctx)
            except click.BadParameter as exc:
                raise DomainError(f"config key {key!r}: {exc.message}") from exc
    return params


def _require_offdiagonal(k: Kernel) -> None:
    if k.q < 2:
        return
    idx = np.indices(k.coeffs.shape).reshape(k.q, -1)
    diag = np.zeros(idx.shape[1], dtype=bool)
    for a in range(k.q):
        for b in range(a + 1, k.q):
            diag |= idx[a] == idx[b]
    if np.any(k.coeffs.ravel()[diag] != 0.0):
        raise PreconditionError("kernel does not vanish on diagonals")


def _load(path: str, offdiag: bool) -> Kernel:
    k = load_kernel(path)
    if offdiag:
        _require_offdiagonal(k)
    return k


# ----------------------------------------------------------------- plumbing


def common_options(fn):
    opts = [
        click.option("--seed", type=int, default=0, show_default=True, help="Base seed."),
        click.option("--generator-id", default=GENERATOR_ID, show_default=True, help="PRNG family."),
        click.option("--out", default="out", show_default=True, type=click.Path(file_okay=False), help="Output directory."),
        click.option("--threads", type=int, default=None, help="Worker threads (default: all cores)."),
        click.option("--config", type=click.Path(dir_okay=False), default=None, help="Flat key=value config file."),
        click.option("--no-timestamp", is_flag=True, help="Omit the timestamp from the JSON summary."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def experiment(name: str):
    """Wrap a builder ``(cfg, **params) -> ExperimentReport`` as a subcommand body."""

    def deco(build):
        @functools.wraps(build)
        @click.pass_context
        def wrapper(ctx, **params):
            params = _resolve(ctx, dict(params))
            if params["generator_id"] != GENERATOR_ID:
                raise DomainError(f"unknown generator_id {params['generator_id']!r}; only {GENERATOR_ID!r} is available")
            specific = {k: v for k, v in params.items() if k not in COMMON}
            cfg = RunConfig(
                command=name,
                parameters=specific,
                seed=params["seed"],
                generator_id=params["generator_id"],
                out=params["out"],
                threads=params["threads"],
            )
            rep = build(cfg, **specific)
            stamp = None if params["no_timestamp"] else _dt.datetime.now(_dt.timezone.utc).isoformat()
            rep.write(cfg.out, timestamp=stamp, extra={"run_config": asdict(cfg)})
            flags = ", ".join(f"{k}={'pass' if v.passed else 'FAIL'}" for k, v in rep.pass_flags.items())
            click.echo(f"{name}: wrote {Path(cfg.out) / rep.name}.csv/.json" + (f" [{flags}]" if flags else ""))

        return wrapper

    return deco


@click.group(context_settings={"help_option_names": ["-h", "--help"], "max_content_width": 100})
@click.version_option(package_name="artifact")
def main():
    """Wiener chaos, Stein's method and Monte Carlo limit-theorem experiments."""


# ---------------------------------------------------------------- commands


@main.command("breuer-major")
@click.option("--phi", default="0,0,1", show_default=True, help="Hermite coefficients a_0,a_1,... of phi.")
@click.option("--H", "H", type=float, default=0.3, show_default=True, help="Hurst index of the fBm-increment covariance.")
@click.option("--rho-table", default=None, help="Covariance table rho(0),rho(1),... instead of fBm.")
@click.option("--n", type=int, default=2**14, show_default=True)
@click.option("--R", "R", type=int, default=2000, show_default=True)
@click.option("--K", "K", type=int, default=100_000, show_default=True, help="Truncation of the variance series.")
@common_options
@experiment("breuer-major")
def breuer_major_cmd(cfg, phi, H, rho_table, n, R, K):
    """V_n = n^-1/2 sum phi(X_k) over a stationary Gaussian sequence.

    CSV breuer_major.csv: replicate (int), value (V_n).
    """
    rho = CovSeq.from_table(parse_floats(rho_table)) if rho_table else CovSeq.fbm(H)
    return breuer_major_run(HermiteSeries(tuple(parse_floats(phi))), rho, n, R, cfg.seed, K=K, threads=cfg.threads)


@main.command("hurst")
@click.option("--H", "H", type=float, default=0.3, show_default=True)
@click.option("--n", type=int, default=2**14, show_default=True)
@click.option("--R", "R", type=int, default=500, show_default=True)
@common_options
@experiment("hurst")
def hurst_cmd(cfg, H, n, R):
    """Quadratic variation of fBm and the Hurst estimator.

    CSV qv_hurst.csv: replicate (int), S_n (normalized quadratic variation),
    H_hat (estimate of H), F_n (standardized sum of squared increments minus n).
    """
    return qv_hurst_run(H, n, R, cfg.seed, threads=cfg.threads)


@main.command("exact-rate")
@click.option("--H", "H", type=float, default=0.3, show_default=True)
@click.option("--x", "x", default="0", show_default=True, help="Comma-separated evaluation points.")
@click.option("--n", type=int, default=1024, show_default=True)
@click.option("--R", "R", type=int, default=10**5, show_default=True)
@click.option("--W", "W", type=int, default=2**16, show_default=True, help="Convolution window.")
@common_options
@experiment("exact-rate")
def exact_rate_cmd(cfg, H, x, n, R, W):
    """sqrt(n)(P(F_n <= x) - Phi(x)) against its second-chaos limit.

    CSV exact_rate.csv: replicate (int), F_n (standardized quadratic variation).
    """
    return exact_rate_run(H, parse_floats(x), n, R, cfg.seed, threads=cfg.threads, W=W)


@main.command("universality")
@click.option("--kernel", type=click.Path(dir_okay=False), default=None, help="Coefficient table g (kernel file).")
@click.option("--counterexample-n", type=int, default=None, help="Use the x_1 (x_2+...+x_n)/sqrt(n-1) kernel.")
@click.option("--laws", default="gaussian,rademacher,uniform,shifted_exponential", show_default=True)
@click.option("--R", "R", type=int, default=10**5, show_default=True)
@click.option("--require-offdiagonal", is_flag=True, help="Reject kernels that do not vanish on diagonals.")
@common_options
@experiment("universality")
def universality_cmd(cfg, kernel, counterexample_n, laws, R, require_offdiagonal):
    """Homogeneous sums Q_d(g, X) across input laws.

    CSV universality.csv: replicate (int), law (name), value (Q_d).
    """
    if (kernel is None) == (counterexample_n is None):
        raise DomainError("give exactly one of --kernel and --counterexample-n")
    if kernel is not None:
        g = DenseHomogeneousSum(_load(kernel, require_offdiagonal).coeffs)
    else:
        g = CounterexampleSum(counterexample_n)
    names = [t.strip() for t in laws.split(",") if t.strip()]
    return universality_run(g, names, R, cfg.seed, threads=cfg.threads)


@main.command("density")
@click.option("--eigenvalues", default="0.7071067811865476", show_default=True, help="lambda_i with 2 sum lambda^2 = 1.")
@click.option("--grid", default="-0.6:1.5:101", show_default=True, help="lo:hi:count or a comma list.")
@click.option("--R", "R", type=int, default=10**5, show_default=True)
@click.option("--method", type=click.Choice(["local_linear", "nadaraya_watson"]), default="local_linear", show_default=True)
@common_options
@experiment("density")
def density_cmd(cfg, eigenvalues, grid, R, method):
    """Density of a diagonal second-chaos variable from the g_F formula.

    CSV density.csv: replicate (int), F (sample), gamma (|DF|^2/2 at the sample).
    The density on the grid is in the JSON tables.grid entry.
    """
    return density_run(parse_floats(eigenvalues), R, parse_grid(grid), cfg.seed, method=method, threads=cfg.threads)


@main.command("clt")
@click.option("--law", default="rademacher", show_default=True)
@click.option("--n", type=int, default=400, show_default=True)
@click.option("--R", "R", type=int, default=10**5, show_default=True)
@common_options
@experiment("clt")
def clt_cmd(cfg, law, n, R):
    """Normalized partial sums against the Berry-Esseen bound.

    CSV clt.csv: replicate (int), value (n^-1/2 sum X_i).
    """
    return clt_run(law, n, R, cfg.seed, threads=cfg.threads)


@main.command("cumulants")
@click.option("--kernel", type=click.Path(dir_okay=False), required=True)
@click.option("--s", "s", type=int, default=4, show_default=True, help="Highest cumulant order.")
@click.option("--require-offdiagonal", is_flag=True)
@common_options
@experiment("cumulants")
def cumulants_cmd(cfg, kernel, s, require_offdiagonal):
    """Exact cumulants kappa_1..kappa_s of I_q(f).

    CSV cumulants.csv: s (order), cumulant (exact kappa_s).
    """
    k = _load(kernel, require_offdiagonal)
    F = ChaosVar(k)
    rep = ExperimentReport("cumulants", {"kernel": str(kernel), "q": k.q, "n": k.n, "s": s})
    vals = [(j, cumulant_exact(F, j)) for j in range(1, s + 1)]
    for j, v in vals:
        rep.exact_quantities[f"kappa_{j}"] = v
    rep.exact_quantities["cumulant"] = vals[-1][1]
    rep.columns = ["s", "cumulant"]
    rep.rows = vals
    return rep


@main.command("free-moments")
@click.option("--kernel", type=click.Path(dir_okay=False), required=True)
@click.option("--k", "k", type=int, default=4, show_default=True, help="Highest moment order.")
@click.option("--require-offdiagonal", is_flag=True)
@common_options
@experiment("free-moments")
def free_moments_cmd(cfg, kernel, k, require_offdiagonal):
    """Moments phi(F^j), j = 1..k, of a Wigner integral.

    CSV free_moments.csv: k (order), moment (phi(F^k)).
    """
    f = _load(kernel, require_offdiagonal)
    F = FreeChaosVar(f)
    rep = ExperimentReport("free_moments", {"kernel": str(kernel), "q": f.q, "n": f.n, "k": k})
    rows = [(j, free_moment(F, j)) for j in range(1, k + 1)]
    for j, v in rows:
        rep.exact_quantities[f"moment_{j}"] = v
    if f.q >= 1:
        rep.exact_quantities["free_fourth"] = free_fourth(F)
    rep.columns = ["k", "moment"]
    rep.rows = rows
    return rep


@main.command("stein-check")
@common_options
@experiment("stein-check")
def stein_check_cmd(cfg):
    """Self-test of the Gaussian and Poisson Stein solutions.

    CSV stein_check.csv: x (threshold), max_residual, max_abs_f, max_abs_fprime,
    inner_error (closed form against quadrature).
    """
    rep = ExperimentReport("stein_check", {})
    u = np.linspace(-8.0, 8.0, 4001)
    rows = []
    worst = [0.0, 0.0, 0.0, 0.0]
    for x in np.linspace(-4.0, 4.0, 41):
        off = np.abs(u - x) > 1e-9
        res = float(np.max(np.abs(stein_residual(x, u[off]))))
        f, fp = stein_eval(x, u)
        quad = integrate.quad(lambda t: stein_eval(x, t)[1] * t * stats.norm.pdf(t), -np.inf, np.inf, points=None, limit=200)[0]
        err = abs(quad - stein_inner(x))
        row = (float(x), res, float(np.max(np.abs(f))), float(np.max(np.abs(fp))), err)
        rows.append(row)
        worst = [max(a, b) for a, b in zip(worst, row[1:])]
    rep.distances.update(max_residual=worst[0], max_abs_f=worst[1], max_abs_fprime=worst[2], max_inner_error=worst[3])
    rep.flag("residual", worst[0] <= 1e-8, "|f' - u f - (1{u<=x} - Phi(x))| off the kink", 1e-8)
    rep.flag("f_bound", worst[1] <= math.sqrt(math.pi / 2) + 1e-9, "|f_x| <= sqrt(pi/2)", 1e-9)
    rep.flag("fprime_bound", worst[2] <= 2 + 1e-6, "|f_x'| <= 2", 1e-6)
    rep.flag("inner", worst[3] <= 1e-8, "closed form E[f_x'(N) N] against quadrature", 1e-8)
    chen = max(float(np.max(np.abs(chen_solve(C, lam).residuals()))) for C, lam in [([0], 1.0), ([1, 3], 2.5), ([0, 2, 5], 7.0)])
    rep.distances["chen_max_residual"] = chen
    rep.flag("chen_residual", chen <= 1e-12, "Chen-Stein functional equation residual", 1e-12)
    rep.columns = ["x", "max_residual", "max_abs_f", "max_abs_fprime", "inner_error"]
    rep.rows = rows
    return rep


@main.command("poisson-bounds")
@click.option("--lams", default="4,16,64", show_default=True, help="Intensities for the Wasserstein check.")
@click.option("--R", "R", type=int, default=10**5, show_default=True)
@click.option("--coeffs", default=None, help="Integer coefficients c_i of F = sum c_i eta(B_i).")
@click.option("--measures", default=None, help="Measures mu(B_i), same length as --coeffs.")
@common_options
@experiment("poisson-bounds")
def poisson_bounds_cmd(cfg, lams, R, coeffs, measures):
    """Poisson total-variation and Wasserstein bounds.

    CSV poisson_bounds.csv: lambda, wasserstein (empirical d_W of the standardized
    Poisson sample to N(0,1)), mc_error, bound (1/sqrt(lambda)).
    """
    rep = poisson_bounds_run(parse_floats(lams), R, cfg.seed, threads=cfg.threads)
    if coeffs is not None:
        spec = LinearPoissonFunctional(tuple(parse_floats(coeffs)), tuple(parse_floats(measures or "")))
        rep.bounds["tv_custom"] = poisson_tv_bound(spec)
    return rep


# ------------------------------------------------------------------ runner


def run(argv: list[str] | None = None) -> int:
    """Run the CLI and map failures to exit codes with a one-line diagnostic."""
    try:
        main.main(args=argv, prog_name="chaoslab", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except CapacityError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except ParseError as exc:
        click.echo(f"error: {exc}", err=True)
        return 4
    except ChaosLabError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except (ValueError, ZeroDivisionError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 4
    return 0


def cli_entry() -> None:
    sys.exit(run(sys.argv[1:]))
