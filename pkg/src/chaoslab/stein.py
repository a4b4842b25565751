"""Stein-method evaluators for Gaussian and Poisson targets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special, stats

from .errors import DomainError, PreconditionError

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
HALF_SQRT_2PI = 0.5 * SQRT2PI

BE_CONSTANTS = {"proven_33": 33.0, "sharp_04784": 0.4784}


# ---------------------------------------------------------- Gaussian Stein


def _mills_left(u):
    """sqrt(2 pi) exp(u^2/2) Phi(u), stable for u <= 0."""
    return HALF_SQRT_2PI * special.erfcx(-u / SQRT2)


def _mills_right(u):
    """sqrt(2 pi) exp(u^2/2) (1 - Phi(u)), stable for u >= 0."""
    return HALF_SQRT_2PI * special.erfcx(u / SQRT2)


def stein_eval(x: float, u):
    """Solution f_x of f'(u) - u f(u) = 1{u <= x} - Phi(x) and its derivative.

    Each branch multiplies a bounded Mills-ratio factor by a probability, or
    uses exp((u^2 - x^2)/2) <= 1 when |u| <= |x|, so nothing overflows and no
    large terms cancel. Returns (f, f') with the shape of ``u``.
    """
    x = float(x)
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    f = np.empty_like(u)
    fp = np.empty_like(u)
    Phi_x = special.ndtr(x)
    Q_x = special.ndtr(-x)

    lo = u <= x
    # u <= x: f = sqrt(2 pi) e^{u^2/2} Phi(u) (1 - Phi(x))
    a = lo & (u <= 0)
    ua = u[a]
    m = _mills_left(ua)
    f[a] = m * Q_x
    fp[a] = Q_x * (1.0 + ua * m)
    b = lo & (u > 0)
    ub = u[b]
    # 0 < u <= x: write (1 - Phi(x)) e^{u^2/2} as e^{(u^2-x^2)/2} times the right Mills ratio at x.
    f[b] = special.ndtr(ub) * _mills_right(x) * np.exp(0.5 * (ub * ub - x * x))
    fp[b] = ub * f[b] + Q_x

    hi = ~lo
    c = hi & (u >= 0)
    uc = u[c]
    m = _mills_right(uc)
    f[c] = m * Phi_x
    fp[c] = Phi_x * (uc * m - 1.0)
    d = hi & (u < 0)
    ud = u[d]
    # x < u < 0
    f[d] = special.ndtr(-ud) * _mills_left(x) * np.exp(0.5 * (ud * ud - x * x))
    fp[d] = ud * f[d] - Phi_x

    if scalar:
        return float(f[0]), float(fp[0])
    return f, fp


def stein_residual(x: float, u) -> np.ndarray:
    f, fp = stein_eval(x, u)
    u = np.asarray(u, dtype=float)
    return fp - u * f - ((u <= x).astype(float) - special.ndtr(x))


def stein_inner(x):
    """E[f_x'(N) N] in closed form: (x^2 - 1) exp(-x^2/2) / (3 sqrt(2 pi))."""
    x = np.asarray(x, dtype=float)
    out = (x * x - 1.0) * np.exp(-0.5 * x * x) / (3.0 * SQRT2PI)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SteinSolution:
    """Callable wrapper around stein_eval for a fixed threshold x."""

    x: float

    def __call__(self, u):
        return stein_eval(self.x, u)[0]

    def derivative(self, u):
        return stein_eval(self.x, u)[1]


# ------------------------------------------------------------ CLT and MOO


def berry_esseen_bound(n: int, third_abs_moment: float, constant_mode: str = "sharp_04784") -> float:
    """C E|X|^3 / sqrt(n) for a unit-variance summand."""
    if n < 1:
        raise DomainError("n must be positive")
    if third_abs_moment < 1.0:
        raise PreconditionError("E|X|^3 < 1 is impossible for a unit-variance variable")
    try:
        c = BE_CONSTANTS[constant_mode]
    except KeyError:
        raise DomainError(f"unknown constant mode {constant_mode!r}; use one of {sorted(BE_CONSTANTS)}") from None
    return c * third_abs_moment / math.sqrt(n)


def moo_bound(d: int, gamma: float, phi3_sup: float, tau: float) -> float:
    """Smooth-function universality bound for a degree-d homogeneous sum.

    gamma is max(3, E X^4), phi3_sup is sup |phi'''| and tau the maximal influence.
    """
    if d < 1:
        raise DomainError("degree must be positive")
    if gamma < 1:
        raise DomainError("gamma must be >= 1")
    if tau < 0:
        raise DomainError("tau must be non-negative")
    return (
        gamma / 3.0
        * (3.0 + 2.0 * gamma) ** (1.5 * (d - 1))
        * d**1.5
        * math.sqrt(math.factorial(d))
        * phi3_sup
        * math.sqrt(tau)
    )


def hypercontractivity_bound(d: int, fourth_moment: float) -> float:
    """(3 + 2 E X^4)^{2d}: E P^4 <= bound * (E P^2)^2 for multilinear P of degree d."""
    if fourth_moment < 1.0:
        raise DomainError("E X^4 >= (E X^2)^2 = 1 for a unit-variance variable")
    return (3.0 + 2.0 * fourth_moment) ** (2 * d)


# ---------------------------------------------------------------- Chen-Stein


@dataclass(frozen=True)
class ChenSolution:
    """Table of the Chen-Stein solution f_C(0..K+1) for Po(lam)."""

    C: frozenset
    complement: bool
    lam: float
    K: int
    values: np.ndarray
    p_C: float

    def indicator(self, k) -> np.ndarray:
        k = np.atleast_1d(np.asarray(k))
        inside = np.isin(k, np.fromiter(self.C, dtype=int, count=len(self.C))) if self.C else np.zeros(k.shape, bool)
        return (inside ^ self.complement).astype(float)

    def residuals(self) -> np.ndarray:
        """lam f(k+1) - k f(k) - (1_C(k) - P(Po in C)) for k = 0..K."""
        k = np.arange(self.K + 1)
        f = self.values
        return self.lam * f[1:] - k * f[:-1] - (self.indicator(k) - self.p_C)

    def delta(self) -> np.ndarray:
        """Delta f(k) = f(k+1) - f(k) for k = 0..K."""
        return np.diff(self.values)

    def delta2(self) -> np.ndarray:
        """Delta^2 f(k) for k = 0..K-1."""
        return np.diff(self.values, n=2)


def chen_default_K(lam: float) -> int:
    """Smallest K with P(Po(lam) > K) < 1e-12."""
    K = int(lam)
    while stats.poisson.sf(K, lam) >= 1e-12:
        K += max(1, int(math.sqrt(lam)))
    while K > 0 and stats.poisson.sf(K - 1, lam) < 1e-12:
        K -= 1
    return K


def chen_solve(C: Iterable[int], lam: float, K: int | None = None, complement: bool = False) -> ChenSolution:
    """Solve lam f(k+1) - k f(k) = 1_C(k) - P(Po(lam) in C) with f(0) = 0.

    C is a finite set of non-negative integers, or its complement when
    ``complement`` is set. For k <= lam the forward sum is used; beyond that the
    equivalent tail sum, whose terms decay, avoids cancellation.
    """
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    Cset = frozenset(int(c) for c in C)
    if any(c < 0 for c in Cset):
        raise DomainError("C must contain non-negative integers")
    K = chen_default_K(lam) if K is None else int(K)
    if K < 0:
        raise DomainError("K must be non-negative")
    clist = sorted(Cset)
    pmf_C = float(math.fsum(stats.poisson.pmf(clist, lam))) if clist else 0.0
    p_C = 1.0 - pmf_C if complement else pmf_C

    # Tail sums need the indicator beyond K; extend until the Poisson weights vanish.
    top = max(K + 2, (max(clist) + 2) if clist else 0)
    rmax = top + 40 + int(10 * math.sqrt(lam) + lam)
    r = np.arange(rmax + 1)
    ind = np.isin(r, clist).astype(float)
    if complement:
        ind = 1.0 - ind
    g = ind - p_C
    log_lam = math.log(lam)
    logw = r * log_lam - special.gammaln(r + 1)  # log(lam^r / r!)

    vals = np.zeros(K + 2)
    for k in range(1, K + 2):
        pre = special.gammaln(k) - k * log_lam  # log((k-1)! / lam^k)
        if k <= lam:
            terms = np.exp(pre + logw[:k]) * g[:k]
            vals[k] = math.fsum(terms)
        else:
            terms = np.exp(pre + logw[k:]) * g[k:]
            vals[k] = -math.fsum(terms)
    return ChenSolution(Cset, bool(complement), float(lam), K, vals, p_C)


# ------------------------------------------------------------ Poisson bounds


@dataclass(frozen=True)
class LinearPoissonFunctional:
    """F = sum_i c_i eta(B_i) with disjoint B_i of measure mu_i."""

    coeffs: tuple[float, ...]
    measures: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) != len(self.measures) or not self.coeffs:
            raise PreconditionError("coefficients and measures must be non-empty and of equal length")
        if any(m <= 0 for m in self.measures):
            raise PreconditionError("set measures must be positive")

    @property
    def mean(self) -> float:
        return float(sum(c * m for c, m in zip(self.coeffs, self.measures)))


def poisson_tv_bound(spec: LinearPoissonFunctional) -> float:
    """Both terms of the Poisson total-variation bound for a first-chaos functional.

    Here D_t F = -D_t L^{-1} F = c_i on B_i, so <DF, -DL^{-1}F> = sum c_i^2 mu_i is
    deterministic and the second integrand is c_i^2 |c_i - 1| on B_i.
    """
    cs = spec.coeffs
    for c in cs:
        if float(c) != int(c) or c < 0:
            raise PreconditionError("only non-negative integer coefficients give an N-valued functional")
    if all(c == 0 for c in cs):
        raise PreconditionError("E F must be positive")
    lam = spec.mean
    gamma = sum(c * c * m for c, m in zip(cs, spec.measures))
    second = sum(c * c * abs(c - 1) * m for c, m in zip(cs, spec.measures))
    factor = -math.expm1(-lam)
    return factor / lam * abs(lam - gamma) + factor / lam**2 * second


def poisson_wasserstein_bound(lam: float) -> float:
    """Evaluated Wasserstein bound 1/sqrt(lam) for (eta(B) - lam)/sqrt(lam)."""
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return 1.0 / math.sqrt(lam)


def tv_between_pmfs(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation between two pmfs on 0..len-1 (zero padded)."""
    n = max(len(p), len(q))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(p)] = p
    b[: len(q)] = q
    return 0.5 * float(np.sum(np.abs(a - b)))
