"""Discrete Wiener chaos over n i.i.d. standard Gaussians.

I_q(f) for a symmetric kernel f is the Wick polynomial
``sum_i f(i_1..i_q) :X_{i_1} ... X_{i_q}:``. Grouping index tuples by their
multiset turns each Wick product into a product of Hermite polynomials,

    I_q(f) = sum over multisets m of (q! / prod alpha!) f(m) prod_j H_{alpha_j}(X_j),

where alpha is the multiplicity profile of m. This keeps diagonal entries exact,
so I_q(e_k^{(x)q}) is literally H_q(X_k).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import sparse

from .errors import CapacityError, DomainError, PreconditionError
from .hermite import hermite_table
from .kernels import Kernel, contract, inner, symmetrize

SAMPLE_MAX_ORDER = 4
CUMULANT_MAX_ORDER = 4
CUMULANT_MAX_S = 8
NORMALIZATION_TOL = 1e-9
_CHUNK_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class ChaosVar:
    """F = I_q(kernel) + constant_offset, with a symmetric kernel."""

    kernel: Kernel
    constant_offset: float = 0.0

    def __post_init__(self):
        if not self.kernel.symmetric:
            raise PreconditionError("chaos kernels must be symmetric; call symmetrize() first")

    @property
    def q(self) -> int:
        return self.kernel.q

    @property
    def n(self) -> int:
        return self.kernel.n


# ------------------------------------------------------------------ sampling


@dataclass(frozen=True)
class _Pattern:
    runs: tuple[tuple[int, int], ...]  # (position of run start, multiplicity)
    cols: np.ndarray  # (M, len(runs)) zero-based variable indices
    coeff: np.ndarray  # (M,)


def _wick_plan(kernel: Kernel) -> list[_Pattern]:
    q, n = kernel.q, kernel.n
    if q == 0:
        return []
    combos = np.array(list(itertools.combinations_with_replacement(range(n), q)), dtype=np.intp)
    vals = kernel.coeffs[tuple(combos.T)]
    keep = vals != 0.0
    combos, vals = combos[keep], vals[keep]
    if combos.size == 0:
        return []
    same = combos[:, 1:] == combos[:, :-1]
    codes = same @ (1 << np.arange(q - 1)) if q > 1 else np.zeros(len(combos), dtype=int)
    plan = []
    for code in np.unique(codes):
        sel = codes == code
        runs = []
        start = 0
        for pos in range(1, q + 1):
            if pos == q or not (int(code) >> (pos - 1)) & 1:
                runs.append((start, pos - start))
                start = pos
        mult = math.factorial(q) / math.prod(math.factorial(a) for _, a in runs)
        cols = combos[sel][:, [s for s, _ in runs]]
        plan.append(_Pattern(tuple(runs), np.ascontiguousarray(cols), mult * vals[sel]))
    return plan


def _check_sample_order(F: ChaosVar) -> None:
    if F.q > SAMPLE_MAX_ORDER:
        raise CapacityError(f"sampling supports q <= {SAMPLE_MAX_ORDER}, got {F.q}")


def sample_chaos_batch(F: ChaosVar, rows: np.ndarray) -> np.ndarray:
    """Evaluate I_q(f) + offset on each row of an (R, n) Gaussian table."""
    _check_sample_order(F)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != F.n:
        raise DomainError(f"rows have {rows.shape[1]} columns, kernel basis size is {F.n}")
    R = rows.shape[0]
    out = np.full(R, float(F.constant_offset))
    if F.q == 0:
        return out + F.kernel.scalar()
    plan = _wick_plan(F.kernel)
    if not plan:
        return out
    width = max(len(p.coeff) for p in plan)
    step = max(1, _CHUNK_CELLS // max(width, 1))
    for b in range(0, R, step):
        tab = hermite_table(F.q, rows[b:b + step])
        acc = np.zeros(tab.shape[1])
        for p in plan:
            prod = None
            for k, (_, a) in enumerate(p.runs):
                h = tab[a][:, p.cols[:, k]]
                prod = h if prod is None else prod * h
            acc += prod @ p.coeff
        out[b:b + step] += acc
    return out


def sample_chaos(F: ChaosVar, row) -> float:
    """One realization of I_q(f) + offset at a Gaussian n-vector."""
    return float(sample_chaos_batch(F, np.asarray(row, dtype=float)[None, :])[0])


def gradient_batch(F: ChaosVar, rows: np.ndarray) -> np.ndarray:
    """Partial derivatives dF/dX_j for each row, shape (R, n)."""
    _check_sample_order(F)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    R, n = rows.shape
    if n != F.n:
        raise DomainError(f"rows have {n} columns, kernel basis size is {F.n}")
    out = np.zeros((R, n))
    if F.q == 0:
        return out
    plan = _wick_plan(F.kernel)
    if not plan:
        return out
    width = max(len(p.coeff) for p in plan)
    step = max(1, _CHUNK_CELLS // max(width, 1))
    for b in range(0, R, step):
        tab = hermite_table(F.q, rows[b:b + step])
        for p in plan:
            hs = [tab[a][:, p.cols[:, k]] for k, (_, a) in enumerate(p.runs)]
            for k, (_, a) in enumerate(p.runs):
                # H_a' = a H_{a-1}
                term = a * tab[a - 1][:, p.cols[:, k]] * p.coeff
                for l, h in enumerate(hs):
                    if l != k:
                        term = term * h
                scatter = sparse.csr_matrix(
                    (np.ones(len(p.coeff)), (np.arange(len(p.coeff)), p.cols[:, k])),
                    shape=(len(p.coeff), n),
                )
                out[b:b + step] += np.asarray((scatter.T @ term.T).T)
    return out


def gradient_eval(F: ChaosVar, row) -> np.ndarray:
    """Malliavin gradient (dF/dX_1, ..., dF/dX_n) at one row."""
    return gradient_batch(F, np.asarray(row, dtype=float)[None, :])[0]


def malliavin_gamma_batch(F: ChaosVar, rows: np.ndarray) -> np.ndarray:
    """<DF, -DL^{-1}F> = |DF|^2 / q for a pure chaos variable."""
    if F.q == 0:
        return np.zeros(np.atleast_2d(rows).shape[0])
    g = gradient_batch(F, rows)
    return np.einsum("ij,ij->i", g, g) / F.q


# ------------------------------------------------------------- exact moments


def second_moment_exact(F: ChaosVar) -> float:
    """E[(F - offset)^2] = q! |f|^2."""
    return math.factorial(F.q) * F.kernel.norm_sq()


def _sym_contraction_norms(f: Kernel) -> dict[int, float]:
    return {r: symmetrize(contract(f, f, r)).norm_sq() for r in range(1, f.q)}


def kappa4_exact(F: ChaosVar) -> float:
    """Fourth cumulant E F^4 - 3 (E F^2)^2 from symmetrized contraction norms."""
    q = F.q
    if q < 2:
        raise DomainError("the fourth-cumulant formula needs q >= 2")
    norms = _sym_contraction_norms(F.kernel)
    total = 0.0
    for r, v in norms.items():
        total += r * math.factorial(r) ** 2 * math.comb(q, r) ** 4 * math.factorial(2 * q - 2 * r) * v
    return 3.0 / q * total


def gradient_variance_exact(F: ChaosVar) -> float:
    """E[(sigma^2 - |DF|^2 / q)^2]."""
    q = F.q
    if q < 1:
        raise DomainError("needs q >= 1")
    norms = _sym_contraction_norms(F.kernel)
    total = 0.0
    for r, v in norms.items():
        total += (r / q) ** 2 * math.factorial(r) ** 2 * math.comb(q, r) ** 4 * math.factorial(2 * q - 2 * r) * v
    return total


def fourth_moment_bound(F: ChaosVar) -> float:
    """Total-variation bound 2 sqrt((q-1)/(3q) |E F^4 - 3|) for unit-variance F."""
    q = F.q
    if q < 2:
        raise DomainError("the fourth-moment bound needs q >= 2")
    if abs(second_moment_exact(F) - 1.0) > NORMALIZATION_TOL:
        raise PreconditionError("normalize F to unit variance first")
    return 2.0 * math.sqrt((q - 1) / (3.0 * q) * abs(kappa4_exact(F)))


# ----------------------------------------------------------------- cumulants


def c_q(q: int, rs: tuple[int, ...]) -> int:
    """Combinatorial constant c_q(r_1..r_a) from its recursion."""
    if not rs:
        raise DomainError("need at least one contraction index")
    return _c_q(int(q), tuple(int(r) for r in rs))


@lru_cache(maxsize=None)
def _c_q(q: int, rs: tuple[int, ...]) -> int:
    r = rs[-1]
    if len(rs) == 1:
        return q * math.factorial(r - 1) * math.comb(q - 1, r - 1) ** 2
    a = len(rs)
    top = a * q - 2 * sum(rs[:-1]) - 1
    return q * math.factorial(r - 1) * math.comb(top, r - 1) * math.comb(q - 1, r - 1) * _c_q(q, rs[:-1])


def cumulant_index_sets(q: int, s: int) -> list[tuple[int, ...]]:
    """All (r_1..r_{s-2}) satisfying the four admissibility constraints."""
    m = s - 2
    if m < 1 or (s * q) % 2:
        return []
    target = m * q // 2
    found = []

    def dfs(prefix: list[int], total: int):
        k = len(prefix)
        if k == m:
            if total == target:
                found.append(tuple(prefix))
            return
        for r in range(1, q + 1):
            # (iv): r_k <= k q - 2 (r_1 + ... + r_{k-1}), 1-based k = len(prefix)+1
            if k >= 1 and r > (k + 1) * q - 2 * total:
                break
            new_total = total + r
            # (iii): partial sums r_1 + ... + r_j < (j + 1) q / 2 for j <= s - 3
            if k + 1 <= m - 1 and 2 * new_total >= (k + 2) * q:
                break
            if new_total > target:
                break
            dfs(prefix + [r], new_total)

    dfs([], 0)
    return found


def cumulant_exact(F: ChaosVar, s: int) -> float:
    """s-th cumulant of F from the closed-form contraction sum."""
    q, s = F.q, int(s)
    if s < 1:
        raise DomainError("cumulant order starts at 1")
    if s > CUMULANT_MAX_S:
        raise CapacityError(f"cumulant order {s} exceeds cap {CUMULANT_MAX_S}")
    if q > CUMULANT_MAX_ORDER:
        raise CapacityError(f"cumulants support q <= {CUMULANT_MAX_ORDER}")
    if s == 1:
        return float(F.constant_offset)
    if s == 2:
        return second_moment_exact(F)
    if q == 0:
        return 0.0
    if q == 1:
        return 0.0
    if (s * q) % 2:
        return 0.0
    f = F.kernel
    total = 0.0
    cache: dict[tuple[int, ...], Kernel] = {}
    for rs in cumulant_index_sets(q, s):
        g = f
        for j in range(1, len(rs) + 1):
            key = rs[:j]
            if key not in cache:
                cache[key] = symmetrize(contract(g, f, rs[j - 1]))
            g = cache[key]
        total += c_q(q, rs) * inner(g, f)
    return math.factorial(q) * math.factorial(s - 1) * total


def spectral_cumulants_q2(F: ChaosVar, s: int) -> float:
    """2^{s-1} (s-1)! sum lambda^s over eigenvalues of the q=2 kernel matrix."""
    if F.q != 2:
        raise DomainError("spectral cumulants need q = 2")
    s = int(s)
    if s < 1:
        raise DomainError("cumulant order starts at 1")
    if s == 1:
        return float(F.constant_offset)
    lam = np.linalg.eigvalsh(F.kernel.coeffs)
    return 2.0 ** (s - 1) * math.factorial(s - 1) * float(np.sum(lam**s))


def moments_from_cumulants(kappas: dict[int, float] | list[float], m_max: int) -> list[float]:
    """Raw moments E[F^0..F^m_max] from cumulants kappa_1.. via
    E[F^{m+1}] = sum_s binom(m, s) kappa_{s+1} E[F^{m-s}]."""
    if isinstance(kappas, dict):
        k = kappas
    else:
        k = {i + 1: v for i, v in enumerate(kappas)}
    mom = [1.0]
    for m in range(m_max):
        mom.append(sum(math.comb(m, s) * k.get(s + 1, 0.0) * mom[m - s] for s in range(m + 1)))
    return mom


def cumulants_from_moments(mom: list[float]) -> list[float]:
    """Inverse of moments_from_cumulants: returns kappa_1..kappa_{len(mom)-1}."""
    kap = [0.0]
    for m in range(len(mom) - 1):
        # E[F^{m+1}] = kappa_{m+1} + sum_{s<m} binom(m,s) kappa_{s+1} E[F^{m-s}]
        rest = sum(math.comb(m, s) * kap[s + 1] * mom[m - s] for s in range(m))
        kap.append(mom[m + 1] - rest)
    return kap[1:]


def sample_cumulants(x: np.ndarray, s_max: int, batches: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Sample cumulants kappa_1..kappa_{s_max} with batch-means standard errors."""
    x = np.asarray(x, dtype=float)

    def est(v):
        c = v.mean()
        d = v - c
        cm = [1.0, 0.0] + [float(np.mean(d**j)) for j in range(2, s_max + 1)]
        kap = cumulants_from_moments(cm)
        kap[0] = c
        return np.array(kap)

    full = est(x)
    if len(x) < 2 * batches:
        return full, np.full(s_max, np.nan)
    parts = np.array([est(p) for p in np.array_split(x, batches)])
    se = parts.std(axis=0, ddof=1) / math.sqrt(batches)
    return full, se


# -------------------------------------------------------------------- Mehler


def mehler_apply(h: Callable, t: float, row, row_prime):
    """h(e^{-t} x + sqrt(1 - e^{-2t}) x'), the integrand of the Mehler formula."""
    if not t >= 0:
        raise DomainError(f"time must be non-negative, got {t}")
    a = math.exp(-t)
    b = math.sqrt(-math.expm1(-2.0 * t))
    return h(a * np.asarray(row, dtype=float) + b * np.asarray(row_prime, dtype=float))
