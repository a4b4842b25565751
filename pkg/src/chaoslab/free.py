"""Free-probability counterpart: semicircular laws and Wigner-integral moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import ChaosVar, kappa4_exact, second_moment_exact
from .errors import CapacityError, DomainError, PreconditionError
from .kernels import Kernel, contract, free_contract, is_symmetric
from .rng import make_rng

CATALAN_CAP = 30
FREE_MAX_K = 10
FREE_MAX_Q = 3


def catalan(k: int) -> int:
    """C_k = binom(2k, k) / (k + 1)."""
    k = int(k)
    if k < 0:
        raise DomainError("k must be non-negative")
    if k > CATALAN_CAP:
        raise CapacityError(f"catalan index {k} exceeds cap {CATALAN_CAP}")
    return math.comb(2 * k, k) // (k + 1)


def semicircular_moment(m: float, sigma2: float, k: int) -> float:
    """E[S^k] for S semicircular with mean m and variance sigma2.

    Centered moments are C_{k/2} sigma^k for even k and 0 for odd k; raw moments
    follow by the binomial shift.
    """
    if not sigma2 > 0:
        raise DomainError("variance must be positive")
    k = int(k)
    if k < 0 or k > 2 * CATALAN_CAP:
        raise CapacityError(f"moment order {k} outside 0..{2 * CATALAN_CAP}")
    sigma = math.sqrt(sigma2)
    total = 0.0
    for j in range(0, k + 1, 2):
        total += math.comb(k, j) * m ** (k - j) * catalan(j // 2) * sigma**j
    return total


def semicircular_cdf(x, m: float = 0.0, sigma2: float = 1.0):
    s = math.sqrt(sigma2)
    y = np.clip((np.asarray(x, dtype=float) - m) / s, -2.0, 2.0)
    return 0.5 + (y * np.sqrt(4.0 - y * y)) / (4.0 * math.pi) + np.arcsin(y / 2.0) / math.pi


def semicircular_ppf(u, m: float = 0.0, sigma2: float = 1.0):
    """Inverse CDF by safeguarded Newton iteration on [-2, 2]."""
    u = np.asarray(u, dtype=float)
    lo = np.full(u.shape, -2.0)
    hi = np.full(u.shape, 2.0)
    # Start from a cosine-based guess which is exact at the endpoints and the median.
    y = -2.0 * np.cos(math.pi * u)
    for _ in range(60):
        F = semicircular_cdf(y) - u
        lo = np.where(F < 0, y, lo)
        hi = np.where(F > 0, y, hi)
        dens = np.sqrt(np.clip(4.0 - y * y, 0.0, None)) / (2.0 * math.pi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dens > 1e-12, F / dens, 0.0)
        y_new = y - step
        bad = (y_new <= lo) | (y_new >= hi) | (dens <= 1e-12)
        y_new = np.where(bad, 0.5 * (lo + hi), y_new)
        if np.max(np.abs(y_new - y)) < 1e-15:
            y = y_new
            break
        y = y_new
    return m + math.sqrt(sigma2) * y


def semicircular_sample(m: float, sigma2: float, R: int, seed) -> np.ndarray:
    """R inverse-CDF draws from the semicircular law S(m, sigma2)."""
    if not sigma2 > 0:
        raise DomainError("variance must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(int(seed))
    return semicircular_ppf(rng.random(int(R)), m, sigma2)


@dataclass(frozen=True, eq=False)
class FreeChaosVar:
    """Wigner integral I_q^S(f) of a mirror-symmetric kernel."""

    kernel: Kernel

    def __post_init__(self):
        if not self.kernel.mirror_symmetric:
            raise PreconditionError("a Wigner integral is self-adjoint only for mirror-symmetric kernels")

    @property
    def q(self) -> int:
        return self.kernel.q


def free_index_sets(k: int, q: int) -> list[tuple[int, ...]]:
    """Tuples (r_1..r_{k-1}) in {0..q} with r_j <= j q - 2 sum_{i<j} r_i and 2 sum r = k q."""
    out: list[tuple[int, ...]] = []
    if k < 1:
        return out
    if (k * q) % 2:
        return out

    def dfs(prefix, order):
        j = len(prefix) + 1
        if j == k:
            if order == 0:
                out.append(tuple(prefix))
            return
        # contracting the current order-`order` kernel with f
        for r in range(0, min(q, order) + 1):
            new = order + q - 2 * r
            if new > (k - j - 1) * q:
                continue  # cannot reach order 0 in the remaining steps
            dfs(prefix + [r], new)

    dfs([], q)
    return out


def free_moment(F: FreeChaosVar, k: int) -> float:
    """phi(F^k) as the sum of iterated free contractions over the feasible tuples."""
    k, q = int(k), F.q
    if k < 1:
        raise DomainError("k must be positive")
    if k > FREE_MAX_K or q > FREE_MAX_Q:
        raise CapacityError(f"enumeration supports k <= {FREE_MAX_K}, q <= {FREE_MAX_Q}")
    if k == 1:
        return float(F.kernel.coeffs) if q == 0 else 0.0
    if (k * q) % 2:
        return 0.0
    f = F.kernel
    total = 0.0

    def dfs(g: Kernel, j: int):
        nonlocal total
        if j == k:
            if g.q == 0:
                total += g.scalar()
            return
        for r in range(0, min(q, g.q) + 1):
            new = g.q + q - 2 * r
            if new > (k - j - 1) * q:
                continue
            dfs(free_contract(g, f, r), j + 1)

    dfs(f, 1)
    return total


def free_fourth(F: FreeChaosVar) -> float:
    """2 |f|^4 + sum_{r=1}^{q-1} |f ^_r f|^2."""
    f = F.kernel
    total = 2.0 * f.norm_sq() ** 2
    for r in range(1, f.q):
        total += free_contract(f, f, r).norm_sq()
    return total


def transfer_check(kernels: list[Kernel], q: int | None = None, tol: float = 1e-2) -> list[dict]:
    """Classical and free fourth-moment gaps side by side for symmetric kernels.

    Each record holds the two variances, the classical fourth cumulant, the free
    excess phi(F^4) - 2 phi(F^2)^2 and the largest contraction norms. The
    ``consistent`` flag says whether the two gaps, relative to the squared
    variance, fall on the same side of ``tol``.
    """
    out = []
    for f in kernels:
        if q is not None and f.q != q:
            raise DomainError(f"expected order {q}, got {f.q}")
        if not is_symmetric(f):
            raise PreconditionError("transfer check needs symmetric kernels")
        F = ChaosVar(f)
        G = FreeChaosVar(f if f.mirror_symmetric else Kernel(0.5 * (f.coeffs + np.transpose(f.coeffs, tuple(reversed(range(f.q)))))))
        cvar = second_moment_exact(F)
        fvar = f.norm_sq()
        k4 = kappa4_exact(F) if f.q >= 2 else 0.0
        fex = free_fourth(G) - 2.0 * fvar**2
        cmax = max((contract(f, f, r).norm() for r in range(1, f.q)), default=0.0)
        fmax = max((free_contract(f, f, r).norm() for r in range(1, f.q)), default=0.0)
        rc = k4 / cvar**2 if cvar else 0.0
        rf = fex / fvar**2 if fvar else 0.0
        out.append(
            {
                "classical_variance": cvar,
                "free_variance": fvar,
                "classical_kappa4": k4,
                "free_excess": fex,
                "max_contraction": cmax,
                "max_free_contraction": fmax,
                "classical_ratio": rc,
                "free_ratio": rf,
                "consistent": (rc < tol) == (rf < tol),
            }
        )
    return out
