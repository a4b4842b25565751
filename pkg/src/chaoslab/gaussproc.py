"""Stationary Gaussian sequences: fBm-increment covariance, sampling and sums."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import DivergenceError, DomainError, EmbeddingError, PrecisionError

CLIP_TOL = 1e-8
DEFAULT_K = 100_000
DEFAULT_W = 2**16
_SERIES_MIN_R = 10


def _check_H(H: float) -> float:
    H = float(H)
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H}")
    return H


def fbm_rho(H: float, r):
    """Covariance of unit-lag fBm increments, 0.5(|r+1|^{2H} + |r-1|^{2H} - 2|r|^{2H}).

    For |r| >= 10 the second difference is evaluated through its binomial series
    r^{2H} sum_k binom(2H, 2k) r^{-2k}, which avoids the cancellation of the
    direct formula at large lags.
    """
    H = _check_H(H)
    r = np.abs(np.asarray(r, dtype=float))
    a = 2.0 * H
    out = np.empty_like(r)
    small = r < _SERIES_MIN_R
    rs = r[small]
    out[small] = 0.5 * ((rs + 1.0) ** a + np.abs(rs - 1.0) ** a - 2.0 * rs**a)
    rl = r[~small]
    if rl.size:
        x2 = (1.0 / rl) ** 2
        total = np.zeros_like(rl)
        coef = 1.0  # binom(a, 0)
        xp = np.ones_like(rl)
        for k in range(1, 40):
            # binom(a, 2k) from binom(a, 2k-2)
            coef *= (a - (2 * k - 2)) * (a - (2 * k - 1)) / ((2 * k - 1) * (2 * k))
            xp = xp * x2
            term = coef * xp
            total += term
            if np.all(np.abs(term) <= 1e-18 * np.abs(total)):
                break
        out[~small] = rl**a * total
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CovSeq:
    """Symmetric unit-variance covariance sequence rho on Z.

    ``kind`` is "fbm" (closed form with Hurst index H) or "table" (rho(0..W)
    given, zero beyond the table).
    """

    kind: str
    H: float | None = None
    table: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.kind == "fbm":
            _check_H(self.H)
        elif self.kind == "table":
            if not self.table or self.table[0] != 1.0:
                raise DomainError("a covariance table must start with rho(0) = 1")
            if any(abs(v) > 1.0 for v in self.table):
                raise DomainError("|rho(r)| <= 1 for a unit-variance sequence")
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        else:
            raise DomainError(f"unknown covariance kind {self.kind!r}")

    @classmethod
    def fbm(cls, H: float) -> "CovSeq":
        return cls("fbm", H=float(H))

    @classmethod
    def from_table(cls, values) -> "CovSeq":
        return cls("table", table=tuple(values))

    @classmethod
    def white(cls) -> "CovSeq":
        return cls("table", table=(1.0,))

    @property
    def window(self) -> int | None:
        return None if self.kind == "fbm" else len(self.table) - 1

    def __call__(self, r):
        if self.kind == "fbm":
            return fbm_rho(self.H, r)
        r = np.abs(np.asarray(r, dtype=np.int64))
        tab = np.asarray(self.table)
        out = np.where(r < len(tab), tab[np.minimum(r, len(tab) - 1)], 0.0)
        return out if out.ndim else float(out)

    def asymptotic_constant(self) -> tuple[float, float] | None:
        """(c, beta) with rho(r) ~ c |r|^beta, or None when rho is eventually zero."""
        if self.kind != "fbm" or self.H == 0.5:
            return None
        return self.H * (2 * self.H - 1), 2 * self.H - 2

    def describe(self) -> dict:
        if self.kind == "fbm":
            return {"kind": "fbm", "H": self.H}
        return {"kind": "table", "table": list(self.table)}


# ------------------------------------------------------------------ sampling


@dataclass(frozen=True, eq=False)
class CirculantEmbedding:
    """Davies-Harte embedding of an n x n stationary covariance in a 2n circulant."""

    rho: CovSeq
    n: int
    sqrt_eig: np.ndarray
    min_eigenvalue: float
    clipped: bool

    @classmethod
    def build(cls, rho: CovSeq, n: int) -> "CirculantEmbedding":
        n = int(n)
        if n < 1:
            raise DomainError("n must be positive")
        lags = np.arange(n + 1)
        c = rho(lags)
        row = np.concatenate([c, c[-2:0:-1]])  # length 2n
        eig = np.fft.fft(row).real
        lo = float(eig.min())
        if lo < -CLIP_TOL:
            raise EmbeddingError(f"circulant embedding has eigenvalue {lo:.3g} < -{CLIP_TOL}")
        clipped = lo < 0
        eig = np.clip(eig, 0.0, None)
        return cls(rho, n, np.sqrt(eig / len(row)), lo, clipped)

    @property
    def metadata(self) -> dict:
        return {"embedding_min_eigenvalue": self.min_eigenvalue, "clip_warning": self.clipped}

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` independent paths, shape (count, n).

        One complex FFT yields two independent paths (real and imaginary parts),
        so ceil(count/2) complex Gaussian vectors are consumed.
        """
        m = len(self.sqrt_eig)
        pairs = (count + 1) // 2
        z = rng.standard_normal((pairs, m)) + 1j * rng.standard_normal((pairs, m))
        w = np.fft.fft(z * self.sqrt_eig, axis=1)[:, : self.n]
        out = np.empty((2 * pairs, self.n))
        out[0::2] = w.real
        out[1::2] = w.imag
        return out[:count]


def sample_stationary(rho: CovSeq, n: int, seed) -> tuple[np.ndarray, dict]:
    """One path (X_1..X_n) with E[X_k X_l] = rho(k - l), plus embedding metadata.

    ``seed`` is an integer or a numpy Generator.
    """
    from .rng import GENERATOR_ID, make_rng

    rng = seed if isinstance(seed, np.random.Generator) else make_rng(int(seed))
    emb = CirculantEmbedding.build(rho, n)
    meta = dict(emb.metadata)
    if not isinstance(seed, np.random.Generator):
        meta.update(seed=int(seed), generator_id=GENERATOR_ID)
    return emb.draw(rng, 1)[0], meta


# ------------------------------------------------------------- covariance sums


def rho_power_sum(rho: CovSeq, q: int, K: int = DEFAULT_K, override: bool = False) -> tuple[float, float]:
    """sum_{|k| <= K} rho(k)^q and an estimate of the neglected tail.

    The tail estimate uses rho(k) ~ c k^beta and the integral comparison
    sum_{k > K} k^alpha ~ K^{alpha+1} / (-alpha - 1); it is reported, not added.
    """
    q, K = int(q), int(K)
    if q < 1:
        raise DomainError("power must be positive")
    asym = rho.asymptotic_constant()
    if asym is not None:
        c, beta = asym
        alpha = q * beta
        if alpha >= -1 and not override:
            raise DivergenceError(f"sum of rho^{q} diverges for H={rho.H} (q(2H-2) = {alpha:.3g} >= -1)")
    top = K if rho.window is None else min(K, rho.window)
    k = np.arange(1, top + 1)
    vals = rho(k) ** q
    value = float(rho(0)) ** q + 2.0 * float(np.sum(vals))
    tail = 0.0
    if asym is not None and alpha < -1:
        tail = 2.0 * abs(c) ** q * K ** (alpha + 1) / (-alpha - 1)
    elif asym is not None:
        tail = math.inf
    return value, tail


@dataclass(frozen=True, eq=False)
class ConvolvedSeq:
    """rho^{*m} restricted to |j| <= W (index j stored at position j + W)."""

    m: int
    W: int
    values: np.ndarray
    truncation_error: float

    def __call__(self, j):
        j = np.asarray(j, dtype=np.int64)
        return self.values[j + self.W]


def _truncated_power(rho: CovSeq, m: int, W: int) -> np.ndarray:
    base = rho(np.arange(-W, W + 1))
    out = base
    for _ in range(m - 1):
        out = signal.fftconvolve(out, base)
    c = (len(out) - 1) // 2
    return out[c - W : c + W + 1]


def rho_convolve(rho: CovSeq, m: int, W: int = DEFAULT_W, rtol: float = 1e-6) -> ConvolvedSeq:
    """Iterated convolution rho^{*m} on |j| <= W, built from rho truncated to |j| <= W.

    The truncation error is estimated by repeating the computation at window W/2
    and comparing the inner products <rho^{*m}, rho>; a PrecisionError is raised
    when that difference exceeds rtol times the value.
    """
    m, W = int(m), int(W)
    if m < 1:
        raise DomainError("m must be positive")
    if rho.kind == "fbm" and rho.H >= 0.5 and rho.H != 0.5:
        raise DivergenceError("rho is not absolutely summable for H > 1/2")
    vals = _truncated_power(rho, m, W)
    if m == 1 or rho.window is not None and rho.window * m <= W // 2:
        err = 0.0
    else:
        Wh = W // 2
        half = _truncated_power(rho, m, Wh)
        full_inner = float(np.dot(vals, rho(np.arange(-W, W + 1))))
        half_inner = float(np.dot(half, rho(np.arange(-Wh, Wh + 1))))
        err = abs(full_inner - half_inner)
        if err > rtol * max(abs(full_inner), 1e-300):
            raise PrecisionError(f"window W={W} leaves truncation error {err:.3g} for m={m}")
    return ConvolvedSeq(m, W, vals, err)


def rho_conv_inner(rho: CovSeq, m: int, W: int = DEFAULT_W) -> float:
    """<rho^{*m}, rho> = sum_j rho^{*m}(j) rho(j)."""
    conv = rho_convolve(rho, m, W)
    return float(np.dot(conv.values, rho(np.arange(-W, W + 1))))


def sigma_n_sq_exact(rho: CovSeq, n: int) -> float:
    """Variance of sum_{k<n} (X_k^2 - 1): 2 sum_{|r|<n} (n - |r|) rho(r)^2."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    r = np.arange(1, n)
    return 2.0 * (n * float(rho(0)) ** 2 + 2.0 * float(np.sum((n - r) * rho(r) ** 2)))


def finite_n_variance(coeffs, rho: CovSeq, n: int) -> float:
    """Exact Var(n^{-1/2} sum_k phi(X_k)) for phi = sum_q a_q H_q with a_0 = 0."""
    n = int(n)
    r = np.arange(1, n)
    w = 1.0 - r / n
    rr = rho(r)
    total = 0.0
    for q, a in enumerate(coeffs):
        if q == 0 or a == 0.0:
            continue
        s = float(rho(0)) ** q + 2.0 * float(np.sum(w * rr**q))
        total += math.factorial(q) * a * a * s
    return total
