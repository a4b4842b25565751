"""One-dimensional Gaussian analysis.

Hermite polynomials here are the probabilists' family, orthogonal for the
standard normal density: H_0 = 1, H_1 = x, H_{q+1} = x H_q - q H_{q-1}.
Gauss-Hermite quadrature uses ``numpy.polynomial.hermite_e`` whose weight is
exp(-x^2/2); the weights are divided by sqrt(2*pi) so they sum to one and
quadrature sums are expectations under N(0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e

from .errors import CapacityError, DegenerateError, DomainError

POLY_CAP = 200
FACTORIAL_EXACT_CAP = 30
RANK_RTOL = 1e-10


def _check_order(q: int) -> int:
    q = int(q)
    if q < 0:
        raise DomainError(f"polynomial order must be non-negative, got {q}")
    if q > POLY_CAP:
        raise CapacityError(f"polynomial order {q} exceeds cap {POLY_CAP}")
    return q


def hermite_eval(q: int, x):
    """H_q(x) by the three-term recursion. Works on scalars and arrays."""
    q = _check_order(q)
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), x.copy()
    if q == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for k in range(1, q):
        h_prev, h = h, x * h - k * h_prev
    return h if h.ndim else float(h)


def hermite_table(qmax: int, x) -> np.ndarray:
    """Stack of H_0(x) .. H_qmax(x) along a new leading axis."""
    qmax = _check_order(qmax)
    x = np.asarray(x, dtype=float)
    out = np.empty((qmax + 1,) + x.shape)
    out[0] = 1.0
    if qmax >= 1:
        out[1] = x
    for k in range(1, qmax):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


def tchebycheff_eval(q: int, x):
    """Second-kind Tchebycheff U_q on [-2, 2] scaling: U_{k+1} = x U_k - U_{k-1}."""
    q = _check_order(q)
    x = np.asarray(x, dtype=float)
    u_prev, u = np.ones_like(x), x.copy()
    if q == 0:
        return u_prev if u_prev.ndim else float(u_prev)
    for _ in range(1, q):
        u_prev, u = u, x * u - u_prev
    return u if u.ndim else float(u)


def factorial(q: int) -> float:
    """q! as a float; exact for q <= 30 and via lgamma beyond."""
    if q <= FACTORIAL_EXACT_CAP:
        return float(math.factorial(q))
    return math.exp(math.lgamma(q + 1))


def log_factorial(q: int) -> float:
    return math.lgamma(q + 1)


def gauss_hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights for E[h(N)], exact for polynomials of degree < 2*nodes."""
    x, w = hermite_e.hermegauss(int(nodes))
    return x, w / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class HermiteSeries:
    """Coefficients a_0..a_Qmax of phi = sum_q a_q H_q."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) == 0:
            raise DomainError("a Hermite series needs at least one coefficient")
        if len(self.coeffs) - 1 > POLY_CAP:
            raise CapacityError(f"truncation order exceeds cap {POLY_CAP}")

    @property
    def qmax(self) -> int:
        return len(self.coeffs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs)

    @classmethod
    def basis(cls, q: int, qmax: int | None = None) -> "HermiteSeries":
        qmax = q if qmax is None else qmax
        c = [0.0] * (qmax + 1)
        c[q] = 1.0
        return cls(tuple(c))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        # Clenshaw-free evaluation; qmax is small in practice.
        tab = hermite_table(self.qmax, x)
        out = np.tensordot(self.array, tab, axes=(0, 0))
        return out if np.ndim(out) else float(out)


def hermite_expand(phi: Callable, qmax: int, nodes: int | None = None) -> HermiteSeries:
    """a_q = E[phi(N) H_q(N)] / q! by Gauss-Hermite quadrature."""
    qmax = _check_order(qmax)
    nodes = 2 * qmax + 16 if nodes is None else int(nodes)
    if nodes < qmax + 1:
        raise DomainError(f"{nodes} nodes cannot resolve order {qmax}")
    x, w = gauss_hermite(nodes)
    vals = np.asarray(phi(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape)
    if not np.all(np.isfinite(vals)):
        raise DomainError("phi is not finite at every quadrature node")
    tab = hermite_table(qmax, x)
    raw = tab @ (w * vals)
    coeffs = [raw[q] / factorial(q) for q in range(qmax + 1)]
    return HermiteSeries(tuple(coeffs))


def l2_norm_sq(series: HermiteSeries) -> float:
    """E[phi(N)^2] = sum_q q! a_q^2."""
    total = 0.0
    for q, a in enumerate(series.coeffs):
        if a == 0.0:
            continue
        if q > FACTORIAL_EXACT_CAP:
            total += math.exp(log_factorial(q) + 2.0 * math.log(abs(a)))
        else:
            total += factorial(q) * a * a
    return total


def hermite_rank(series: HermiteSeries, eps: float | None = None) -> int:
    """Smallest q with |a_q| > eps.

    The default tolerance is 1e-10 times the L2 norm of the series, which keeps
    quadrature round-off of polynomial inputs from registering as a coefficient.
    """
    if eps is None:
        eps = RANK_RTOL * math.sqrt(l2_norm_sq(series))
    for q, a in enumerate(series.coeffs):
        if abs(a) > eps:
            return q
    raise DegenerateError(f"no coefficient exceeds tolerance {eps:g}")


def ou_apply(series: HermiteSeries, t: float) -> HermiteSeries:
    """Ornstein-Uhlenbeck semigroup: a_q -> exp(-q t) a_q."""
    if not t >= 0:
        raise DomainError(f"time must be non-negative, got {t}")
    return HermiteSeries(tuple(a * math.exp(-q * t) for q, a in enumerate(series.coeffs)))


def generator_apply(series: HermiteSeries) -> HermiteSeries:
    """L phi has coefficients -q a_q."""
    return HermiteSeries(tuple(-q * a for q, a in enumerate(series.coeffs)))


def derivative(series: HermiteSeries) -> HermiteSeries:
    """phi' from H_q' = q H_{q-1}: coefficient (q+1) a_{q+1}."""
    c = series.coeffs
    if len(c) == 1:
        return HermiteSeries((0.0,))
    return HermiteSeries(tuple((q + 1) * c[q + 1] for q in range(len(c) - 1)))
