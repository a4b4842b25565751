"""Dense kernel tensors over an n-point orthonormal basis.

A kernel of order q is an array of shape (n,)*q. Order-0 kernels are scalars
carried as 0-d arrays, so chains of contractions compose without special cases.

Contraction conventions
-----------------------
``contract(f, g, r)`` pairs the *last* r arguments of f with the *last* r
arguments of g, in the same order::

    (f (x)_r g)(t, s) = sum_x f(t, x_1..x_r) g(s, x_1..x_r)

``free_contract(f, g, r)`` pairs the last r arguments of f with the *first* r
arguments of g, in reversed order::

    (f ^_r g)(t, s) = sum_x f(t, x_1..x_r) g(x_r..x_1, s)

Serialization
-------------
CSV: header ``i1,...,iq,value``; one row per entry, indices 1-based, every
entry of the dense tensor present exactly once. An order-0 kernel is a single
``value`` column plus a ``# n=<n>`` comment line.

Binary: little-endian. Two int64 words (q, n) followed by n**q float64 values
in row-major (C) order.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapacityError, DomainError, ParseError, ShapeError

MAX_ENTRIES = 10**7
SYMMETRIZE_MAX_ORDER = 8
SYMMETRY_RTOL = 1e-12


def _check_capacity(q: int, n: int) -> None:
    if q < 0 or n < 1:
        raise DomainError(f"invalid kernel shape q={q}, n={n}")
    if n**q > MAX_ENTRIES:
        raise CapacityError(f"kernel with n={n}, q={q} has {n**q} entries, cap is {MAX_ENTRIES}")


@dataclass(frozen=True, eq=False)
class Kernel:
    """Immutable dense kernel. ``coeffs`` is read-only."""

    coeffs: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True)
        n = self.n
        if c.ndim > 0:
            if len(set(c.shape)) != 1:
                raise ShapeError(f"kernel tensor must be cubical, got shape {c.shape}")
            if n and n != c.shape[0]:
                raise ShapeError(f"declared n={n} but tensor side is {c.shape[0]}")
            n = c.shape[0]
        elif not n:
            n = 1
        _check_capacity(c.ndim, n)
        if not np.all(np.isfinite(c)):
            raise DomainError("kernel has non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "n", int(n))

    @property
    def q(self) -> int:
        return self.coeffs.ndim

    @property
    def symmetric(self) -> bool:
        """True if invariant under every index permutation, up to 1e-12 relative."""
        return is_symmetric(self)

    @property
    def mirror_symmetric(self) -> bool:
        """Exact equality with the index-reversed tensor."""
        return bool(np.array_equal(self.coeffs, _reverse(self.coeffs)))

    def norm_sq(self) -> float:
        return float(np.sum(self.coeffs * self.coeffs))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def scalar(self) -> float:
        if self.q != 0:
            raise ShapeError(f"order-{self.q} kernel is not a scalar")
        return float(self.coeffs)

    def __add__(self, other: "Kernel") -> "Kernel":
        _same_shape(self, other)
        return Kernel(self.coeffs + other.coeffs, n=self.n)

    def __sub__(self, other: "Kernel") -> "Kernel":
        _same_shape(self, other)
        return Kernel(self.coeffs - other.coeffs, n=self.n)

    def __mul__(self, c: float) -> "Kernel":
        return Kernel(self.coeffs * float(c), n=self.n)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "Kernel":
        return Kernel(self.coeffs / float(c), n=self.n)

    def __repr__(self) -> str:
        return f"Kernel(q={self.q}, n={self.n}, norm={self.norm():.6g})"


def _same_shape(f: Kernel, g: Kernel) -> None:
    if f.q != g.q or f.n != g.n:
        raise ShapeError(f"shape mismatch: (q={f.q}, n={f.n}) vs (q={g.q}, n={g.n})")


def _reverse(c: np.ndarray) -> np.ndarray:
    return np.transpose(c, tuple(reversed(range(c.ndim))))


def basis(n: int, i: int) -> Kernel:
    """Order-1 unit vector e_i, with i in 1..n."""
    if not 1 <= i <= n:
        raise DomainError(f"index {i} outside 1..{n}")
    v = np.zeros(n)
    v[i - 1] = 1.0
    return Kernel(v)


def scalar_kernel(value: float, n: int = 1) -> Kernel:
    return Kernel(np.array(float(value)), n=n)


def from_matrix(a) -> Kernel:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeError("expected a square matrix")
    return Kernel(a)


def is_symmetric(f: Kernel, rtol: float = SYMMETRY_RTOL) -> bool:
    c = f.coeffs
    if c.ndim <= 1:
        return True
    tol = rtol * float(np.max(np.abs(c))) if c.size else 0.0
    # Adjacent transpositions generate the symmetric group.
    for k in range(c.ndim - 1):
        axes = list(range(c.ndim))
        axes[k], axes[k + 1] = axes[k + 1], axes[k]
        if np.max(np.abs(c - np.transpose(c, axes))) > tol:
            return False
    return True


def symmetrize(f: Kernel) -> Kernel:
    """Average over all q! index permutations.

    The average is then canonicalized (each entry copied from its sorted index
    tuple) so the result is exactly, not just approximately, symmetric.
    """
    q = f.q
    if q <= 1:
        return f
    if q > SYMMETRIZE_MAX_ORDER:
        raise CapacityError(f"symmetrization enumerates q! permutations; q={q} exceeds {SYMMETRIZE_MAX_ORDER}")
    c = f.coeffs
    if np.array_equal(_canonicalize(c), c):
        return f
    acc = np.zeros_like(c)
    for perm in itertools.permutations(range(q)):
        acc += np.transpose(c, perm)
    acc /= math.factorial(q)
    return Kernel(_canonicalize(acc), n=f.n)


def _canonicalize(c: np.ndarray) -> np.ndarray:
    shape = c.shape
    idx = np.indices(shape).reshape(c.ndim, -1)
    flat = np.ravel_multi_index(np.sort(idx, axis=0), shape)
    return c.ravel()[flat].reshape(shape)


def tensor(f: Kernel, g: Kernel) -> Kernel:
    """(f (x) g)(x, y) = f(x) g(y)."""
    if f.n != g.n:
        raise ShapeError(f"basis sizes differ: {f.n} vs {g.n}")
    _check_capacity(f.q + g.q, f.n)
    return Kernel(np.multiply.outer(f.coeffs, g.coeffs), n=f.n)


def _check_contraction(f: Kernel, g: Kernel, r: int) -> int:
    if f.n != g.n:
        raise ShapeError(f"basis sizes differ: {f.n} vs {g.n}")
    r = int(r)
    if not 0 <= r <= min(f.q, g.q):
        raise DomainError(f"contraction index r={r} outside 0..{min(f.q, g.q)}")
    _check_capacity(f.q + g.q - 2 * r, f.n)
    return r


def contract(f: Kernel, g: Kernel, r: int) -> Kernel:
    """Classical r-th contraction: trailing arguments of f against trailing arguments of g."""
    r = _check_contraction(f, g, r)
    p, q = f.q, g.q
    out = np.tensordot(f.coeffs, g.coeffs, axes=(list(range(p - r, p)), list(range(q - r, q))))
    return Kernel(out, n=f.n)


def free_contract(f: Kernel, g: Kernel, r: int) -> Kernel:
    """Free r-th contraction: trailing arguments of f against leading arguments of g, reversed."""
    r = _check_contraction(f, g, r)
    p = f.q
    axes_f = [p - r + i for i in range(r)]
    axes_g = [r - 1 - i for i in range(r)]
    out = np.tensordot(f.coeffs, g.coeffs, axes=(axes_f, axes_g))
    return Kernel(out, n=f.n)


def mirror_adjoint(f: Kernel) -> Kernel:
    """f*(t_1..t_q) = f(t_q..t_1)."""
    return Kernel(_reverse(f.coeffs), n=f.n)


def inner(f: Kernel, g: Kernel) -> float:
    _same_shape(f, g)
    return float(np.sum(f.coeffs * g.coeffs))


def norm(f: Kernel) -> float:
    return f.norm()


# ---------------------------------------------------------------- serialization


def _fmt(v: float) -> str:
    return repr(float(v))


def save_csv(f: Kernel, path) -> None:
    Path(path).write_text(dumps_csv(f))


def dumps_csv(f: Kernel) -> str:
    buf = io.StringIO()
    q = f.q
    if q == 0:
        buf.write(f"# n={f.n}\n")
    buf.write(",".join([f"i{k + 1}" for k in range(q)] + ["value"]) + "\n")
    for idx in itertools.product(range(f.n), repeat=q):
        buf.write(",".join([str(i + 1) for i in idx] + [_fmt(f.coeffs[idx])]) + "\n")
    return buf.getvalue()


def load_csv(path) -> Kernel:
    return loads_csv(Path(path).read_text())


def loads_csv(text: str) -> Kernel:
    lines = text.splitlines()
    n_decl = None
    body = []
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if s[1:].strip().startswith("n="):
                try:
                    n_decl = int(s[1:].strip()[2:])
                except ValueError:
                    raise ParseError("bad n declaration", lineno) from None
            continue
        body.append((lineno, s))
    if not body:
        raise ParseError("empty kernel file", 1)
    header_line, header = body[0]
    cols = [c.strip() for c in next(csv.reader([header]))]
    if not cols or cols[-1] != "value":
        raise ParseError("header must end with 'value'", header_line)
    q = len(cols) - 1
    if cols[:-1] != [f"i{k + 1}" for k in range(q)]:
        raise ParseError("index columns must be named i1..iq", header_line)
    rows = []
    for lineno, s in body[1:]:
        fields = next(csv.reader([s]))
        if len(fields) != q + 1:
            raise ParseError(f"expected {q + 1} fields, got {len(fields)}", lineno)
        try:
            idx = tuple(int(v) for v in fields[:q])
            val = float(fields[q])
        except ValueError:
            raise ParseError("non-numeric field", lineno) from None
        if any(i < 1 for i in idx):
            raise ParseError("indices are 1-based", lineno)
        if not math.isfinite(val):
            raise ParseError("non-finite value", lineno)
        rows.append((lineno, idx, val))
    if q == 0:
        if len(rows) != 1:
            raise ParseError("order-0 kernel needs exactly one value", body[-1][0])
        return Kernel(np.array(rows[0][2]), n=n_decl or 1)
    n = max(max(idx) for _, idx, _ in rows) if rows else 0
    if n**q > MAX_ENTRIES:
        raise CapacityError(f"kernel with n={n}, q={q} exceeds cap")
    c = np.full((n,) * q, np.nan)
    for lineno, idx, val in rows:
        pos = tuple(i - 1 for i in idx)
        if not np.isnan(c[pos]):
            raise ParseError(f"duplicate entry {idx}", lineno)
        c[pos] = val
    if np.isnan(c).any():
        raise ParseError(f"missing entries: expected {n**q} rows, got {len(rows)}", body[-1][0])
    return Kernel(c)


_HEADER = struct.Struct("<qq")


def dumps_binary(f: Kernel) -> bytes:
    return _HEADER.pack(f.q, f.n) + np.ascontiguousarray(f.coeffs, dtype="<f8").tobytes()


def loads_binary(data: bytes) -> Kernel:
    if len(data) < _HEADER.size:
        raise ParseError("truncated header", 1)
    q, n = _HEADER.unpack_from(data)
    if q < 0 or n < 1:
        raise ParseError(f"invalid header q={q}, n={n}", 1)
    if n**q > MAX_ENTRIES:
        raise CapacityError(f"kernel with n={n}, q={q} exceeds cap")
    expected = _HEADER.size + 8 * n**q
    if len(data) != expected:
        raise ParseError(f"expected {expected} bytes, got {len(data)}", 1)
    vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
    return Kernel(vals.reshape((n,) * q), n=n)


def save_binary(f: Kernel, path) -> None:
    Path(path).write_bytes(dumps_binary(f))


def load_binary(path) -> Kernel:
    return loads_binary(Path(path).read_bytes())


def load_kernel(path) -> Kernel:
    """Load a kernel from CSV or binary, chosen by content sniffing."""
    data = Path(path).read_bytes()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        return loads_binary(data)
    stripped = text.lstrip()
    if stripped.startswith("i1") or stripped.startswith("value") or stripped.startswith("#"):
        return loads_csv(text)
    return loads_binary(data)
