"""Fourier-Walsh analysis of real functions on {-1,+1}^n.

Subsets of variables are plain ints used as bitmasks: variable ``i``
(1-based, as in x_1..x_n) is bit ``i - 1``. The empty subset ``0`` is the
constant monomial.

Cube points are indexed the same way: point ``p`` has ``x_i = -1`` exactly
when bit ``i - 1`` of ``p`` is set, so ``chi_S(x_p) = (-1)**popcount(S & p)``
and the Walsh-Hadamard transform of a value table, divided by ``2**n``, is
the table of Fourier coefficients indexed by subset mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from . import _kernels

MAX_VARS = 64
MAX_EXACT_VARS = 24
SNAP_TOL = 1e-12


def subset(*indices: int) -> int:
    """Bitmask for the 1-based variable indices given."""
    if len(indices) == 1 and not isinstance(indices[0], int):
        indices = tuple(indices[0])
    mask = 0
    for i in indices:
        if not 1 <= i <= MAX_VARS:
            raise ValueError(f"variable index {i} outside 1..{MAX_VARS}")
        mask |= 1 << (i - 1)
    return mask


def chain(a: int, b: int) -> int:
    """The interval subset {a, a+1, ..., b}; empty when b < a."""
    if b < a:
        return 0
    return ((1 << (b - a + 1)) - 1) << (a - 1)


def indices(S: int) -> tuple[int, ...]:
    """1-based variable indices of a subset mask, ascending."""
    out = []
    i = 1
    while S:
        if S & 1:
            out.append(i)
        S >>= 1
        i += 1
    return tuple(out)


def degree(S: int) -> int:
    return S.bit_count() if hasattr(S, "bit_count") else bin(S).count("1")


def _check_subset(S: int, n: int) -> None:
    if S < 0 or S >> n:
        raise ValueError(f"subset {indices(S) if S >= 0 else S} has variables beyond n={n}")


def format_subset(S: int) -> str:
    return ",".join(str(i) for i in indices(S))


def column_label(S: int) -> str:
    """CSV-safe name for a subset: "1_2_3", or "empty"."""
    return "_".join(str(i) for i in indices(S)) or "empty"


@dataclass(frozen=True)
class SparsePolynomial:
    """A multilinear polynomial sum_S c_S chi_S(x) with finitely many nonzero terms."""

    n: int
    terms: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.n <= MAX_VARS:
            raise ValueError(f"n={self.n} outside 0..{MAX_VARS}")
        clean = {}
        for S, c in dict(self.terms).items():
            S = int(S)
            c = float(c)
            _check_subset(S, self.n)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient on {indices(S)}")
            if c != 0.0:
                clean[S] = c
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @classmethod
    def zero(cls, n: int) -> "SparsePolynomial":
        return cls(n, {})

    @property
    def sparsity(self) -> int:
        return len(self.terms)

    @property
    def degree(self) -> int:
        return max((degree(S) for S in self.terms), default=0)

    def coefficient(self, S: int) -> float:
        return self.terms.get(S, 0.0)

    def scaled(self, c: float) -> "SparsePolynomial":
        return SparsePolynomial(self.n, {S: c * v for S, v in self.terms.items()})

    def __add__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        out = dict(self.terms)
        for S, c in other.terms.items():
            out[S] = out.get(S, 0.0) + c
        return SparsePolynomial(self.n, out)

    def __call__(self, x) -> np.ndarray | float:
        return eval_poly(self, x)

    def dense(self) -> np.ndarray:
        """Coefficient table of length 2**n indexed by subset mask."""
        if self.n > MAX_EXACT_VARS:
            raise ValueError(f"dense table needs n <= {MAX_EXACT_VARS}")
        table = np.zeros(1 << self.n)
        for S, c in self.terms.items():
            table[S] = c
        return table

    def to_text(self) -> str:
        lines = [f"# n={self.n}"]
        lines += [f"{format_subset(S)}:{c!r}" for S, c in self.terms.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n: int | None = None) -> "SparsePolynomial":
        """Parse the ``i1,i2,...:coefficient`` line format (``#`` starts a comment)."""
        terms: dict[int, float] = {}
        header_n = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("n="):
                    header_n = int(body[2:])
                continue
            if not line:
                continue
            if ":" not in line:
                raise ValueError(f"line {lineno}: expected 'indices:coefficient'")
            idx, coef = line.rsplit(":", 1)
            S = subset(*[int(t) for t in idx.split(",") if t.strip()])
            if S in terms:
                raise ValueError(f"line {lineno}: duplicate term {idx}")
            terms[S] = float(coef)
        if n is None:
            n = header_n
        if n is None:
            n = max((S.bit_length() for S in terms), default=0)
        return cls(n, terms)


def eval_monomial(S: int, x) -> np.ndarray | float:
    """chi_S(x): product of the selected coordinates. Accepts one point or a batch of rows."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    _check_subset(S, n)
    cols = [i - 1 for i in indices(S)]
    out = np.prod(x[..., cols], axis=-1)
    return float(out) if out.ndim == 0 else out


def eval_poly(g: SparsePolynomial, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.n:
        raise ValueError(f"expected points of length {g.n}, got {x.shape[-1]}")
    out = np.zeros(x.shape[:-1])
    for S, c in g.terms.items():
        cols = [i - 1 for i in indices(S)]
        out = out + c * np.prod(x[..., cols], axis=-1)
    return float(out) if out.ndim == 0 else out


def cube(n: int) -> np.ndarray:
    """All 2**n points of {-1,+1}^n as rows, in bitmask order."""
    if n > MAX_EXACT_VARS:
        raise ValueError(f"full enumeration needs n <= {MAX_EXACT_VARS}")
    p = np.arange(1 << n, dtype=np.int64)[:, None]
    bits = (p >> np.arange(n, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def walsh_hadamard(values: np.ndarray) -> np.ndarray:
    """Fourier coefficient table of a value table in bitmask order (fast transform)."""
    a = np.array(values, dtype=np.float64, copy=True)
    size = a.shape[0]
    if size & (size - 1):
        raise ValueError("table length must be a power of two")
    _kernels.fwht(a)
    a /= size
    return a


def naive_fourier(values: np.ndarray) -> np.ndarray:
    """O(4**n) inner-product transform; an independent oracle for small n."""
    values = np.asarray(values, dtype=float)
    size = values.shape[0]
    n = size.bit_length() - 1
    if n > 12:
        raise ValueError("naive transform is limited to n <= 12")
    p = np.arange(size)
    popcount = np.array([bin(q).count("1") & 1 for q in p])
    signs = 1.0 - 2.0 * popcount[p[:, None] & p[None, :]]
    return signs @ values / size


def snap(table: np.ndarray, tol: float = SNAP_TOL) -> np.ndarray:
    table = table.copy()
    table[np.abs(table) < tol] = 0.0
    return table


def exact_fourier(f: Callable[[np.ndarray], np.ndarray] | SparsePolynomial, n: int | None = None) -> SparsePolynomial:
    """Exact Fourier expansion of ``f`` by enumerating the whole cube.

    ``f`` is called once with the (2**n, n) array of cube points and must
    return the 2**n values.
    """
    if isinstance(f, SparsePolynomial):
        n = f.n if n is None else n
    if n is None:
        raise ValueError("n is required for a black-box function")
    if n > MAX_EXACT_VARS:
        raise ValueError(f"exact transform needs n <= {MAX_EXACT_VARS}, got {n}")
    values = np.asarray(f(cube(n)), dtype=float).reshape(-1)
    table = snap(walsh_hadamard(values))
    nz = np.flatnonzero(table)
    return SparsePolynomial(n, dict(zip(nz.tolist(), table[nz].tolist())))


def estimate_fourier(source, S: int, m: int | None = None) -> tuple[float, float]:
    """Empirical mean of f(x) chi_S(x) and its standard error.

    ``source`` is either an ``(x, y)`` pair of arrays or anything with a
    ``draw(count)`` method returning such a pair (then ``m`` samples are drawn).
    """
    if isinstance(source, tuple):
        x, y = source
    else:
        if m is None:
            raise ValueError("m is required when drawing from a stream")
        x, y = source.draw(m)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("no samples")
    if y.size < 2:
        raise ValueError("need at least two samples for a standard error")
    prod = y * eval_monomial(S, x)
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(prod.size))


def parseval_norm(g: SparsePolynomial) -> float:
    """Sum of squared coefficients, i.e. E[g(X)^2] under the uniform measure."""
    return float(sum(c * c for c in g.terms.values()))


@dataclass(frozen=True)
class StaircaseReport:
    satisfies: bool
    M_required: float | None
    violating_subset: int | None = None
    reason: str = ""


def _chain_violations(terms: Iterable[int], support: set[int]) -> list[int]:
    bad = []
    for S in terms:
        if degree(S) < 2:
            continue
        rest = S
        found = False
        while rest:
            low = rest & -rest
            if (S ^ low) in support:
                found = True
                break
            rest ^= low
        if not found:
            bad.append(S)
    return bad


def check_staircase(g: SparsePolynomial, M: float) -> StaircaseReport:
    """Test the [1/M, M]-staircase property.

    Every nonzero coefficient must have magnitude in [1/M, M], and every
    nonzero set of size >= 2 needs a nonzero subset exactly one element
    smaller. ``M_required`` is the smallest M for which the magnitude part
    holds, reported only when the chain part holds.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    support = set(g.terms)
    order = sorted(support, key=lambda S: (degree(S), S))
    bad = _chain_violations(order, support)
    if bad:
        return StaircaseReport(False, None, bad[0], "no one-smaller nonzero subset")
    mags = [abs(c) for c in g.terms.values()]
    m_req = max([1.0] + [max(a, 1.0 / a) for a in mags])
    for S in order:
        a = abs(g.terms[S])
        if a < 1.0 / M or a > M:
            return StaircaseReport(False, m_req, S, "coefficient magnitude outside [1/M, M]")
    return StaircaseReport(True, m_req, None, "")


def cube_values(g: SparsePolynomial) -> np.ndarray:
    """g evaluated at every cube point, in bitmask order (inverse fast transform)."""
    table = g.dense()
    _kernels.fwht(table)
    return table


def max_abs_on_cube(g: SparsePolynomial) -> float:
    return float(np.max(np.abs(cube_values(g))))
