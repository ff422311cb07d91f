"""Target families: staircases, parities, truncated and double staircases,
composable chains, and general (H, A)-hierarchical polynomials."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fourier import SparsePolynomial, chain, degree, eval_poly, parseval_norm, subset


def _bounds(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def make_staircase(n: int, k: int) -> SparsePolynomial:
    """x_1 + x_1 x_2 + ... + x_1...x_k."""
    _bounds(1 <= k <= n, f"need 1 <= k <= n, got k={k}, n={n}")
    return SparsePolynomial(n, {chain(1, i): 1.0 for i in range(1, k + 1)})


def make_parity(n: int, k: int, j: int = 1) -> SparsePolynomial:
    """The single monomial x_j ... x_k."""
    _bounds(1 <= j <= k <= n, f"need 1 <= j <= k <= n, got j={j}, k={k}, n={n}")
    return SparsePolynomial(n, {chain(j, k): 1.0})


def make_truncated(n: int, j: int, k: int) -> SparsePolynomial:
    """sum_{i=j}^{k} chi_{i:k}: the sets {i, ..., k} for i = j..k."""
    _bounds(1 <= j <= k <= n, f"need 1 <= j <= k <= n, got j={j}, k={k}, n={n}")
    return SparsePolynomial(n, {chain(i, k): 1.0 for i in range(j, k + 1)})


def make_double(n: int, k: int, l: int) -> SparsePolynomial:
    """S_k plus the second chain x_1 x_{k+1}, x_1 x_{k+1} x_{k+2}, ..., x_1 x_{k+1}...x_{k+l-1}."""
    _bounds(k >= 1 and l >= 1, "k and l must be >= 1")
    _bounds(k + l - 1 <= n, f"need k + l - 1 <= n, got k={k}, l={l}, n={n}")
    terms = {chain(1, i): 1.0 for i in range(1, k + 1)}
    for i in range(1, l):
        terms[1 | chain(k + 1, k + i)] = 1.0
    return SparsePolynomial(n, terms)


def make_composable_chain(n: int, length: int, drop: int = 1) -> SparsePolynomial:
    """A size-increasing, non-nested chain: each step removes ``drop`` old
    variables and adds ``drop + 1`` fresh ones, so |S_j| = j and
    |S_{j+1} symmetric-difference S_j| = 2*drop + 1. ``drop = 0`` is a staircase.
    """
    _bounds(length >= 1 and drop >= 0, "length >= 1 and drop >= 0 required")
    need = 1 + (length - 1) * (drop + 1)
    _bounds(need <= n, f"chain of length {length} with drop={drop} needs n >= {need}")
    current = [1]
    fresh = 2
    terms = {subset(current): 1.0}
    for _ in range(length - 1):
        kept = current[min(drop, len(current)):]
        added = list(range(fresh, fresh + drop + 1))
        fresh += drop + 1
        current = kept + added
        terms[subset(current)] = 1.0
    return SparsePolynomial(n, terms)


def check_composable_chain(g: SparsePolynomial, max_symdiff: int) -> bool:
    """Every nonzero S with |S| >= 2 has a nonzero S' with |S'| < |S| and |S ^ S'| <= max_symdiff."""
    support = list(g.terms)
    for S in support:
        if degree(S) < 2:
            continue
        if not any(degree(T) < degree(S) and degree(S ^ T) <= max_symdiff for T in support):
            return False
    return True


def normalize_to_unit(g: SparsePolynomial) -> SparsePolynomial:
    norm = parseval_norm(g)
    if norm <= 0.0:
        raise ValueError("cannot normalize the zero polynomial")
    return g.scaled(1.0 / math.sqrt(norm))


def center_biased(x, p: float) -> np.ndarray:
    """(x_i - 2p + 1) / sqrt(4p(1-p)): mean 0, variance 1 when P(x_i = 1) = p."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    x = np.asarray(x, dtype=float)
    return (x - 2.0 * p + 1.0) / math.sqrt(4.0 * p * (1.0 - p))


def hermite_eval(k: int, y) -> np.ndarray | float:
    """Orthonormal probabilists' Hermite polynomial He_k(y) / sqrt(k!)."""
    if k < 0:
        raise ValueError("degree must be >= 0")
    y = np.asarray(y, dtype=float)
    prev = np.ones_like(y)
    if k == 0:
        out = prev
    else:
        cur = y.copy()
        for j in range(1, k):
            prev, cur = cur, y * cur - j * prev
        out = cur / math.sqrt(math.factorial(k))
    return float(out) if out.ndim == 0 else out


BASES = ("sign", "centered", "hermite")


@dataclass
class GeneralHierarchicalPolynomial:
    """f(x) = sum_k alpha_k prod_i h_{k_i}(y_i) with y = A x + b.

    ``basis`` holds one entry per coordinate: ``"sign"`` ({1, y}),
    ``("centered", p)`` ({1, centered y}) or ``"hermite"``. The sign bases
    only admit exponents 0 or 1.
    """

    n: int
    coeffs: dict[tuple[int, ...], float]
    basis: list = field(default_factory=list)
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        if not self.basis:
            self.basis = ["sign"] * self.n
        if len(self.basis) != self.n:
            raise ValueError("one basis entry per coordinate is required")
        self.A = np.eye(self.n) if self.A is None else np.asarray(self.A, dtype=float)
        self.b = np.zeros(self.n) if self.b is None else np.asarray(self.b, dtype=float)
        if self.A.shape != (self.n, self.n) or self.b.shape != (self.n,):
            raise ValueError("affine transform shape does not match n")
        for idx in self.coeffs:
            if len(idx) != self.n or min(idx, default=0) < 0:
                raise ValueError(f"bad multi-index {idx}")
            for i, k in enumerate(idx):
                if self.basis[i] != "hermite" and k > 1:
                    raise ValueError(f"sign basis at coordinate {i + 1} only has degrees 0 and 1")

    @classmethod
    def from_sparse(cls, g: SparsePolynomial, basis=None) -> "GeneralHierarchicalPolynomial":
        coeffs = {}
        for S, c in g.terms.items():
            coeffs[tuple((S >> i) & 1 for i in range(g.n))] = c
        return cls(g.n, coeffs, list(basis) if basis is not None else [])


def order(k: tuple[int, ...]) -> int:
    """Number of nonzero entries of a multi-index."""
    return sum(1 for ki in k if ki)


def precedes(kp: tuple[int, ...], k: tuple[int, ...]) -> bool:
    """kp is below k when every kp_i is 0 or equal to k_i."""
    return all(a in (0, b) for a, b in zip(kp, k))


def check_hierarchical(ghp: GeneralHierarchicalPolynomial, M: float) -> bool:
    """(1/M, M)-hierarchy: magnitudes in [1/M, M] and a one-lower predecessor for every order >= 2 index."""
    for k, a in ghp.coeffs.items():
        if a == 0 or not 1.0 / M <= abs(a) <= M:
            return False
        if order(k) >= 2 and not any(
            order(kp) == order(k) - 1 and precedes(kp, k) for kp in ghp.coeffs if kp != k
        ):
            return False
    return True


def _basis_value(basis, k: int, y: np.ndarray) -> np.ndarray:
    if k == 0:
        return np.ones_like(y)
    if basis == "hermite":
        return hermite_eval(k, y)
    if basis == "sign":
        return y
    tag, p = basis
    if tag != "centered":
        raise ValueError(f"unknown basis {basis!r}")
    return center_biased(y, p)


def eval_general(ghp: GeneralHierarchicalPolynomial, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != ghp.n:
        raise ValueError(f"expected points of length {ghp.n}, got {x.shape[-1]}")
    y = x @ ghp.A.T + ghp.b
    out = np.zeros(y.shape[:-1])
    for k, a in ghp.coeffs.items():
        term = np.full(y.shape[:-1], a)
        for i, ki in enumerate(k):
            if ki:
                term = term * _basis_value(ghp.basis[i], ki, y[..., i])
        out = out + term
    return float(out) if out.ndim == 0 else out


FAMILIES = ("staircase", "parity", "truncated", "double", "chain", "zero")
MEASURES = ("unbiased", "biased", "gaussian")


@dataclass(frozen=True)
class TargetSpec:
    """Which target to learn and under which input measure.

    The polynomial is always stated in Fourier form over mean-zero,
    unit-variance coordinates: raw x for unbiased and Gaussian inputs, the
    centered coordinates for biased ones.
    """

    family: str
    n: int
    k: int = 1
    j: int = 1
    l: int = 1
    normalize: bool = False
    measure: str = "unbiased"
    p: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown target family {self.family!r}")
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.measure == "biased" and not 0.0 < self.p < 1.0:
            raise ValueError("biased measure needs p in (0, 1)")
        if self.family != "zero" and not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")

    def polynomial(self) -> SparsePolynomial:
        f = self.family
        if f == "staircase":
            g = make_staircase(self.n, self.k)
        elif f == "parity":
            g = make_parity(self.n, self.k, self.j)
        elif f == "truncated":
            g = make_truncated(self.n, self.j, self.k)
        elif f == "double":
            g = make_double(self.n, self.k, self.l)
        elif f == "chain":
            g = make_composable_chain(self.n, self.k, drop=self.l)
        else:
            return SparsePolynomial.zero(self.n)
        return normalize_to_unit(g) if self.normalize else g

    def features(self, x) -> np.ndarray:
        """Coordinates on which the target's monomials are evaluated."""
        if self.measure == "biased":
            return center_biased(x, self.p)
        return np.asarray(x, dtype=float)

    def evaluator(self):
        g = self.polynomial()

        def evaluate(x):
            return eval_poly(g, self.features(x))

        return evaluate

    def chain_subsets(self) -> list[int]:
        """Default tracked subsets: the target's support in (degree, mask) order."""
        g = self.polynomial()
        if g.sparsity == 0:
            return [chain(1, i) for i in range(1, min(self.k, self.n) + 1)]
        return sorted(g.terms, key=lambda S: (degree(S), S))
