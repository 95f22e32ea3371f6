"""Multi-indices, Hermite functions and Gauss-Hermite quadrature.

Multi-indices are plain tuples of non-negative ints.  Index sets are
enumerated in graded-lexicographic order: by total degree first, then
lexicographically with the leftmost entry most significant, so for
``d=2, N=1`` the order is ``(0,0), (0,1), (1,0)``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import comb, isfinite, pi, sqrt

import numpy as np
from scipy.special import roots_hermite

from . import kernels
from .errors import InvalidInputError, UnsupportedOrderError

MAX_QUADRATURE_ORDER = 200


def hermite_values(N, t):
    """Return ``h_0(t), ..., h_N(t)`` as a 1-d array.

    The normalised three-term recurrence

        h_{n+1} = sqrt(2/(n+1)) t h_n - sqrt(n/(n+1)) h_{n-1}

    keeps every value O(1), so nothing overflows for N <= 200, |t| <= 20.
    """
    if N < 0:
        raise InvalidInputError(f"N must be >= 0, got {N}")
    t = float(t)
    if not isfinite(t):
        raise InvalidInputError(f"t must be finite, got {t}")
    return kernels.hermite_table(N, np.array([t]))[0]


def hermite_table(N, t):
    """Hermite functions at many points: shape ``(len(t), N + 1)``."""
    t = np.asarray(t, dtype=np.float64).ravel()
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("hermite_table needs finite points")
    return kernels.hermite_table(N, t)


def multi_indices(d, N):
    """All ``n`` in Z_+^d with ``|n| <= N``, graded-lex ordered."""
    if d < 1 or N < 0:
        raise InvalidInputError(f"need d >= 1 and N >= 0, got d={d}, N={N}")
    return list(_multi_indices(d, N))


@lru_cache(maxsize=None)
def _multi_indices(d, N):
    out = []
    for deg in range(N + 1):
        out.extend(n for n in product(range(deg + 1), repeat=d) if sum(n) == deg)
    return tuple(out)


def eval_hd(n, x):
    """``h_n(x) = h_{n_1}(x_1) ... h_{n_d}(x_d)``."""
    n = tuple(int(k) for k in n)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if len(n) != x.shape[0]:
        raise InvalidInputError(f"multi-index has d={len(n)} but point has d={x.shape[0]}")
    if min(n) < 0:
        raise InvalidInputError(f"negative multi-index entry in {n}")
    value = 1.0
    for nk, xk in zip(n, x):
        value *= hermite_values(nk, xk)[nk]
    return float(value)


@dataclass(frozen=True)
class HermiteBasis:
    """Index bookkeeping for the truncation ``|n| <= N`` in dimension ``d``."""

    d: int
    N: int
    indices: np.ndarray = field(repr=False)  # (M, d) ints
    degrees: np.ndarray = field(repr=False)  # (M,)
    position: dict = field(repr=False)  # tuple -> row

    @property
    def size(self):
        return self.indices.shape[0]

    def weights(self, p):
        """Diagonal ``(2|n| + d)^p``."""
        return (2.0 * self.degrees + self.d) ** float(p)

    def cube_positions(self):
        """Flat positions of each index inside the dense ``(N+1)^d`` cube."""
        strides = (self.N + 1) ** np.arange(self.d - 1, -1, -1)
        return self.indices @ strides


@lru_cache(maxsize=64)
def basis(d, N):
    idx = multi_indices(d, N)
    arr = np.array(idx, dtype=np.int64).reshape(len(idx), d)
    arr.setflags(write=False)
    deg = arr.sum(axis=1)
    deg.setflags(write=False)
    return HermiteBasis(d, N, arr, deg, {n: k for k, n in enumerate(idx)})


def count_indices(d, N):
    return comb(N + d, d)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite rule for the weight ``exp(-t^2)``.

    ``scaled_weights`` are ``weights * exp(nodes**2)``, used when the
    caller evaluates products of Hermite functions (which already carry
    their own Gaussian factors).
    """

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    scaled_weights: np.ndarray = field(repr=False)

    def integrate(self, f):
        """``sum_q w_q f(t_q)``, i.e. an estimate of ``int f(t) exp(-t^2) dt``."""
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=32)
def gauss_hermite_rule(Q):
    if Q < 1:
        raise InvalidInputError(f"quadrature order must be >= 1, got {Q}")
    if Q > MAX_QUADRATURE_ORDER:
        raise UnsupportedOrderError(f"order {Q} exceeds the supported maximum {MAX_QUADRATURE_ORDER}")
    nodes, _ = roots_hermite(Q)
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    # Christoffel numbers in Hermite-function form: w_q e^{t_q^2} = 1 / sum_k h_k(t_q)^2
    H = kernels.hermite_table(Q - 1, nodes)
    scaled = 1.0 / np.einsum("qk,qk->q", H, H)
    weights = scaled * np.exp(-nodes * nodes)
    for a in (nodes, weights, scaled):
        a.setflags(write=False)
    return QuadratureRule(Q, nodes, weights, scaled)


def gaussian_moment(k):
    """``int t^k exp(-t^2) dt`` in closed form."""
    if k % 2:
        return 0.0
    m = k // 2
    # Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
    num = 1.0
    for j in range(1, m + 1):
        num *= (2 * j - 1) / 2.0
    return num * sqrt(pi)
