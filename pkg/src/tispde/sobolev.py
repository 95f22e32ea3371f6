"""Truncated Hermite-coefficient representation of elements of S_p.

A :class:`HermiteRep` stores ``c_n = <f, h_n>`` for ``|n| <= N``.  The
weighted inner product is

    <f, g>_p = sum_n (2|n| + d)^(2p) c_n(f) c_n(g)

and the duality pairing between S_{-p} and S_p is the plain sum
``sum_n u_n phi_n``.
"""
import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import InvalidInputError, ProjectionError
from .hermite import basis, gauss_hermite_rule, hermite_table


@dataclass(frozen=True, eq=False)
class HermiteRep:
    d: int
    N: int
    coeffs: np.ndarray = field(repr=False)
    p: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).ravel()
        expected = basis(self.d, self.N).size
        if c.shape[0] != expected:
            raise InvalidInputError(
                f"d={self.d}, N={self.N} needs {expected} coefficients, got {c.shape[0]}"
            )
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # constructors -------------------------------------------------------
    @classmethod
    def zeros(cls, d, N, p=0.0):
        return cls(d, N, np.zeros(basis(d, N).size), p)

    @classmethod
    def unit(cls, n, N, p=0.0):
        """The Hermite function ``h_n`` itself."""
        n = tuple(int(k) for k in n)
        b = basis(len(n), N)
        if n not in b.position:
            raise InvalidInputError(f"index {n} outside |n| <= {N}")
        c = np.zeros(b.size)
        c[b.position[n]] = 1.0
        return cls(len(n), N, c, p)

    @classmethod
    def from_terms(cls, d, N, terms, p=0.0):
        """``sum coeff * h_index`` from an iterable of ``(index, coeff)``."""
        b = basis(d, N)
        c = np.zeros(b.size)
        for n, value in terms:
            n = tuple(int(k) for k in n)
            if len(n) != d or n not in b.position:
                raise InvalidInputError(f"index {n} not in the d={d}, N={N} truncation")
            c[b.position[n]] += value
        return cls(d, N, c, p)

    @classmethod
    def delta(cls, x0, N, p=None):
        """Truncated Dirac mass at ``x0``: ``c_n = h_n(x0)``.

        ``delta_x0`` lies in S_{-p} for p > d/4; the default tag is
        ``-(d/4 + 1/4)``.
        """
        x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
        d = x0.shape[0]
        b = basis(d, N)
        c = np.ones(b.size)
        for k in range(d):
            hk = hermite_table(N, x0[k : k + 1])[0]
            c *= hk[b.indices[:, k]]
        return cls(d, N, c, -(d / 4.0 + 0.25) if p is None else p)

    # arithmetic ---------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, HermiteRep) or (self.d, self.N) != (other.d, other.N):
            raise InvalidInputError("representations must share d and N")

    def with_coeffs(self, coeffs):
        return HermiteRep(self.d, self.N, coeffs, self.p)

    def __add__(self, other):
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __eq__(self, other):
        return (
            isinstance(other, HermiteRep)
            and (self.d, self.N, self.p) == (other.d, other.N, other.p)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    __hash__ = None

    def coefficient(self, n):
        return float(self.coeffs[basis(self.d, self.N).position[tuple(n)]])

    def max_degree_present(self, atol=0.0):
        nz = np.abs(self.coeffs) > atol
        if not nz.any():
            return -1
        return int(basis(self.d, self.N).degrees[nz].max())

    # serialization ------------------------------------------------------
    def to_dict(self):
        return {"d": self.d, "N": self.N, "p": self.p, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["d"]), int(obj["N"]), obj["coeffs"], float(obj.get("p", 0.0)))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _pair_check(f, g):
    if not isinstance(f, HermiteRep) or not isinstance(g, HermiteRep):
        raise InvalidInputError("expected HermiteRep arguments")
    if (f.d, f.N) != (g.d, g.N):
        raise InvalidInputError(f"shape mismatch: (d={f.d}, N={f.N}) vs (d={g.d}, N={g.N})")


def inner_p(f, g, p):
    _pair_check(f, g)
    w = basis(f.d, f.N).weights(2.0 * p)
    return float(np.dot(w * f.coeffs, g.coeffs))


def norm_p(f, p):
    return float(np.sqrt(max(inner_p(f, f, p), 0.0)))


def duality(u, phi):
    """``<u, phi>`` for u in S_{-p}, phi in S_p; independent of p."""
    _pair_check(u, phi)
    return float(np.dot(u.coeffs, phi.coeffs))


def tail_mass(f, p):
    """Weighted mass ``sum (2|n|+d)^{2p} c_n^2`` over the top two degree shells."""
    if f.N < 2:
        raise InvalidInputError("tail_mass needs N >= 2")
    b = basis(f.d, f.N)
    top = b.degrees >= f.N - 1
    w = b.weights(2.0 * p)[top]
    return float(np.dot(w, f.coeffs[top] ** 2))


def relative_tail(f, p):
    total = inner_p(f, f, p)
    return 0.0 if total == 0.0 else tail_mass(f, p) / total


def project(f, d, N, Q=None, p=0.0):
    """Hermite coefficients of a pointwise function by tensor Gauss-Hermite quadrature.

    ``f`` receives an array of shape ``(K, d)`` and must return ``K``
    values.  Exact when ``f * h_n * exp(|x|^2)`` is a polynomial of degree
    ``<= 2Q - 1`` in each coordinate.
    """
    Q = N + 1 if Q is None else int(Q)
    rule = gauss_hermite_rule(Q)
    b = basis(d, N)
    grid = np.array(list(product(rule.nodes, repeat=d))).reshape(-1, d)
    values = np.asarray(f(grid), dtype=np.float64).reshape(-1)
    bad = ~np.isfinite(values)
    if bad.any():
        node = grid[np.argmax(bad)]
        raise ProjectionError(f"non-finite value at quadrature node {node.tolist()}", node=node)
    H = hermite_table(N, rule.nodes)  # (Q, N+1)
    cube = values.reshape((Q,) * d)
    # contract each axis with sw_q h_k(t_q)
    A = rule.scaled_weights[:, None] * H
    for _ in range(d):
        cube = np.tensordot(cube, A, axes=([0], [0]))
    # axes now ordered (k_1, ..., k_d)
    coeffs = cube.reshape(-1)[b.cube_positions()]
    return HermiteRep(d, N, coeffs, p)
