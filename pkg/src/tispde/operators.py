"""Coefficient-space realizations of derivatives, translations and the SPDE operators.

Every operator is a single matrix ``M`` acting on Hermite coefficients,
``(O f)_m = sum_n M[m, n] c_n``.  The same matrix serves functions and
distributions: for the derivative this follows from
``<d_i u, h_m> = -<u, d_i h_m>`` and for translations from
``<tau_x u, h_m> = <u, tau_{-x} h_m>``.  Dual identities therefore become
transpose relations, e.g. ``T(x).T == T(-x)`` and ``D_i.T == -D_i``.
"""
from functools import lru_cache

import numpy as np
from scipy import sparse

from . import kernels
from .errors import InvalidInputError
from .hermite import basis, gauss_hermite_rule, hermite_table
from .sobolev import HermiteRep


class CoeffOperator:
    """Linear map on the ``(d, N)`` truncation, stored sparse or dense."""

    def __init__(self, d, N, matrix):
        M = basis(d, N).size
        if matrix.shape != (M, M):
            raise InvalidInputError(f"matrix shape {matrix.shape} does not match truncation size {M}")
        self.d = d
        self.N = N
        self.matrix = matrix

    def __repr__(self):
        kind = "sparse" if sparse.issparse(self.matrix) else "dense"
        return f"CoeffOperator(d={self.d}, N={self.N}, {kind})"

    @property
    def is_sparse(self):
        return sparse.issparse(self.matrix)

    def dense(self):
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def apply(self, rep):
        if (rep.d, rep.N) != (self.d, self.N):
            raise InvalidInputError("operator and representation truncations differ")
        return rep.with_coeffs(self.matrix @ rep.coeffs)

    def __call__(self, rep):
        return self.apply(rep)

    def __matmul__(self, other):
        if isinstance(other, HermiteRep):
            return self.apply(other)
        if (other.d, other.N) != (self.d, self.N):
            raise InvalidInputError("operator truncations differ")
        return CoeffOperator(self.d, self.N, self.matrix @ other.matrix)

    def __add__(self, other):
        return CoeffOperator(self.d, self.N, self.matrix + other.matrix)

    def __sub__(self, other):
        return CoeffOperator(self.d, self.N, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return CoeffOperator(self.d, self.N, float(scalar) * self.matrix)

    __rmul__ = __mul__

    def transpose(self):
        return CoeffOperator(self.d, self.N, self.matrix.T.copy())

    def to_coo_text(self):
        """One ``row col value`` line per stored entry (row-major order)."""
        coo = sparse.coo_matrix(self.matrix)
        order = np.lexsort((coo.col, coo.row))
        lines = [f"# d={self.d} N={self.N} size={self.matrix.shape[0]}"]
        for k in order:
            if coo.data[k] != 0.0:
                lines.append(f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_coo_text(cls, text):
        header, *rows = [ln for ln in text.splitlines() if ln.strip()]
        fields = dict(item.split("=") for item in header.lstrip("# ").split())
        d, N, size = int(fields["d"]), int(fields["N"]), int(fields["size"])
        r, c, v = [], [], []
        for ln in rows:
            a, b, x = ln.split()
            r.append(int(a))
            c.append(int(b))
            v.append(float(x))
        return cls(d, N, sparse.csr_matrix((v, (r, c)), shape=(size, size)))


def identity_op(d, N):
    return CoeffOperator(d, N, sparse.identity(basis(d, N).size, format="csr"))


def _check_axis(i, d):
    if not 0 <= i < d:
        raise InvalidInputError(f"axis {i} out of range for d={d} (axes are 0-based)")


@lru_cache(maxsize=128)
def _derivative_matrix(i, d, N):
    b = basis(d, N)
    rows, cols, vals = [], [], []
    for m, n in enumerate(b.indices):
        ni = int(n[i])
        up = tuple(int(v) + (k == i) for k, v in enumerate(n))
        if up in b.position:
            rows.append(m)
            cols.append(b.position[up])
            vals.append(np.sqrt((ni + 1) / 2.0))
        if ni > 0:
            down = tuple(int(v) - (k == i) for k, v in enumerate(n))
            rows.append(m)
            cols.append(b.position[down])
            vals.append(-np.sqrt(ni / 2.0))
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(b.size, b.size))
    mat.sort_indices()
    return mat


def derivative_op(i, d, N):
    """``d/dx_i`` on coefficients (axis ``i`` is 0-based).

    From ``d_i h_n = sqrt(n_i/2) h_{n-e_i} - sqrt((n_i+1)/2) h_{n+e_i}``;
    output on the shell ``N + 1`` is dropped.
    """
    _check_axis(i, d)
    return CoeffOperator(d, N, _derivative_matrix(i, d, N))


@lru_cache(maxsize=128)
def _second_derivative_matrix(i, j, d, N):
    outer = basis(d, N + 1)
    inner = basis(d, N)
    keep = np.array([outer.position[tuple(int(v) for v in n)] for n in inner.indices])
    prod = (_derivative_matrix(i, d, N + 1) @ _derivative_matrix(j, d, N + 1)).tocsr()
    mat = prod[keep][:, keep].tocsr()
    mat.sort_indices()
    return mat


def second_derivative_op(i, j, d, N):
    """``d^2/dx_i dx_j`` restricted to degree ``<= N``.

    Built one level up so that contributions passing through the shell
    ``N + 1`` are kept; composing two truncated first derivatives would
    lose them.
    """
    _check_axis(i, d)
    _check_axis(j, d)
    return CoeffOperator(d, N, _second_derivative_matrix(i, j, d, N))


def default_order(N):
    return 2 * N + 8


def _shifted_tables(z, N, rule):
    """Hermite tables at nodes shifted by ``+z/2`` and ``-z/2``."""
    plus = hermite_table(N, rule.nodes + 0.5 * z)
    minus = hermite_table(N, rule.nodes - 0.5 * z)
    return plus, minus


def translation_matrix_1d(z, N, Q=None):
    """``T[m, n] = <tau_z h_n, h_m>`` for one coordinate.

    With ``y = s + z/2`` the integrand ``h_m(s + z/2) h_n(s - z/2)`` is a
    polynomial times ``exp(-s^2 - z^2/4)``, so Gauss-Hermite is exact for
    ``Q >= N + 1``.
    """
    if z == 0.0:
        return np.eye(N + 1)
    rule = gauss_hermite_rule(default_order(N) if Q is None else Q)
    plus, minus = _shifted_tables(float(z), N, rule)
    return plus.T @ (rule.scaled_weights[:, None] * minus)


def translation_matrix(x, d, N, Q=None):
    """Dense matrix of ``tau_x`` on the ``(d, N)`` truncation."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[0] != d:
        raise InvalidInputError(f"shift has dimension {x.shape[0]}, expected {d}")
    b = basis(d, N)
    T = np.ones((b.size, b.size))
    for k in range(d):
        T1 = translation_matrix_1d(x[k], N, Q)
        col = b.indices[:, k]
        T *= T1[np.ix_(col, col)]
    return CoeffOperator(d, N, T)


def translate_coeffs(coeffs, x, d, N, rule):
    """Coefficients of ``tau_x f`` without assembling the matrix.

    Evaluates ``f`` at nodes shifted by ``-x/2`` and projects at nodes
    shifted by ``+x/2`` (tensorised over coordinates).  A zero shift
    returns a copy, so ``tau_0`` is the identity exactly.
    """
    if not np.any(x):
        return np.array(coeffs, dtype=np.float64)
    if d == 1:
        return kernels.translate_1d(coeffs, x[0], rule.nodes, rule.scaled_weights)
    b = basis(d, N)
    cube = np.zeros((N + 1) ** d)
    cube[b.cube_positions()] = coeffs
    cube = cube.reshape((N + 1,) * d)
    tables = [_shifted_tables(float(x[k]), N, rule) for k in range(d)]
    # f at shifted nodes: contract each coefficient axis with H(s - x_k/2)
    for k in range(d):
        cube = np.tensordot(cube, tables[k][1], axes=([0], [1]))
    sw = rule.scaled_weights
    for k in range(d):
        shape = [1] * d
        shape[k] = sw.shape[0]
        cube = cube * sw.reshape(shape)
    for k in range(d):
        cube = np.tensordot(cube, tables[k][0], axes=([0], [0]))
    return cube.reshape(-1)[b.cube_positions()]


def translate(rep, x, Q=None):
    """``tau_x rep`` re-projected onto degree ``<= N``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[0] != rep.d:
        raise InvalidInputError(f"shift has dimension {x.shape[0]}, expected {rep.d}")
    rule = gauss_hermite_rule(default_order(rep.N) if Q is None else Q)
    return rep.with_coeffs(translate_coeffs(rep.coeffs, x, rep.d, rep.N, rule))


def adjoint_in_p(op, p):
    """Adjoint with respect to ``<.,.>_p``: ``W^{-2p} O^T W^{2p}``."""
    b = basis(op.d, op.N)
    w = b.weights(2.0 * p)
    if op.is_sparse:
        mat = sparse.diags(1.0 / w) @ op.matrix.T @ sparse.diags(w)
        mat = mat.tocsr()
    else:
        mat = (op.matrix.T * w[None, :]) / w[:, None]
    return CoeffOperator(op.d, op.N, mat)


def t_operator(i, p, d, N):
    """The operator with ``d_i^* = -d_i + T_i`` in ``<.,.>_{-p-1}``."""
    D = derivative_op(i, d, N)
    return D + adjoint_in_p(D, -p - 1.0)


# --------------------------------------------------------------------------
# SPDE operators.  sigma is a d x d nested sequence of HermiteRep, b a
# length-d sequence; both are paired with rho through the duality.


def pairing_matrix(sigma, rho):
    return np.array([[float(np.dot(s.coeffs, rho.coeffs)) for s in row] for row in sigma])


def pairing_vector(b, rho):
    return np.array([float(np.dot(bi.coeffs, rho.coeffs)) for bi in b])


def _check_coefficients(rho, sigma=None, b=None):
    d = rho.d
    if sigma is not None:
        if len(sigma) != d or any(len(row) != d for row in sigma):
            raise InvalidInputError(f"sigma must be {d} x {d}")
        for row in sigma:
            for s in row:
                if (s.d, s.N) != (rho.d, rho.N):
                    raise InvalidInputError("sigma entries must share rho's truncation")
    if b is not None:
        if len(b) != d:
            raise InvalidInputError(f"b must have length {d}")
        for bi in b:
            if (bi.d, bi.N) != (rho.d, rho.N):
                raise InvalidInputError("b entries must share rho's truncation")


def op_A(rho, sigma):
    """``A_j rho = -sum_i <sigma, rho>_ij d_i rho`` for j = 1..d."""
    _check_coefficients(rho, sigma=sigma)
    d, N = rho.d, rho.N
    s = pairing_matrix(sigma, rho)
    grads = [_derivative_matrix(i, d, N) @ rho.coeffs for i in range(d)]
    out = []
    for j in range(d):
        acc = np.zeros_like(rho.coeffs)
        for i in range(d):
            acc -= s[i, j] * grads[i]
        out.append(rho.with_coeffs(acc))
    return out


def op_L(rho, sigma, b):
    """``L rho = 1/2 sum (s s^T)_ij d_ij rho - sum <b, rho>_i d_i rho`` with ``s = <sigma, rho>``."""
    _check_coefficients(rho, sigma=sigma, b=b)
    d, N = rho.d, rho.N
    s = pairing_matrix(sigma, rho)
    a = s @ s.T
    bv = pairing_vector(b, rho)
    acc = np.zeros_like(rho.coeffs)
    for i in range(d):
        for j in range(d):
            if a[i, j] != 0.0:
                acc += 0.5 * a[i, j] * (_second_derivative_matrix(i, j, d, N) @ rho.coeffs)
    for i in range(d):
        if bv[i] != 0.0:
            acc -= bv[i] * (_derivative_matrix(i, d, N) @ rho.coeffs)
    return rho.with_coeffs(acc)


def small_jump_generator(rho, F, nu_small, Q=None):
    """``int (tau_{F(rho,x)} - Id + sum_i F^i(rho,x) d_i) rho nu(dx)`` over the small-jump ball."""
    d, N = rho.d, rho.N
    points, masses = nu_small.integration_nodes()
    acc = np.zeros_like(rho.coeffs)
    if len(masses) == 0:
        return rho.with_coeffs(acc)
    rule = gauss_hermite_rule(default_order(N) if Q is None else Q)
    grads = None
    for x, w in zip(points, masses):
        shift = np.asarray(F(rho, x), dtype=np.float64)
        if not np.any(shift):
            continue
        if grads is None:
            grads = [_derivative_matrix(i, d, N) @ rho.coeffs for i in range(d)]
        term = translate_coeffs(rho.coeffs, shift, d, N, rule) - rho.coeffs
        for i in range(d):
            term = term + shift[i] * grads[i]
        acc += w * term
    return rho.with_coeffs(acc)


def op_Ltilde(rho, sigma, b, F, nu_small, Q=None):
    """``L rho`` plus the small-jump generator term.

    ``F(rho, x)`` returns a shift in R^d; ``nu_small`` must provide
    ``integration_nodes() -> (points, masses)`` (atoms are summed exactly).
    """
    return op_L(rho, sigma, b) + small_jump_generator(rho, F, nu_small, Q)
