"""Numerical certificates for the operator inequalities and identities.

Existence-of-constant statements become fitted constants plus a
stability check under truncation refinement.  For a quadratic form
``Q(phi) = phi^T K phi`` the sup of ``Q(phi) / ||phi||_q^2`` over the
headroom subspace (degree <= N - 2) is the largest generalized
eigenvalue of ``(K, W^{2q})``, which is reported as the fitted constant;
random samples give an independent lower bound.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .errors import InvalidInputError
from .hermite import basis, gauss_hermite_rule
from .operators import (
    _derivative_matrix,
    _second_derivative_matrix,
    default_order,
    translate_coeffs,
    translation_matrix,
)
from .sobolev import norm_p

STABILITY_TOL = 0.10
MIN_NORM = 1e-10


@dataclass
class InequalityReport:
    id: str
    samples: int
    max_ratio: float = 0.0
    max_violation: float = 0.0
    fitted_constant: float = None
    stability: dict = field(default_factory=dict)
    passed: bool = True
    tolerance: float = None
    seed: int = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def stability(values, tol=STABILITY_TOL, atol=1e-10):
    """Relative spread of fitted constants across truncation levels."""
    vals = np.array(list(values.values()), dtype=np.float64)
    scale = np.max(np.abs(vals))
    spread = 0.0 if scale < atol else float((vals.max() - vals.min()) / scale)
    return {"by_N": {str(k): float(v) for k, v in values.items()}, "relative_spread": spread,
            "stable": bool(spread < tol)}


def _headroom(d, N):
    return basis(d, N).degrees <= N - 2


def _dense(mat):
    return mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat)


def _sup_generalized(K, w2, mask):
    """``sup x^T K x / x^T diag(w2) x`` over coordinates in ``mask``."""
    Kh = K[np.ix_(mask, mask)]
    Kh = 0.5 * (Kh + Kh.T)
    s = 1.0 / np.sqrt(w2[mask])
    return float(linalg.eigvalsh(Kh * s[:, None] * s[None, :])[-1])


def _samples(rng, w2, mask, count):
    """Random headroom coefficient vectors with unit weighted norm on average."""
    g = rng.standard_normal((count, int(mask.sum())))
    c = np.zeros((count, mask.size))
    c[:, mask] = g / np.sqrt(w2[mask])[None, :]
    return c


# --------------------------------------------------------------------------
# monotonicity with constant coefficients


def _monotonicity_form(p, sigma, b, d, N):
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if sigma.shape[0] != d or b.shape != (d,):
        raise InvalidInputError("sigma must be d x r and b of length d")
    w2 = basis(d, N).weights(2.0 * p)
    Ds = [_dense(_derivative_matrix(i, d, N)) for i in range(d)]
    a = sigma @ sigma.T
    L = np.zeros_like(Ds[0])
    for i in range(d):
        for j in range(d):
            if a[i, j] != 0.0:
                L += 0.5 * a[i, j] * _dense(_second_derivative_matrix(i, j, d, N))
        L -= b[i] * Ds[i]
    K = 2.0 * w2[:, None] * L
    for k in range(sigma.shape[1]):
        A = -sum(sigma[j, k] * Ds[j] for j in range(d))
        K += A.T @ (w2[:, None] * A)
    return K, w2


def monotonicity_check(p, sigma, b, samples=1000, N=30, levels=(20, 30, 40), seed=0, tol=1e-8,
                       scales=(0.5, 1.0, 2.0)):
    """``2<phi, L phi>_p + ||A phi||^2_HS(p) <= C ||phi||_p^2`` for constant sigma (d x r), b.

    Reports the sampled max ratio at ``N``, the fitted C at each level in
    ``levels``, and C for scaled coefficients (monotonicity in the
    coefficient size is flagged, not failed).
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    d = sigma.shape[0]
    rng = np.random.default_rng(seed)
    K, w2 = _monotonicity_form(p, sigma, b, d, N)
    mask = _headroom(d, N)
    C = _samples(rng, w2, mask, samples)
    norms = np.einsum("ij,j,ij->i", C, w2, C)
    keep = norms > MIN_NORM ** 2
    ratios = np.einsum("ij,jk,ik->i", C[keep], K, C[keep]) / norms[keep]
    fitted = {n: _sup_generalized(*_monotonicity_form(p, sigma, b, d, n), _headroom(d, n)) for n in levels}
    scaled = {
        s: _sup_generalized(*_monotonicity_form(p, s * sigma, s * np.asarray(b, dtype=np.float64), d, N), mask)
        for s in scales
    }
    vals = [scaled[s] for s in sorted(scaled)]
    stab = stability(fitted)
    # for p = 0 the form vanishes identically (integration by parts)
    zero_case = p == 0
    rep = InequalityReport(
        id="monotonicity",
        samples=int(keep.sum()),
        max_ratio=float(np.max(ratios)) if len(ratios) else 0.0,
        max_violation=float(max(0.0, np.max(ratios) - max(fitted.values()))) if len(ratios) else 0.0,
        fitted_constant=float(max(fitted.values())),
        stability=stab,
        tolerance=STABILITY_TOL,
        seed=seed,
        details={
            "p": p, "d": d, "N": N,
            "max_abs_ratio": float(np.max(np.abs(ratios))) if len(ratios) else 0.0,
            "by_scale": {str(s): v for s, v in scaled.items()},
            "monotone_in_scale": bool(np.all(np.diff(vals) >= -1e-9)),
        },
    )
    rep.passed = bool(stab["stable"])
    if zero_case:
        rep.details["exact_zero_case"] = True
        rep.passed = rep.passed and rep.details["max_abs_ratio"] <= tol
    return rep


# --------------------------------------------------------------------------
# special monotonicity and the first-order identity


def t_matrices(p, d, N):
    """Dense ``T_i = D_i + D_i^*`` with the adjoint taken in ``<.,.>_{-p-1}``."""
    w2 = basis(d, N).weights(2.0 * (-p - 1.0))
    out = []
    for i in range(d):
        D = _dense(_derivative_matrix(i, d, N))
        out.append(D + (D.T * w2[None, :]) / w2[:, None])
    return out


def _spl_forms(p, d, N, alpha):
    """Quadratic forms of the two sides of the special-monotonicity identity."""
    q = -p - 1.0
    w2 = basis(d, N).weights(2.0 * q)
    Ds = [_dense(_derivative_matrix(i, d, N)) for i in range(d)]
    Ts = t_matrices(p, d, N)
    lhs = np.zeros_like(Ds[0])
    mid = np.zeros_like(Ds[0])
    for i in range(d):
        for j in range(d):
            a = alpha[i] * alpha[j]
            if a == 0.0:
                continue
            D2 = _dense(_second_derivative_matrix(i, j, d, N))
            lhs += a * (Ds[i].T @ (w2[:, None] * Ds[j]) + w2[:, None] * D2)
            mid += a * (Ts[i].T @ (w2[:, None] * Ds[j]))
    return lhs, mid, w2


def _alpha_grid(d, count, rng):
    if d == 1:
        return [np.array([1.0])]
    a = rng.standard_normal((count, d))
    a = list(a / np.linalg.norm(a, axis=1, keepdims=True))
    a.append(np.ones(d) / np.sqrt(d))
    a.extend(np.eye(d))
    return a


def spl_mono_check(p, samples=1000, N=30, d=1, levels=(20, 30, 40), seed=0, tol=1e-8, alphas=16):
    """Special monotonicity: the two-derivative form equals ``sum a_i a_j <T_i phi, d_j phi>``
    in ``<.,.>_{-p-1}`` and is bounded by ``d R ||phi||^2 |alpha|^2``.

    The identity residual is relative to ``||phi||^2_{-p-1} |alpha|^2``.
    """
    rng = np.random.default_rng(seed)
    alpha_list = _alpha_grid(d, alphas, rng)
    mask = _headroom(d, N)
    worst_gap, worst_ratio, n_ok = 0.0, -np.inf, 0
    per_alpha = max(1, samples // len(alpha_list))
    for alpha in alpha_list:
        lhs, mid, w2 = _spl_forms(p, d, N, alpha)
        C = _samples(rng, w2, mask, per_alpha)
        norms = np.einsum("ij,j,ij->i", C, w2, C)
        keep = norms > MIN_NORM ** 2
        n_ok += int(keep.sum())
        L = np.einsum("ij,jk,ik->i", C[keep], lhs, C[keep])
        M = np.einsum("ij,jk,ik->i", C[keep], mid, C[keep])
        scale = norms[keep] * float(alpha @ alpha)
        worst_gap = max(worst_gap, float(np.max(np.abs(L - M) / scale)))
        worst_ratio = max(worst_ratio, float(np.max(L / (d * scale))))

    def fit(n):
        m = _headroom(d, n)
        best = -np.inf
        for alpha in alpha_list:
            lhs, _, w2 = _spl_forms(p, d, n, alpha)
            best = max(best, _sup_generalized(lhs, w2, m) / (d * float(alpha @ alpha)))
        return best

    fitted = {n: fit(n) for n in levels}
    stab = stability(fitted)
    return InequalityReport(
        id="special_monotonicity",
        samples=n_ok,
        max_ratio=worst_ratio,
        max_violation=worst_gap,
        fitted_constant=float(max(fitted.values())),
        stability=stab,
        passed=bool(worst_gap <= tol and stab["stable"]),
        tolerance=tol,
        seed=seed,
        details={"p": p, "d": d, "N": N, "alphas": len(alpha_list), "identity_residual": worst_gap},
    )


def first_order_check(p, samples=1000, N=30, d=1, seed=0, tol=1e-8):
    """``2<phi, d_i phi>_{-p-1} = <T_i phi, phi>_{-p-1}`` on headroom samples.

    Also reports the empirical operator norm of each ``T_i`` on the
    headroom subspace in ``||.||_{-p-1}``.
    """
    rng = np.random.default_rng(seed)
    q = -p - 1.0
    w2 = basis(d, N).weights(2.0 * q)
    mask = _headroom(d, N)
    C = _samples(rng, w2, mask, samples)
    norms = np.einsum("ij,j,ij->i", C, w2, C)
    keep = norms > MIN_NORM ** 2
    C, norms = C[keep], norms[keep]
    worst = 0.0
    op_norms = []
    for i, T in enumerate(t_matrices(p, d, N)):
        D = _dense(_derivative_matrix(i, d, N))
        lhs = 2.0 * np.einsum("ij,j,ij->i", C, w2, C @ D.T)
        rhs = np.einsum("ij,j,ij->i", C @ T.T, w2, C)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / norms)))
        w = np.sqrt(w2)
        B = (w[:, None] * T / w[None, :])[:, mask]
        op_norms.append(float(np.linalg.norm(B, 2)))
    return InequalityReport(
        id="first_order_identity",
        samples=int(len(C)),
        max_violation=worst,
        fitted_constant=max(op_norms),
        passed=bool(worst <= tol),
        tolerance=tol,
        seed=seed,
        details={"p": p, "d": d, "N": N, "T_operator_norms": op_norms},
    )


# --------------------------------------------------------------------------
# second-order Taylor identity for the jump term


def _embed(psi, N):
    b, B = basis(psi.d, psi.N), basis(psi.d, N)
    c = np.zeros(B.size)
    for k, n in enumerate(b.indices):
        c[B.position[tuple(int(v) for v in n)]] = psi.coeffs[k]
    return c


def _taylor_remainder(psi, z, N, rtol=1e-18, max_terms=400):
    """Coefficients (degree <= N) of ``tau_z psi - psi + sum z_i d_i psi``.

    Summed from ``sum_{k>=2} (-z.grad)^k psi / k!`` in coefficient space.
    ``psi`` has finite degree, so each term is exact on a basis large
    enough to hold it and the series (entire in z) is cut once a term is
    negligible.
    """
    d = psi.d
    top = max(N, psi.N)
    Nb = top + 2
    while True:
        big = basis(d, Nb)
        c = _embed(psi, Nb)
        Ds = [_derivative_matrix(i, d, Nb) for i in range(d)]
        ref = max(float(np.linalg.norm(c)), 1e-300)
        term = -sum(z[i] * (Ds[i] @ c) for i in range(d))
        rho = np.zeros_like(c)
        k, done = 1, False
        while k < max_terms and Nb - top >= k + 2:
            k += 1
            term = -sum(z[i] * (Ds[i] @ term) for i in range(d)) / k
            rho += term
            if np.linalg.norm(term) <= rtol * ref:
                done = True
                break
        if done or k >= max_terms:
            return rho[big.degrees <= N]
        # term k reaches degree psi.N + k; widen the basis so no term is truncated
        Nb *= 2


def taylor_jump_check(p, z, psi, N=None, nodes=48, tol=1e-6):
    """``||tau_z psi||^2 - ||psi||^2 + 2 sum z_i <psi, d_i psi>`` versus
    ``sum_m w_m int_0^1 (1 - v) f_m''(v) dv`` in ``<.,.>_{-p-1}``.

    ``f_m(v) = <tau_{vz} psi, h_m>^2``.  Derivatives of the translate are
    taken on a two-shell-larger truncation so that every ``m <= N``
    coefficient of ``d_i`` and ``d_ij`` is exact.
    """
    N = psi.N if N is None else int(N)
    d = psi.d
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if z.shape != (d,):
        raise InvalidInputError(f"z must have length {d}")
    q = -p - 1.0
    Nb = N + 2
    big = basis(d, Nb)
    small = big.degrees <= N
    w2 = big.weights(2.0 * q)[small]
    c = _embed(psi, Nb)
    rule = gauss_hermite_rule(default_order(Nb))
    Ds = [_derivative_matrix(i, d, Nb) for i in range(d)]

    def coeffs_at(v):
        y = translate_coeffs(c, v * z, d, Nb, rule)
        dy = -sum(z[i] * (Ds[i] @ y) for i in range(d))
        d2y = sum(z[i] * (Ds[i] @ (z[j] * (Ds[j] @ y))) for i in range(d) for j in range(d))
        return y[small], dy[small], d2y[small]

    y0, dy0, _ = coeffs_at(0.0)
    # ||tau_z psi||^2 - ||psi||^2 cancels to O(|z|^2); with tau_z psi = psi + dy0 + rho
    # the left side is sum w (2 y0 rho + (dy0 + rho)^2), free of that cancellation
    rho = _taylor_remainder(psi, z, N)
    delta = dy0 + rho
    lhs = float(w2 @ (2.0 * y0 * rho + delta ** 2))
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    v = 0.5 * (gx + 1.0)
    rhs = 0.0
    for vk, wk in zip(v, 0.5 * gw):
        y, dy, d2y = coeffs_at(vk)
        fpp = 2.0 * (dy ** 2 + y * d2y)
        rhs += wk * (1.0 - vk) * float(w2 @ fpp)
    # both sides are O(|z|^2 ||psi||^2); that floor keeps cancelling cases meaningful
    psi_sq = float(w2 @ (y0 ** 2))
    scale = max(abs(lhs), abs(rhs), float(z @ z) * psi_sq)
    gap = abs(lhs - rhs)
    rel = 0.0 if scale < 1e-300 else gap / scale
    ok = rel <= tol
    return InequalityReport(
        id="taylor_jump",
        samples=1,
        max_violation=rel,
        passed=bool(ok),
        tolerance=tol,
        details={"p": p, "z": z.tolist(), "N": N, "lhs": lhs, "rhs": rhs, "abs_gap": gap,
                 "psi_norm": norm_p(psi, q), "scale": scale},
    )


# --------------------------------------------------------------------------
# translation bounds


def _weighted_block(T, d, N, p, q_in, cols):
    """Matrix of ``T`` from ``(S_{q_in}, cols)`` into ``S_p`` in unweighted coordinates."""
    b = basis(d, N)
    wo = b.weights(p)
    wi = b.weights(q_in)
    return (wo[:, None] * T / wi[None, :])[:, cols]


def translation_bound_fit(p, N=40, x_grid=None, d=1, n=2, growth_range=(1.0, 3.0), psi_samples=8,
                          seed=0, tail_threshold=1e-6, pair_step=None):
    """Growth of ``sup ||tau_x phi||_p / ||phi||_p`` and the Lipschitz bound in x.

    (i) log-log slope of the operator-norm ratio over ``|x|`` in
    ``growth_range`` against ``k = 2(floor|p| + 1)``; (ii) ``D`` is fitted
    as the max over a fine grid of ``|| sum_i e_i d_i tau_x ||`` from
    ``S_{p+1/2}`` (degree <= N/2) into ``S_p``, then the bound
    ``||tau_x1 psi - tau_x2 psi||_p <= D ||psi||_{p+1/2} |x1 - x2|`` is
    checked on every pair of the sampled grid.
    """
    rng = np.random.default_rng(seed)
    b = basis(d, N)
    low = b.degrees <= N // 2
    k = 2 * (int(np.floor(abs(p))) + 1)
    e = np.eye(d)[0]

    # (i) growth exponent along the first axis
    radii = np.linspace(growth_range[0], growth_range[1], 9) if x_grid is None else np.asarray(x_grid, dtype=np.float64)
    ratios, tails = [], []
    for r in radii:
        T = translation_matrix(r * e, d, N).dense()
        B = _weighted_block(T, d, N, p, p, low)
        u, s, vt = np.linalg.svd(B, full_matrices=False)
        ratios.append(float(s[0]))
        top = u[:, 0] * s[0]
        tails.append(float(np.sum(top[b.degrees >= N - 1] ** 2) / max(np.sum(top ** 2), 1e-300)))
    pos = radii > 0
    slope = float(np.polyfit(np.log(radii[pos]), np.log(ratios)[pos], 1)[0]) if pos.sum() >= 2 else 0.0
    inconclusive = bool(max(tails) > tail_threshold)

    # (ii) Lipschitz constant on |x| <= n
    h = n / 8.0 if pair_step is None else pair_step
    pair_pts = _ball_grid(d, n, h)
    fine_pts = _ball_grid(d, n, h / (8.0 if d == 1 else 2.0))
    Ds = [_dense(_derivative_matrix(i, d, N)) for i in range(d)]
    D_fit = 0.0
    for x in fine_pts:
        T = translation_matrix(x, d, N).dense()
        stack = np.vstack([_weighted_block(Dm @ T, d, N, p, p + 0.5, low) for Dm in Ds])
        D_fit = max(D_fit, float(np.linalg.norm(stack, 2)))
    psis = []
    for _ in range(psi_samples):
        c = np.zeros(b.size)
        c[low] = rng.standard_normal(int(low.sum())) / b.weights(p + 0.5)[low]
        psis.append(c)
    rule = gauss_hermite_rule(default_order(N))
    moved = [[translate_coeffs(c, x, d, N, rule) for x in pair_pts] for c in psis]
    wp = b.weights(2.0 * p)
    worst_ratio, violations = 0.0, 0
    for c, mv in zip(psis, moved):
        nrm = float(np.sqrt(b.weights(2.0 * (p + 0.5)) @ c ** 2))
        for a in range(len(pair_pts)):
            for bb in range(a + 1, len(pair_pts)):
                dist = float(np.linalg.norm(pair_pts[a] - pair_pts[bb]))
                lhs = float(np.sqrt(wp @ (mv[a] - mv[bb]) ** 2))
                ratio = lhs / (nrm * dist)
                worst_ratio = max(worst_ratio, ratio)
                if ratio > D_fit * (1 + 1e-9):
                    violations += 1
    rep = InequalityReport(
        id="translation_bounds",
        samples=len(psis) * len(pair_pts) * (len(pair_pts) - 1) // 2,
        max_ratio=worst_ratio,
        max_violation=float(violations),
        fitted_constant=D_fit,
        passed=bool(slope <= k and violations == 0),
        tolerance=float(k),
        seed=seed,
        details={
            "p": p, "d": d, "N": N, "n": n,
            "growth_radii": radii.tolist(), "growth_ratios": ratios, "growth_exponent": slope,
            "degree_bound": k, "max_tail_fraction": max(tails), "inconclusive": inconclusive,
            "lipschitz_D": D_fit, "lipschitz_pairs_violating": violations,
        },
    )
    return rep


def _ball_grid(d, n, h):
    ticks = np.arange(-n, n + 0.5 * h, h)
    mesh = np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return mesh[np.linalg.norm(mesh, axis=1) <= n + 1e-12]


def translation_identity_error(d, N):
    """Max entry of ``|T(0) - I|``."""
    T = translation_matrix(np.zeros(d), d, N).dense()
    return float(np.max(np.abs(T - np.eye(T.shape[0]))))


def isometry_error(psi, x, Q=None):
    """``| ||tau_x psi||_0 - ||psi||_0 |``."""
    rule = gauss_hermite_rule(default_order(psi.N) if Q is None else Q)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    moved = psi.with_coeffs(translate_coeffs(psi.coeffs, x, psi.d, psi.N, rule))
    return abs(norm_p(moved, 0.0) - norm_p(psi, 0.0))


__all__ = [
    "InequalityReport",
    "monotonicity_check",
    "spl_mono_check",
    "first_order_check",
    "taylor_jump_check",
    "translation_bound_fit",
    "translation_identity_error",
    "isometry_error",
    "stability",
    "t_matrices",
]
