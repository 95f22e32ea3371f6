"""The SPDE solution as a translate of the initial condition, and its checks.

``Y_t = tau_{U_t} xi`` is materialised row by row from a
:class:`~tispde.sde.Trajectory`.  From a Y-path one can rebuild the
driving process ``Z`` (pairing the coefficients against ``Y_{s-}``) and
measure how well the weak form of the SPDE and the Ito formula for
``tau_X xi`` hold after pairing with test functions.
"""
import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .hermite import basis, gauss_hermite_rule
from .operators import _derivative_matrix, _second_derivative_matrix, default_order, translate_coeffs
from .sde import (
    LARGE,
    SMALL,
    STEP,
    compensator,
    continuous_increment,
    large_jump_increment,
    noise_key,
    small_jump_increment,
    translated,
)
from .sobolev import norm_p, relative_tail

TAIL_THRESHOLD = 1e-6


@dataclass
class SpdePath:
    times: np.ndarray
    coeffs: np.ndarray  # (rows, M) snapshots of Y
    kinds: list
    xi: object
    trajectory: object
    tails: np.ndarray  # relative tail mass per snapshot (p = xi.p)

    @property
    def stopped(self):
        return bool(self.trajectory is not None and self.trajectory.stopped)

    @property
    def theta(self):
        return None if self.trajectory is None else self.trajectory.theta

    def snapshot(self, k):
        return self.xi.with_coeffs(self.coeffs[k])

    def restrict_to(self, grid):
        """Right-continuous snapshots at ``grid`` times (last row with ``t_row <= t``)."""
        grid = np.asarray(grid, dtype=np.float64)
        if self.stopped and np.any(grid >= self.theta):
            raise InvalidInputError("the solution is only defined before the explosion time")
        idx = np.clip(np.searchsorted(self.times, grid, side="right") - 1, 0, None)
        return self.coeffs[idx]


def translate_solution(traj, xi, Q=None):
    """``Y_t = tau_{U_t} xi`` at every trajectory row before explosion."""
    rule = gauss_hermite_rule(default_order(xi.N) if Q is None else Q)
    n = len(traj.times) - (1 if traj.stopped else 0)
    coeffs = np.empty((n, basis(xi.d, xi.N).size))
    tails = np.empty(n)
    for k in range(n):
        coeffs[k] = translated(xi, traj.states[k], rule)
        tails[k] = relative_tail(xi.with_coeffs(coeffs[k]), xi.p) if xi.N >= 2 else 0.0
    return SpdePath(traj.times[:n].copy(), coeffs, list(traj.kinds[:n]), xi, traj, tails)


def reconstruct_Z(path, cset, noise, nu_small, z0=None):
    """Rebuild the driver from ``Y``: pairings against ``Y_{s-}`` integrated against the noise.

    Uses the same step functions as the Euler scheme, so for
    ``path = translate_solution(solve_sde(...))`` with ``kappa = 0`` the
    result equals ``U`` bitwise.  Returns an array aligned with the path
    rows (plus the explosion row, if any, so it matches the trajectory).
    """
    traj = path.trajectory
    if traj is not None and traj.noise_key is not None and traj.noise_key != noise_key(noise):
        raise InvalidInputError("noise does not match the path's generating noise")
    d = cset.d
    Z = np.zeros(d) if z0 is None else np.asarray(z0, dtype=np.float64).copy()
    out = [Z.copy()]
    schedule = noise.schedule()
    rows = len(path.times) + (1 if path.stopped else 0)
    for k, entry in enumerate(schedule):
        if k + 1 >= rows:
            break
        Yc = path.coeffs[k]
        if entry[0] == "c":
            comp = compensator(cset, Yc, nu_small, path.xi)
            inc, _ = continuous_increment(cset, Yc, entry[2] - entry[1], entry[3], comp)
        elif entry[0] == "s":
            inc = small_jump_increment(cset, Yc, entry[2], path.xi)
        else:
            inc = large_jump_increment(cset, Yc, entry[2], path.xi)
        Z = Z + inc
        out.append(Z.copy())
    return np.array(out)


def _check_tests(tests, xi):
    tests = list(tests)
    for phi in tests:
        if (phi.d, phi.N) != (xi.d, xi.N):
            raise InvalidInputError("test functions must share the (d, N) truncation")
        if phi.max_degree_present() > xi.N - 2:
            raise InvalidInputError("test functions must have degree <= N - 2 (headroom)")
    return tests


def _dual_tests(tests, d, N):
    """``phi``, ``D_i^T phi`` and ``(D_ij)^T phi`` stacked for fast pairing."""
    P = np.stack([phi.coeffs for phi in tests])  # (k, M)
    P1 = [(_derivative_matrix(i, d, N).T @ P.T).T for i in range(d)]
    P2 = [[(_second_derivative_matrix(i, j, d, N).T @ P.T).T for j in range(d)] for i in range(d)]
    return P, P1, P2


def weak_residual(path, cset, noise, nu_small, tests, Q=None):
    """Defect of the weak SPDE identity paired with each test function, per path row.

    ``R_t(phi) = <Y_t - Y_0, phi> - sum <A(Y) dB, phi> - sum <L~(Y), phi> dt
    + sum dt <int (tau_F - Id) Y nu, phi> - sum_small <(tau_F - Id) Y, phi>
    - sum_large <(tau_G - Id) Y, phi>``, every integrand at the left limit.
    The initial value is ``Y_0`` (equal to ``xi`` when ``kappa = 0``).
    Returns ``(times, R)`` with ``R`` of shape ``(rows, len(tests))``.
    """
    xi = path.xi
    d, N = xi.d, xi.N
    tests = _check_tests(tests, xi)
    if cset.d != d:
        raise InvalidInputError("coefficient dimension differs from the path")
    if path.trajectory is not None and path.trajectory.noise_key not in (None, noise_key(noise)):
        raise InvalidInputError("noise does not match the path's generating noise")
    rule = gauss_hermite_rule(default_order(N) if Q is None else Q)
    P, P1, P2 = _dual_tests(tests, d, N)
    pts, masses = nu_small.integration_nodes()
    Y0 = path.coeffs[0]
    acc = np.zeros(len(tests))
    R = [np.zeros(len(tests))]
    schedule = noise.schedule()
    n = len(path.times)
    for k, entry in enumerate(schedule):
        if k + 1 >= n:
            break
        Yc = path.coeffs[k]
        Yrep = xi.with_coeffs(Yc)
        if entry[0] == "c":
            dt = entry[2] - entry[1]
            dB = entry[3]
            s = cset._S @ Yc
            b = cset._B @ Yc
            grad = np.stack([P1[i] @ Yc for i in range(d)])  # (d, k): <d_i Y, phi>
            # A(Y).dB = -sum_i (s dB)_i d_i Y
            acc -= -(s @ dB) @ grad
            a = s @ s.T
            drift = -(b @ grad)
            for i in range(d):
                for j in range(d):
                    if a[i, j] != 0.0:
                        drift = drift + 0.5 * a[i, j] * (P2[i][j] @ Yc)
            # L~ minus the (tau_F - Id) part of the compensator leaves sum_i F^i d_i Y
            if cset.F.kind != "zero" and len(masses):
                Fv = cset.F.values(Yrep, pts)
                drift = drift + (masses @ Fv) @ grad
            acc -= drift * dt
        elif entry[0] == "s":
            for x in entry[2]:
                shift = cset.F(Yrep, x)
                acc -= P @ (translate_coeffs(Yc, shift, d, N, rule) - Yc)
        else:
            shift = cset.G(Yrep, entry[2])
            acc -= P @ (translate_coeffs(Yc, shift, d, N, rule) - Yc)
        R.append(P @ (path.coeffs[k + 1] - Y0) + acc)
    return path.times[: len(R)].copy(), np.array(R)


def ito_residual(traj, xi, tests, Q=None):
    """Defect of the Ito formula for ``tau_{X_t} xi`` paired with test functions.

    Continuous steps contribute ``-sum_i <d_i tau_X xi, phi> dX^i`` and
    ``1/2 sum <d_ij tau_X xi, phi> d[X^i, X^j]^c`` with the predictable
    quadratic variation recorded in the trajectory; jump rows contribute
    ``-dX^i <d_i tau_{X-} xi, phi>`` plus the jump correction built from
    the exact pre/post states.  Returns ``(times, R)``.
    """
    d, N = xi.d, xi.N
    tests = _check_tests(tests, xi)
    rule = gauss_hermite_rule(default_order(N) if Q is None else Q)
    P, P1, P2 = _dual_tests(tests, d, N)
    n = len(traj.times) - (1 if traj.stopped else 0)
    Ys = [translated(xi, traj.states[k], rule) for k in range(n)]
    acc = np.zeros(len(tests))
    R = [np.zeros(len(tests))]
    for k in range(n - 1):
        Yc = Ys[k]
        dX = traj.states[k + 1] - traj.states[k]
        grad = np.stack([P1[i] @ Yc for i in range(d)])
        if traj.kinds[k + 1] == STEP:
            acc += -(dX @ grad)
            qv = traj.qv[k + 1]
            for i in range(d):
                for j in range(d):
                    if qv[i, j] != 0.0:
                        acc += 0.5 * qv[i, j] * (P2[i][j] @ Yc)
        else:
            acc += -(dX @ grad)
            acc += P @ (Ys[k + 1] - Yc) + dX @ grad
        R.append(P @ (Ys[k + 1] - Ys[0]) - acc)
    return traj.times[:n].copy(), np.array(R)


def jump_identity_gap(path, cset, Q=None, tol=1e-8):
    """Check ``Y_pi = tau_{G_bar} Y_{pi-}`` at every large-jump row.

    Composing translates of a truncated state drops the content above
    degree N, so a jump is only checked when the pre-jump top-two-shell
    amplitude (p = 0) is below ``tol``; others are counted as
    inconclusive.  Returns ``{"max_gap", "checked", "inconclusive"}``.
    """
    xi = path.xi
    rule = gauss_hermite_rule(default_order(xi.N) if Q is None else Q)
    top = basis(xi.d, xi.N).degrees >= xi.N - 1
    U = path.trajectory.states
    worst, checked, skipped = 0.0, 0, 0
    for k in range(1, len(path.times)):
        if path.kinds[k] != LARGE:
            continue
        pre = path.coeffs[k - 1]
        if np.sqrt(np.sum(pre[top] ** 2)) > tol:
            skipped += 1
            continue
        moved = translate_coeffs(pre, U[k] - U[k - 1], xi.d, xi.N, rule)
        worst = max(worst, float(np.max(np.abs(path.coeffs[k] - moved))))
        checked += 1
    return {"max_gap": worst, "checked": checked, "inconclusive": skipped}


def uniqueness_gap(paths_a, paths_b, grid, p):
    """Per-time mean of ``||Y^A_t - Y^B_t||^2_{-p-1}`` over paths alive at ``t``.

    Returns ``(mean_gap, alive_fraction)`` on ``grid``; the mean is
    conditional on survival of both paths.
    """
    paths_a, paths_b = list(paths_a), list(paths_b)
    if len(paths_a) != len(paths_b):
        raise InvalidInputError("path collections must have equal size")
    grid = np.asarray(grid, dtype=np.float64)
    if not paths_a:
        return np.zeros(len(grid)), np.zeros(len(grid))
    total = np.zeros(len(grid))
    alive = np.zeros(len(grid))
    for a, b in zip(paths_a, paths_b):
        if (a.xi.d, a.xi.N) != (b.xi.d, b.xi.N):
            raise InvalidInputError("paths use different truncations")
        limit = min(a.theta if a.stopped else np.inf, b.theta if b.stopped else np.inf)
        ok = grid < limit
        if not ok.any():
            continue
        w = basis(a.xi.d, a.xi.N).weights(2.0 * (-p - 1.0))
        diff = a.restrict_to(grid[ok]) - b.restrict_to(grid[ok])
        total[ok] += diff ** 2 @ w
        alive[ok] += 1
    with np.errstate(invalid="ignore"):
        mean = np.where(alive > 0, total / np.maximum(alive, 1), np.nan)
    return mean, alive / len(paths_a)


# --------------------------------------------------------------------------
# reports


def config_hash(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def residual_statistics(grid, series, labels):
    """Per-test, per-time mean/RMS/max over paths (paths stopped before ``t`` are censored).

    ``series`` is a list of ``(times, R)`` pairs, one per path.
    """
    grid = np.asarray(grid, dtype=np.float64)
    stacked = np.full((len(series), len(grid), len(labels)), np.nan)
    for i, (times, R) in enumerate(series):
        idx = np.searchsorted(times, grid, side="right") - 1
        ok = grid <= times[-1]
        stacked[i, ok] = R[idx[ok]]
    alive = np.sum(~np.isnan(stacked[:, :, 0]), axis=0) if len(labels) else np.zeros(len(grid))
    out = {"times": grid.tolist(), "survival": (alive / max(len(series), 1)).tolist(), "tests": {}}
    # grid times where every path is censored are all-NaN columns; they map to null
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for j, name in enumerate(labels):
            col = stacked[:, :, j]
            absval = np.abs(col)
            out["tests"][name] = {
                "mean": _nan_list(np.nanmean(col, axis=0) if len(series) else np.zeros(len(grid))),
                "rms": _nan_list(np.sqrt(np.nanmean(col ** 2, axis=0)) if len(series) else np.zeros(len(grid))),
                "max": _nan_list(np.nanmax(absval, axis=0) if len(series) else np.zeros(len(grid))),
            }
    return out


def _nan_list(a):
    return [None if not np.isfinite(v) else float(v) for v in a]


def max_abs_residual(series):
    """``max_t |R_t(phi)|`` per path and test, shape ``(paths, tests)``."""
    return np.array([np.max(np.abs(R), axis=0) for _, R in series])


def residual_norm_tail(path):
    return float(np.max(path.tails)) if len(path.tails) else 0.0


def snapshot_norms(path, p):
    return np.array([norm_p(path.snapshot(k), p) for k in range(len(path.times))])


__all__ = [
    "SpdePath",
    "translate_solution",
    "reconstruct_Z",
    "weak_residual",
    "ito_residual",
    "jump_identity_gap",
    "uniqueness_gap",
    "residual_statistics",
    "max_abs_residual",
    "config_hash",
    "TAIL_THRESHOLD",
    "SMALL",
]
