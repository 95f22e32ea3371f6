"""Euler scheme for the finite-dimensional jump SDE driving the translates.

    dU = b_bar(U-) dt + sigma_bar(U-) dB + int_{|x|<1} F_bar(U-, x) N~(dt dx)
         + int_{|x|>=1} G_bar(U-, x) N(dt dx)

All coefficients are evaluated through ``Y = tau_U xi``: one translation
per step, after which every pairing is a dot product.  Jump times are
grid points: a continuous step runs up to the jump time, and the jump
itself is a zero-length step evaluated at the pre-jump state.

The step functions below are the only places where the state is
advanced.  :func:`tispde.spde.reconstruct_Z` calls the same functions
with the same arguments, which is what makes ``Z == U`` bitwise.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalBlowupError
from .hermite import gauss_hermite_rule
from .operators import default_order, translate_coeffs

DEFAULT_THRESHOLD = 1e6

# row kinds in a Trajectory
START, STEP, SMALL, LARGE = "start", "step", "small_jump", "large_jump"


# --------------------------------------------------------------------------
# step arithmetic shared with the SPDE reconstruction


def translated(xi, U, rule):
    """Coefficients of ``tau_U xi``."""
    return translate_coeffs(xi.coeffs, U, xi.d, xi.N, rule)


def compensator(cset, Yc, nu_small, template):
    """``int_{|x|<1} F(Y, x) nu(dx)`` for the coefficient vector ``Yc``."""
    if cset.F.kind == "zero" or nu_small.total_mass == 0.0:
        return np.zeros(cset.d)
    return cset.F.integral(template.with_coeffs(Yc), nu_small)


def continuous_increment(cset, Yc, dt, dB, comp):
    """``b_bar dt + sigma_bar dB - dt * int F_bar nu`` frozen at ``Y``; also returns ``sigma_bar``."""
    s = cset._S @ Yc
    b = cset._B @ Yc
    return b * dt + s @ dB - dt * comp, s


def small_jump_increment(cset, Yc, marks, template, reverse=False):
    """``sum_k F(Y, x_k)`` over the small marks arriving together."""
    vals = cset.F.values(template.with_coeffs(Yc), marks)
    acc = np.zeros(cset.d)
    for v in (vals[::-1] if reverse else vals):
        acc = acc + v
    return acc


def large_jump_increment(cset, Yc, mark, template):
    return np.asarray(cset.G(template.with_coeffs(Yc), mark), dtype=np.float64)


# --------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Rows ``(t, U, kind)``; a jump row is preceded by its pre-jump state at the same time."""

    times: np.ndarray
    states: np.ndarray
    kinds: list
    qv: np.ndarray  # (rows, d, d): sigma_bar sigma_bar^T dt of the step ending at each row
    stopped: bool = False
    theta: float = None
    m: float = DEFAULT_THRESHOLD
    noise_key: tuple = field(default=None, repr=False)
    kappa: np.ndarray = None

    @property
    def d(self):
        return self.states.shape[1]

    @property
    def final(self):
        return self.states[-1]

    def __len__(self):
        return len(self.times)

    def flags(self):
        """Per-row flags ``(pre_jump, post_jump, stopped)``."""
        n = len(self.times)
        pre = [k + 1 < n and self.kinds[k + 1] in (SMALL, LARGE) for k in range(n)]
        post = [kd in (SMALL, LARGE) for kd in self.kinds]
        stop = [self.stopped and k == n - 1 for k in range(n)]
        return pre, post, stop

    def at_times(self, grid):
        """Right-continuous states at ``grid`` (last row with ``t_row <= t``)."""
        idx = np.searchsorted(self.times, grid, side="right") - 1
        return self.states[np.clip(idx, 0, None)]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"U_{i + 1}" for i in range(self.d)] + ["pre_jump", "post_jump", "stopped"])
        pre, post, stop = self.flags()
        for k in range(len(self.times)):
            w.writerow([repr(float(self.times[k]))] + [repr(float(v)) for v in self.states[k]]
                       + [int(pre[k]), int(post[k]), int(stop[k])])
        return buf.getvalue()

    @classmethod
    def from_path(cls, times, states, kinds=None, qv=None):
        """Wrap an externally given path (e.g. a deterministic driver)."""
        times = np.asarray(times, dtype=np.float64)
        states = np.asarray(states, dtype=np.float64).reshape(len(times), -1)
        d = states.shape[1]
        kinds = [START] + [STEP] * (len(times) - 1) if kinds is None else list(kinds)
        qv = np.zeros((len(times), d, d)) if qv is None else np.asarray(qv, dtype=np.float64)
        return cls(times, states, kinds, qv, kappa=states[0].copy())


def noise_key(noise):
    """Fingerprint used to check that a reconstruction sees the same noise."""
    return (
        noise.steps,
        float(noise.T),
        noise.dB.tobytes(),
        noise.small_times.tobytes(),
        noise.large_times.tobytes(),
    )


class _Recorder:
    def __init__(self, d, t0, U0, m):
        self.times = [t0]
        self.states = [U0.copy()]
        self.kinds = [START]
        self.qv = [np.zeros((d, d))]
        self.m = m
        self.stopped = False
        self.theta = None

    def push(self, t, U, kind, qv):
        if not np.all(np.isfinite(U)):
            raise NumericalBlowupError("non-finite state in Euler scheme", state=U, time=t)
        self.times.append(t)
        self.states.append(U.copy())
        self.kinds.append(kind)
        self.qv.append(qv)
        if np.linalg.norm(U) >= self.m:
            self.stopped = True
            self.theta = t
        return self.stopped

    def build(self, key, kappa):
        return Trajectory(
            np.array(self.times), np.array(self.states), self.kinds, np.array(self.qv),
            self.stopped, self.theta, self.m, key, kappa,
        )


def _rule_for(xi, Q):
    return gauss_hermite_rule(default_order(xi.N) if Q is None else Q)


def _check_inputs(cset, xi, kappa, m):
    if (xi.d, xi.N) != (cset.d, cset.N):
        raise InvalidInputError("initial condition and coefficients must share (d, N)")
    kappa = np.zeros(cset.d) if kappa is None else np.atleast_1d(np.asarray(kappa, dtype=np.float64))
    if kappa.shape != (cset.d,):
        raise InvalidInputError(f"kappa must have length {cset.d}")
    if not m > np.linalg.norm(kappa):
        raise InvalidInputError("explosion threshold m must exceed |kappa|")
    return kappa


def _run(cset, xi, schedule, nu_small, rec, rule, reverse_small=False):
    """Advance ``rec`` through ``schedule``; returns False once stopped."""
    d = cset.d
    zero_qv = np.zeros((d, d))
    U = rec.states[-1].copy()
    for entry in schedule:
        Yc = translated(xi, U, rule)
        if entry[0] == "c":
            _, t0, t1, dB = entry
            dt = t1 - t0
            comp = compensator(cset, Yc, nu_small, xi)
            inc, s = continuous_increment(cset, Yc, dt, dB, comp)
            U = U + inc
            if rec.push(t1, U, STEP, (s @ s.T) * dt):
                return False
        elif entry[0] == "s":
            U = U + small_jump_increment(cset, Yc, entry[2], xi, reverse_small)
            if rec.push(entry[1], U, SMALL, zero_qv):
                return False
        else:
            U = U + large_jump_increment(cset, Yc, entry[2], xi)
            if rec.push(entry[1], U, LARGE, zero_qv):
                return False
    return True


def solve_sde(cset, xi, kappa, noise, nu_small, m=DEFAULT_THRESHOLD, Q=None, reverse_small=False):
    """Euler solution with large jumps applied inline at their arrival times.

    ``nu_small`` is the small-jump measure (used for the compensator);
    the step size is the noise grid's.
    """
    kappa = _check_inputs(cset, xi, kappa, m)
    rec = _Recorder(cset.d, 0.0, kappa, m)
    _run(cset, xi, noise.schedule(), nu_small, rec, _rule_for(xi, Q), reverse_small)
    return rec.build(noise_key(noise), kappa)


def solve_reduced(cset, xi, kappa, noise, nu_small, m=DEFAULT_THRESHOLD, Q=None):
    """The reduced equation: large jumps removed from the noise."""
    return solve_sde(cset, xi, kappa, noise.without_large_jumps(), nu_small, m, Q)


def solve_sde_interlaced(cset, xi, kappa, noise, nu_small, m=DEFAULT_THRESHOLD, Q=None):
    """Reduced solves on ``[pi_n, pi_{n+1})`` glued by ``G_bar`` at the arrivals."""
    kappa = _check_inputs(cset, xi, kappa, m)
    rule = _rule_for(xi, Q)
    rec = _Recorder(cset.d, 0.0, kappa, m)
    segment = []
    alive = True
    for entry in noise.schedule():
        if entry[0] != "l":
            segment.append(entry)
            continue
        alive = _run(cset, xi, segment, nu_small, rec, rule)
        segment = []
        if not alive:
            break
        U = rec.states[-1]
        Yc = translated(xi, U, rule)
        if rec.push(entry[1], U + large_jump_increment(cset, Yc, entry[2], xi), LARGE, np.zeros((cset.d, cset.d))):
            alive = False
            break
    if alive and segment:
        _run(cset, xi, segment, nu_small, rec, rule)
    return rec.build(noise_key(noise), kappa)


def euler_step(U, dt, dB, small_marks, cset, xi, nu_small, Q=None):
    """One Euler cell with the small jumps of the cell binned at its end.

    ``U' = U + b_bar dt + sigma_bar dB + sum F_bar(U, x) - dt int F_bar nu``,
    every coefficient frozen at ``U``.  The solvers insert jump times
    as grid points instead; this form is kept for single-step checks.
    """
    U = np.asarray(U, dtype=np.float64)
    rule = _rule_for(xi, Q)
    Yc = translated(xi, U, rule)
    comp = compensator(cset, Yc, nu_small, xi)
    inc, _ = continuous_increment(cset, Yc, dt, np.asarray(dB, dtype=np.float64), comp)
    out = U + inc
    if len(small_marks):
        out = out + small_jump_increment(cset, Yc, np.asarray(small_marks).reshape(-1, cset.d), xi)
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError("non-finite state in Euler step", state=out)
    return out


def pathwise_uniqueness_probe(cset, xi, kappa, noise, nu_small, m=DEFAULT_THRESHOLD, perturbation="identical"):
    """Sup-norm gap between the solution and a reformulated solve on the same noise.

    ``perturbation``: ``identical`` (solve twice), ``reverse_jump_sum``
    (small jumps of one instant summed in reverse order), ``interlaced``
    (reduced solves glued at arrivals) or ``refine`` (this noise versus
    its 2x coarsening, compared on the coarse grid).
    """
    base = solve_sde(cset, xi, kappa, noise, nu_small, m)
    if perturbation == "identical":
        other = solve_sde(cset, xi, kappa, noise, nu_small, m)
    elif perturbation == "reverse_jump_sum":
        other = solve_sde(cset, xi, kappa, noise, nu_small, m, reverse_small=True)
    elif perturbation == "interlaced":
        other = solve_sde_interlaced(cset, xi, kappa, noise, nu_small, m)
    elif perturbation == "refine":
        coarse = noise.coarsen(2)
        other = solve_sde(cset, xi, kappa, coarse, nu_small, m)
        grid = coarse.times[coarse.times <= min(base.times[-1], other.times[-1])]
        return float(np.max(np.abs(base.at_times(grid) - other.at_times(grid))))
    else:
        raise InvalidInputError(f"unknown perturbation {perturbation!r}")
    if len(base) != len(other):
        return float("inf")
    return float(np.max(np.abs(base.states - other.states)))
