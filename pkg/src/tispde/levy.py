"""Seeded driving noise: Brownian increments, small jumps and interlaced large jumps.

Each noise stream (Brownian, small jumps, large jumps, Brownian bridge at
jump times) draws from its own child of a ``numpy.random.SeedSequence``,
so a :class:`NoisePath` is a pure function of ``(model, T, dt, seed,
path_index)``.

Jump times are kept exactly.  The Brownian value at a jump time is drawn
from the bridge between the surrounding grid values, and stored as an
offset from the start of its grid cell; :meth:`NoisePath.schedule` then
splits cells at jump times without changing the grid increments.
"""
import json
from dataclasses import dataclass, field
from math import ceil

import numpy as np
from scipy import integrate

from .errors import InvalidInputError, UnsupportedMeasureError

STREAMS = ("brownian", "small", "large", "bridge")


def seed_sequence(seed, path_index=0):
    """Per-path seed sequence; children are spawned per stream."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed), spawn_key=(int(path_index),))


def stream_generators(seed, path_index=0):
    children = seed_sequence(seed, path_index).spawn(len(STREAMS))
    return {name: np.random.default_rng(ch) for name, ch in zip(STREAMS, children)}


def _as_generator(seed, stream):
    if isinstance(seed, np.random.Generator):
        return seed
    return stream_generators(seed)[stream]


# --------------------------------------------------------------------------
# Levy measures


class AtomMeasure:
    """Finite measure ``sum_k rate_k delta_{x_k}`` on R^d."""

    def __init__(self, points, rates):
        pts = np.asarray(points, dtype=np.float64)
        rts = np.asarray(rates, dtype=np.float64).reshape(-1)
        if pts.ndim == 1:
            pts = pts.reshape(len(rts), -1) if len(rts) else pts.reshape(0, 1)
        if pts.shape[0] != rts.shape[0]:
            raise InvalidInputError("one rate per atom is required")
        if np.any(rts < 0) or not np.all(np.isfinite(rts)):
            raise InvalidInputError("atom rates must be finite and non-negative")
        self.points = pts
        self.rates = rts

    @classmethod
    def empty(cls, d):
        return cls(np.zeros((0, d)), np.zeros(0))

    def __repr__(self):
        return f"AtomMeasure({len(self.rates)} atoms, mass={self.total_mass:g})"

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def total_mass(self):
        return float(self.rates.sum())

    def norms(self):
        return np.linalg.norm(self.points, axis=1)

    def integrate(self, g):
        """``int g dnu`` as an exact atom sum; ``g`` maps a point to a scalar or vector."""
        if len(self.rates) == 0:
            return 0.0
        return sum(r * np.asarray(g(x), dtype=np.float64) for x, r in zip(self.points, self.rates))

    def integration_nodes(self):
        return self.points, self.rates

    def sample_marks(self, rng, n):
        if n == 0:
            return np.zeros((0, self.dim))
        k = rng.choice(len(self.rates), size=n, p=self.rates / self.rates.sum())
        return self.points[k].copy()

    def to_dict(self):
        return {"atoms": [{"x": x.tolist(), "rate": float(r)} for x, r in zip(self.points, self.rates)]}


class DensityMeasure:
    """One-dimensional measure ``density(x) dx`` on a union of intervals.

    Integrals use a fixed Gauss-Legendre rule per interval; marks are
    sampled by inverting a tabulated CDF.  ``discarded_second_moment`` is
    the bias diagnostic filled in by :func:`epsilon_truncated`.
    """

    def __init__(self, density, intervals, order=64, table_size=4097, discarded_second_moment=0.0):
        self.density = density
        self.intervals = [(float(a), float(b)) for a, b in intervals]
        for a, b in self.intervals:
            if not a < b:
                raise InvalidInputError(f"empty interval ({a}, {b})")
        self.order = order
        self.discarded_second_moment = float(discarded_second_moment)
        gx, gw = np.polynomial.legendre.leggauss(order)
        pts, wts = [], []
        for a, b in self.intervals:
            half = 0.5 * (b - a)
            x = a + half * (gx + 1.0)
            pts.append(x)
            wts.append(half * gw * np.array([density(v) for v in x], dtype=np.float64))
        self._points = np.concatenate(pts).reshape(-1, 1) if pts else np.zeros((0, 1))
        self._masses = np.concatenate(wts) if wts else np.zeros(0)
        if not np.all(np.isfinite(self._masses)) or np.any(self._masses < 0):
            raise UnsupportedMeasureError("density must be finite and non-negative on its intervals")
        # CDF table for sampling
        grids, cdfs = [], []
        for a, b in self.intervals:
            g = np.linspace(a, b, table_size)
            f = np.array([density(v) for v in g], dtype=np.float64)
            if not np.all(np.isfinite(f)):
                raise UnsupportedMeasureError(
                    "density is not finite on its support; use epsilon_truncated for infinite activity"
                )
            grids.append(g)
            cdfs.append(np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(g))]))
        self._grids = grids
        self._cdfs = cdfs

    def __repr__(self):
        return f"DensityMeasure(intervals={self.intervals}, mass={self.total_mass:g})"

    @property
    def dim(self):
        return 1

    @property
    def total_mass(self):
        return float(self._masses.sum())

    def norms(self):
        return np.abs(self._points[:, 0])

    def integrate(self, g):
        return sum(w * np.asarray(g(x), dtype=np.float64) for x, w in zip(self._points, self._masses))

    def integration_nodes(self):
        return self._points, self._masses

    def sample_marks(self, rng, n):
        if n == 0:
            return np.zeros((0, 1))
        piece_mass = np.array([c[-1] for c in self._cdfs])
        which = rng.choice(len(piece_mass), size=n, p=piece_mass / piece_mass.sum())
        u = rng.random(n)
        out = np.empty(n)
        for k in range(n):
            cdf, grid = self._cdfs[which[k]], self._grids[which[k]]
            out[k] = np.interp(u[k] * cdf[-1], cdf, grid)
        return out.reshape(n, 1)

    def to_dict(self):
        return {"density": repr(self.density), "intervals": self.intervals, "order": self.order}


def epsilon_truncated(density, eps, order=64):
    """Small-jump density restricted to ``eps <= |x| < 1``.

    Returns the truncated measure with ``discarded_second_moment`` set to
    ``int_{|x| < eps} x^2 density(x) dx``, the bias left by dropping the
    smallest jumps.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidInputError("eps must lie in (0, 1)")
    left, _ = integrate.quad(lambda x: x * x * density(x), -eps, 0.0, limit=200)
    right, _ = integrate.quad(lambda x: x * x * density(x), 0.0, eps, limit=200)
    return DensityMeasure(
        density,
        [(-1.0, -eps), (eps, 1.0)],
        order=order,
        discarded_second_moment=left + right,
    )


@dataclass
class LevyModel:
    """Levy measure split into small (0 < |x| < 1) and large (|x| >= 1) parts."""

    d: int
    small: object = None
    large: object = None

    def __post_init__(self):
        if self.small is None:
            self.small = AtomMeasure.empty(self.d)
        if self.large is None:
            self.large = AtomMeasure.empty(self.d)
        for name, m in (("small", self.small), ("large", self.large)):
            if m.dim != self.d:
                raise InvalidInputError(f"{name} measure has dimension {m.dim}, expected {self.d}")
            if not np.isfinite(m.total_mass):
                raise UnsupportedMeasureError(f"{name} measure must have finite mass")
        if isinstance(self.small, AtomMeasure) and len(self.small.rates):
            r = self.small.norms()
            if np.any(r <= 0.0) or np.any(r >= 1.0):
                raise InvalidInputError("small atoms must satisfy 0 < |x| < 1")
        if isinstance(self.large, AtomMeasure) and len(self.large.rates):
            if np.any(self.large.norms() < 1.0):
                raise InvalidInputError("large atoms must satisfy |x| >= 1")
        if isinstance(self.small, DensityMeasure):
            if any(max(abs(a), abs(b)) > 1.0 or a < 0.0 < b for a, b in self.small.intervals):
                raise InvalidInputError("small density support must lie in 0 < |x| < 1")
        if isinstance(self.large, DensityMeasure):
            if any(min(abs(a), abs(b)) < 1.0 or a < 0.0 < b for a, b in self.large.intervals):
                raise InvalidInputError("large density support must lie in |x| >= 1")

    @classmethod
    def zero(cls, d):
        return cls(d)


# --------------------------------------------------------------------------
# Sampling


def grid_times(T, dt):
    if not (T > 0 and dt > 0):
        raise InvalidInputError("T and dt must be positive")
    K = max(1, ceil(T / dt - 1e-9))
    times = np.arange(K + 1, dtype=np.float64) * dt
    times[-1] = T
    return times


def sample_brownian(T, dt, d, seed):
    """``K = ceil(T/dt)`` increments ``N(0, dt I_d)``; a short last step gets its own variance."""
    times = grid_times(T, dt)
    rng = _as_generator(seed, "brownian")
    steps = np.diff(times)
    dB = rng.standard_normal((len(steps), d)) * np.sqrt(steps)[:, None]
    return times, dB


@dataclass
class JumpEvents:
    times: np.ndarray
    marks: np.ndarray
    measure: object = field(repr=False, default=None)

    def compensator(self, g):
        """Mean-measure functional ``m(g) = int g dnu``."""
        return self.measure.integrate(g)

    def __len__(self):
        return len(self.times)


def _poisson_arrivals(rate, T, rng):
    out = []
    if rate <= 0.0:
        return np.zeros(0)
    t = rng.exponential(1.0 / rate)
    while t <= T:
        out.append(t)
        t += rng.exponential(1.0 / rate)
    return np.array(out)


def _sample_jumps(measure, T, rng):
    times = _poisson_arrivals(measure.total_mass, T, rng)
    return JumpEvents(times, measure.sample_marks(rng, len(times)), measure)


def sample_small_jumps(model, T, seed):
    """Small-jump events on (0, T] and the compensator of the small measure."""
    return _sample_jumps(model.small, T, _as_generator(seed, "small"))


def sample_large_jumps(model, T, seed):
    """Arrivals ``pi_1 < pi_2 < ...`` of the large-jump compound Poisson process and their marks."""
    return _sample_jumps(model.large, T, _as_generator(seed, "large"))


def _bridge_offsets(times, dB, event_times, rng):
    """Brownian offset from the start of each event's grid cell, drawn from the bridge."""
    n, d = len(event_times), dB.shape[1]
    offsets = np.zeros((n, d))
    if n == 0:
        return offsets
    cells = np.clip(np.searchsorted(times, event_times, side="left") - 1, 0, len(dB) - 1)
    order = np.lexsort((event_times, cells))
    k_prev, t_prev, b_prev = -1, 0.0, None
    for e in order:
        k = cells[e]
        if k != k_prev:
            t_prev, b_prev, k_prev = times[k], np.zeros(d), k
        t_end = times[k + 1]
        s = event_times[e]
        span = t_end - t_prev
        frac = (s - t_prev) / span if span > 0 else 0.0
        var = (s - t_prev) * (t_end - s) / span if span > 0 else 0.0
        mean = b_prev + frac * (dB[k] - b_prev)
        offsets[e] = mean + np.sqrt(max(var, 0.0)) * rng.standard_normal(d)
        t_prev, b_prev = s, offsets[e]
    return offsets


@dataclass
class NoisePath:
    d: int
    T: float
    dt: float
    times: np.ndarray
    dB: np.ndarray
    small_times: np.ndarray
    small_marks: np.ndarray
    small_offsets: np.ndarray
    large_times: np.ndarray
    large_marks: np.ndarray
    large_offsets: np.ndarray
    seed: object = None
    path_index: int = 0

    @property
    def steps(self):
        return len(self.dB)

    def coarsen(self, factor):
        """Same Brownian path and jumps on a grid ``factor`` times coarser."""
        factor = int(factor)
        if factor == 1:
            return self
        K = self.steps
        if K % factor:
            raise InvalidInputError(f"{K} steps are not divisible by {factor}")
        fine_cum = np.vstack([np.zeros((1, self.d)), np.cumsum(self.dB, axis=0)])
        coarse_dB = self.dB.reshape(K // factor, factor, self.d).sum(axis=1)
        times = self.times[::factor].copy()

        def shift(event_times, offsets):
            cells = np.clip(np.searchsorted(self.times, event_times, side="left") - 1, 0, K - 1)
            start = (cells // factor) * factor
            return fine_cum[cells] - fine_cum[start] + offsets

        return NoisePath(
            self.d,
            self.T,
            self.dt * factor,
            times,
            coarse_dB,
            self.small_times,
            self.small_marks,
            shift(self.small_times, self.small_offsets),
            self.large_times,
            self.large_marks,
            shift(self.large_times, self.large_offsets),
            self.seed,
            self.path_index,
        )

    def without_large_jumps(self):
        empty = np.zeros(0)
        return NoisePath(
            self.d, self.T, self.dt, self.times, self.dB,
            self.small_times, self.small_marks, self.small_offsets,
            empty, np.zeros((0, self.d)), np.zeros((0, self.d)),
            self.seed, self.path_index,
        )

    def schedule(self):
        """Ordered steps on the grid refined by the jump times.

        Entries are ``("c", t0, t1, dB)`` for a continuous step,
        ``("s", t, marks)`` for small jumps at ``t`` and ``("l", t, mark)``
        for a large jump.  Cells without events reuse the stored
        increments unchanged.
        """
        events = [(t, 0, k) for k, t in enumerate(self.small_times)]
        events += [(t, 1, k) for k, t in enumerate(self.large_times)]
        events.sort()
        cells = (
            np.clip(np.searchsorted(self.times, [e[0] for e in events], side="left") - 1, 0, self.steps - 1)
            if events
            else []
        )
        by_cell = {}
        for e, c in zip(events, cells):
            by_cell.setdefault(int(c), []).append(e)
        out = []
        for k in range(self.steps):
            t0, t1 = self.times[k], self.times[k + 1]
            group = by_cell.get(k)
            if not group:
                out.append(("c", t0, t1, self.dB[k]))
                continue
            prev_t, prev_b = t0, np.zeros(self.d)
            i = 0
            while i < len(group):
                s = group[i][0]
                same = [g for g in group[i:] if g[0] == s]
                i += len(same)
                first_kind, first_idx = same[0][1], same[0][2]
                b = self.small_offsets[first_idx] if first_kind == 0 else self.large_offsets[first_idx]
                if s > prev_t:
                    out.append(("c", prev_t, s, b - prev_b))
                small = [g[2] for g in same if g[1] == 0]
                if small:
                    out.append(("s", s, self.small_marks[small]))
                for g in same:
                    if g[1] == 1:
                        out.append(("l", s, self.large_marks[g[2]]))
                prev_t, prev_b = s, b
            if t1 > prev_t:
                out.append(("c", prev_t, t1, self.dB[k] - prev_b))
        return out

    # JSONL replay ------------------------------------------------------
    def to_jsonl(self):
        seed = self.seed if isinstance(self.seed, (int, type(None))) else str(self.seed)
        lines = [
            json.dumps(
                {"type": "header", "d": self.d, "T": self.T, "dt": self.dt, "steps": self.steps,
                 "seed": seed, "path_index": self.path_index}
            )
        ]
        for k in range(self.steps):
            lines.append(json.dumps({"type": "increment", "k": k, "t0": float(self.times[k]),
                                     "t1": float(self.times[k + 1]), "dB": self.dB[k].tolist()}))
        for kind, ts, ms, os_ in (("small", self.small_times, self.small_marks, self.small_offsets),
                                  ("large", self.large_times, self.large_marks, self.large_offsets)):
            for t, m, o in zip(ts, ms, os_):
                lines.append(json.dumps({"type": kind, "t": float(t), "x": m.tolist(), "bridge": o.tolist()}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text):
        header, incs, ev = None, [], {"small": [], "large": []}
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj["type"] == "header":
                header = obj
            elif obj["type"] == "increment":
                incs.append(obj)
            elif obj["type"] in ev:
                ev[obj["type"]].append(obj)
        if header is None:
            raise InvalidInputError("noise JSONL has no header line")
        d = header["d"]
        incs.sort(key=lambda o: o["k"])
        times = np.array([incs[0]["t0"]] + [o["t1"] for o in incs]) if incs else np.zeros(1)
        dB = np.array([o["dB"] for o in incs], dtype=np.float64).reshape(-1, d)

        def unpack(items):
            return (
                np.array([o["t"] for o in items], dtype=np.float64),
                np.array([o["x"] for o in items], dtype=np.float64).reshape(-1, d),
                np.array([o["bridge"] for o in items], dtype=np.float64).reshape(-1, d),
            )

        return cls(d, header["T"], header["dt"], times, dB, *unpack(ev["small"]), *unpack(ev["large"]),
                   header.get("seed"), header.get("path_index", 0))


def generate_noise(model, T, dt, seed, path_index=0):
    """Full noise path; independent streams per component."""
    gens = stream_generators(seed, path_index)
    times, dB = sample_brownian(T, dt, model.d, gens["brownian"])
    small = sample_small_jumps(model, T, gens["small"])
    large = sample_large_jumps(model, T, gens["large"])
    all_times = np.concatenate([small.times, large.times])
    offsets = _bridge_offsets(times, dB, all_times, gens["bridge"])
    ns = len(small.times)
    return NoisePath(
        model.d, float(T), float(dt), times, dB,
        small.times, small.marks.reshape(-1, model.d), offsets[:ns],
        large.times, large.marks.reshape(-1, model.d), offsets[ns:],
        seed if isinstance(seed, int) else None, path_index,
    )
