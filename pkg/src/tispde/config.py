"""JSON experiment configuration.

A config is one JSON document::

    {"space": {"d": 1, "N": 40, "p": 1.0},
     "initial": {"xi": {"kind": "hermite-sum", "terms": [{"index": [0], "coeff": 1.0}]},
                 "kappa": [0.0]},
     "coefficients": {"sigma": [[REP]], "b": [REP], "F": JUMP, "G": JUMP},
     "noise": {"T": 1.0, "dt": 0.02, "small": MEASURE, "large": MEASURE,
               "seed": 0, "paths": 10},
     "run": {"m": 1e6, "tolerances": {...}, "refinements": 3, "tests": 5},
     "inequalities": {...}}

``REP`` is ``0``/``null`` (zero), ``{"terms": [{"index": [...], "coeff": c}]}``,
``{"kind": "delta", "x0": [...]}``, ``{"coeffs": [...]}`` or
``{"kind": "file", "path": "rep.json"}``.  ``JUMP`` is ``{"kind": "zero"}``,
``{"kind": "identity"}`` or ``{"kind": "separable", "terms": [{"h": h,
"f1": MARK, "gamma": [REP, ...]}]}``.  ``MEASURE`` is
``{"atoms": [{"x": [...], "rate": r}]}`` or, in one dimension,
``{"density": {"kind": "power", "scale": c, "alpha": a}, "eps": e}`` for
small jumps and ``{"density": {...}, "intervals": [[a, b], ...]}``.

Errors carry the dotted path of the offending field.
"""
import copy
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet, IdentityJump, MarkFunction, SeparableJump, SeparableTerm, ZeroJump
from .errors import ConfigError, TispdeError
from .levy import AtomMeasure, DensityMeasure, LevyModel, epsilon_truncated
from .sobolev import HermiteRep

DEFAULT_TOLERANCES = {
    "correspondence": 0.0,
    "interlacing": 0.0,
    "ito_abs": 1e-8,
    "ito_min_factor": 1.3,
    "weak_min_factor": 1.3,
    "weak_abs": 1e-8,
    "jump_identity": 1e-8,
    "tail": 1e-6,
}


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj):
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def _get(obj, key, path, default=None, required=False):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    return obj[key]


def _num(value, path, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, "expected an integer")
    if positive and not value > 0:
        raise ConfigError(path, "must be positive")
    if not np.isfinite(value):
        raise ConfigError(path, "must be finite")
    return int(value) if integer else float(value)


def _vector(value, d, path):
    if not isinstance(value, (list, tuple)) or len(value) != d:
        raise ConfigError(path, f"expected a list of {d} numbers")
    return np.array([_num(v, f"{path}[{k}]") for k, v in enumerate(value)])


def parse_rep(spec, d, N, p, path, base_dir="."):
    try:
        if spec is None or spec == 0:
            return HermiteRep.zeros(d, N, p)
        if not isinstance(spec, dict):
            raise ConfigError(path, "expected a representation object, 0 or null")
        kind = spec.get("kind", "coeffs" if "coeffs" in spec else "hermite-sum")
        if kind == "hermite-sum":
            terms = _get(spec, "terms", path, required=True)
            pairs = []
            for k, t in enumerate(terms):
                idx = _get(t, "index", f"{path}.terms[{k}]", required=True)
                pairs.append((tuple(idx), _num(_get(t, "coeff", f"{path}.terms[{k}]", required=True),
                                               f"{path}.terms[{k}].coeff")))
            return HermiteRep.from_terms(d, N, pairs, p)
        if kind == "delta":
            x0 = _vector(_get(spec, "x0", path, required=True), d, f"{path}.x0")
            return HermiteRep.delta(x0, N, p)
        if kind == "coeffs":
            return HermiteRep(d, N, spec["coeffs"], p)
        if kind == "file":
            fpath = os.path.join(base_dir, _get(spec, "path", path, required=True))
            with open(fpath) as fh:
                rep = HermiteRep.from_json(fh.read())
            if (rep.d, rep.N) != (d, N):
                raise ConfigError(path, f"file representation has (d, N) = ({rep.d}, {rep.N})")
            return HermiteRep(d, N, rep.coeffs, p)
        raise ConfigError(f"{path}.kind", f"unknown representation kind {kind!r}")
    except ConfigError:
        raise
    except (TispdeError, OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_jump(spec, d, N, p_gamma, path, base_dir="."):
    if spec is None:
        return ZeroJump(d)
    kind = _get(spec, "kind", path, required=True)
    if kind == "zero":
        return ZeroJump(d)
    if kind == "identity":
        return IdentityJump(d)
    if kind != "separable":
        raise ConfigError(f"{path}.kind", f"unknown jump coefficient kind {kind!r}")
    terms = []
    for k, t in enumerate(_get(spec, "terms", path, required=True)):
        tp = f"{path}.terms[{k}]"
        h = _num(_get(t, "h", tp, 1.0), f"{tp}.h")
        f1spec = _get(t, "f1", tp, {"kind": "constant", "value": 1.0})
        try:
            f1 = MarkFunction.from_dict(f1spec)
        except (TispdeError, KeyError) as exc:
            raise ConfigError(f"{tp}.f1", str(exc)) from exc
        gam = _get(t, "gamma", tp, required=True)
        if not isinstance(gam, list) or len(gam) != d:
            raise ConfigError(f"{tp}.gamma", f"expected {d} representations")
        gammas = [parse_rep(g, d, N, p_gamma, f"{tp}.gamma[{i}]", base_dir) for i, g in enumerate(gam)]
        terms.append(SeparableTerm(h, f1, gammas))
    return SeparableJump(terms)


def _density(spec, path):
    kind = _get(spec, "kind", path, required=True)
    scale = _num(_get(spec, "scale", path, 1.0), f"{path}.scale")
    if kind == "power":
        alpha = _num(_get(spec, "alpha", path, 0.5), f"{path}.alpha")
        return lambda x, s=scale, a=alpha: s * abs(x) ** (-1.0 - a)
    if kind == "uniform":
        return lambda x, s=scale: s
    raise ConfigError(f"{path}.kind", f"unknown density kind {kind!r}")


def parse_measure(spec, d, path, small):
    if spec is None:
        return AtomMeasure.empty(d)
    try:
        if "atoms" in spec:
            atoms = spec["atoms"]
            pts = [_vector(_get(a, "x", f"{path}.atoms[{k}]", required=True), d, f"{path}.atoms[{k}].x")
                   for k, a in enumerate(atoms)]
            rates = [_num(_get(a, "rate", f"{path}.atoms[{k}]", required=True), f"{path}.atoms[{k}].rate")
                     for k, a in enumerate(atoms)]
            for k, x in enumerate(pts):
                r = float(np.linalg.norm(x))
                if (small and not 0.0 < r < 1.0) or (not small and r < 1.0):
                    raise ConfigError(f"{path}.atoms[{k}].x", "small atoms need 0 < |x| < 1" if small
                                      else "large atoms need |x| >= 1")
            return AtomMeasure(np.array(pts).reshape(len(pts), d), rates)
        if "density" in spec:
            if d != 1:
                raise ConfigError(path, "density measures are supported in one dimension only")
            dens = _density(spec["density"], f"{path}.density")
            if small:
                eps = _num(_get(spec, "eps", path, required=True), f"{path}.eps")
                return epsilon_truncated(dens, eps)
            intervals = _get(spec, "intervals", path, required=True)
            return DensityMeasure(dens, intervals)
    except ConfigError:
        raise
    except (TispdeError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(path, "expected 'atoms' or 'density'")


@dataclass
class ExperimentConfig:
    raw: dict
    base_dir: str = "."
    d: int = field(init=False)
    N: int = field(init=False)
    p: float = field(init=False)
    Q: int = field(init=False)

    def __post_init__(self):
        space = _get(self.raw, "space", "config", required=True)
        self.d = _num(_get(space, "d", "space", required=True), "space.d", positive=True, integer=True)
        self.N = _num(_get(space, "N", "space", required=True), "space.N", positive=True, integer=True)
        self.p = _num(_get(space, "p", "space", 0.0), "space.p")
        q = _get(space, "Q", "space")
        self.Q = None if q is None else _num(q, "space.Q", positive=True, integer=True)
        # validate everything eagerly so errors surface before any run
        self.xi, self.kappa = self._initial()
        self.cset = self._coefficients()
        self.model = self._model()
        self._noise_params()
        self._run_params()

    # ------------------------------------------------------------------
    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        return cls(raw, os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_json(cls, text, base_dir="."):
        return cls(json.loads(text), base_dir)

    def to_json(self):
        return canonical_json(self.raw)

    def with_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw.setdefault("noise", {})["seed"] = int(seed)
        return ExperimentConfig(raw, self.base_dir)

    @property
    def hash(self):
        return content_hash(self.raw)

    # ------------------------------------------------------------------
    def _initial(self):
        init = _get(self.raw, "initial", "config", {})
        xi = parse_rep(_get(init, "xi", "initial", required=True), self.d, self.N, -self.p, "initial.xi",
                       self.base_dir)
        kappa = _get(init, "kappa", "initial")
        kappa = np.zeros(self.d) if kappa is None else _vector(kappa, self.d, "initial.kappa")
        return xi, kappa

    def _coefficients(self):
        co = _get(self.raw, "coefficients", "config", {})
        d, N, p = self.d, self.N, self.p
        sig = _get(co, "sigma", "coefficients")
        if sig is None:
            sigma = [[HermiteRep.zeros(d, N, p)] * d for _ in range(d)]
        else:
            if not isinstance(sig, list) or len(sig) != d or any(not isinstance(r, list) or len(r) != d for r in sig):
                raise ConfigError("coefficients.sigma", f"expected a {d} x {d} nested list")
            sigma = [[parse_rep(s, d, N, p, f"coefficients.sigma[{i}][{j}]", self.base_dir)
                      for j, s in enumerate(row)] for i, row in enumerate(sig)]
        bb = _get(co, "b", "coefficients")
        if bb is None:
            b = [HermiteRep.zeros(d, N, p)] * d
        else:
            if not isinstance(bb, list) or len(bb) != d:
                raise ConfigError("coefficients.b", f"expected a list of {d} representations")
            b = [parse_rep(s, d, N, p, f"coefficients.b[{i}]", self.base_dir) for i, s in enumerate(bb)]
        F = parse_jump(_get(co, "F", "coefficients"), d, N, p + 0.5, "coefficients.F", self.base_dir)
        G = parse_jump(_get(co, "G", "coefficients"), d, N, p, "coefficients.G", self.base_dir)
        return CoefficientSet(sigma, b, F, G, p)

    def _model(self):
        nz = _get(self.raw, "noise", "config", {})
        small = parse_measure(_get(nz, "small", "noise"), self.d, "noise.small", True)
        large = parse_measure(_get(nz, "large", "noise"), self.d, "noise.large", False)
        try:
            return LevyModel(self.d, small, large)
        except TispdeError as exc:
            raise ConfigError("noise", str(exc)) from exc

    def _noise_params(self):
        nz = _get(self.raw, "noise", "config", {})
        self.T = _num(_get(nz, "T", "noise", 1.0), "noise.T", positive=True)
        self.dt = _num(_get(nz, "dt", "noise", 0.01), "noise.dt", positive=True)
        self.seed = _num(_get(nz, "seed", "noise", 0), "noise.seed", integer=True)
        self.paths = _num(_get(nz, "paths", "noise", 1), "noise.paths", positive=True, integer=True)

    def _run_params(self):
        run = _get(self.raw, "run", "config", {})
        self.m = _num(_get(run, "m", "run", 1e6), "run.m", positive=True)
        if not self.m > np.linalg.norm(self.kappa):
            raise ConfigError("run.m", "explosion threshold must exceed |kappa|")
        tol = dict(DEFAULT_TOLERANCES)
        for k, v in (_get(run, "tolerances", "run", {}) or {}).items():
            if k not in DEFAULT_TOLERANCES:
                raise ConfigError(f"run.tolerances.{k}", "unknown tolerance")
            tol[k] = _num(v, f"run.tolerances.{k}")
        self.tolerances = tol
        self.refinements = _num(_get(run, "refinements", "run", 3), "run.refinements", positive=True, integer=True)
        tests = _num(_get(run, "tests", "run", 5), "run.tests", integer=True)
        if tests < 0:
            raise ConfigError("run.tests", "must be non-negative")
        self.test_degree = tests
        if self.d == 1 and tests > self.N - 2:
            raise ConfigError("run.tests", "test functions need degree <= N - 2")
        self.inequalities = _get(self.raw, "inequalities", "config", {}) or {}

    def test_functions(self):
        """``h_n`` for ``|n| <= tests`` (capped at ``N - 2``)."""
        from .hermite import multi_indices

        top = min(self.test_degree, self.N - 2)
        return [(n, HermiteRep.unit(n, self.N)) for n in multi_indices(self.d, top)]
