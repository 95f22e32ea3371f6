"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
implementations in ``_pykernels`` are used.  ``use_backend`` switches at
runtime (mainly for tests and benchmarks).
"""
import numpy as np

from . import _pykernels
from .errors import InvalidInputError

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _BACKENDS.get("cython", _pykernels)


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


class _BackendSwitch:
    """Returned by :func:`use_backend`; restores the previous backend when used as a context manager."""

    def __init__(self, previous):
        self.previous = previous

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        global _active
        _active = _BACKENDS[self.previous]
        return False


def use_backend(name):
    """Select ``"cython"`` or ``"python"`` now; ``with use_backend(...)`` scopes the switch."""
    global _active
    if name not in _BACKENDS:
        raise InvalidInputError(f"backend {name!r} unavailable; choose from {available_backends()}")
    previous = backend_name()
    _active = _BACKENDS[name]
    return _BackendSwitch(previous)


def hermite_table(N, t):
    return _active.hermite_table(int(N), np.ascontiguousarray(t, dtype=np.float64))


def translate_1d(coeffs, z, nodes, scaled_weights):
    return _active.translate_1d(
        np.ascontiguousarray(coeffs, dtype=np.float64), float(z), nodes, scaled_weights
    )
