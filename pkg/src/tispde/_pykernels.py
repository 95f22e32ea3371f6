"""Pure-numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np

PI_M14 = np.pi ** -0.25


def hermite_table(N, t):
    t = np.ascontiguousarray(t, dtype=np.float64)
    out = np.empty((t.shape[0], N + 1))
    out[:, 0] = PI_M14 * np.exp(-0.5 * t * t)
    if N == 0:
        return out
    out[:, 1] = np.sqrt(2.0) * t * out[:, 0]
    for n in range(1, N):
        out[:, n + 1] = np.sqrt(2.0 / (n + 1)) * t * out[:, n] - np.sqrt(n / (n + 1.0)) * out[:, n - 1]
    return out


def translate_1d(coeffs, z, nodes, scaled_weights):
    N = coeffs.shape[0] - 1
    g = scaled_weights * (hermite_table(N, nodes - 0.5 * z) @ coeffs)
    return hermite_table(N, nodes + 0.5 * z).T @ g
