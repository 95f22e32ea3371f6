# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Hermite-function recurrences and 1-d translation."""
import numpy as np

from libc.math cimport exp, sqrt

cdef double PI_M14 = 0.7511255444649425  # pi ** -0.25


cdef _recurrence(int N):
    """``alpha[n] = sqrt(2/(n+1))`` and ``beta[n] = sqrt(n/(n+1))`` for n < N."""
    n = np.arange(max(N, 1), dtype=np.float64)
    return np.sqrt(2.0 / (n + 1.0)), np.sqrt(n / (n + 1.0))


def hermite_table(int N, const double[::1] t):
    """h_0..h_N at every point of ``t``; shape ``(len(t), N + 1)``."""
    cdef Py_ssize_t Q = t.shape[0]
    out = np.empty((Q, N + 1), dtype=np.float64)
    cdef double[:, ::1] H = out
    cdef Py_ssize_t q
    cdef int n
    cdef double x, a, b, c
    al, be = _recurrence(N)
    cdef const double[::1] alpha = al
    cdef const double[::1] beta = be
    cdef double r2 = sqrt(2.0)
    for q in range(Q):
        x = t[q]
        a = PI_M14 * exp(-0.5 * x * x)
        H[q, 0] = a
        if N == 0:
            continue
        b = r2 * x * a
        H[q, 1] = b
        for n in range(1, N):
            c = alpha[n] * x * b - beta[n] * a
            H[q, n + 1] = c
            a = b
            b = c
    return out


def translate_1d(const double[::1] coeffs, double z,
                 const double[::1] nodes, const double[::1] scaled_weights):
    """Coefficients of ``tau_z f`` for ``f = sum_n coeffs[n] h_n``.

    Uses nodes shifted by ``z/2`` so the integrand is polynomial times the
    Gauss weight; exact whenever ``len(nodes) >= len(coeffs)``.
    """
    cdef Py_ssize_t Np1 = coeffs.shape[0]
    cdef Py_ssize_t Q = nodes.shape[0]
    result = np.zeros(Np1, dtype=np.float64)
    cdef double[::1] out = result
    cdef Py_ssize_t q, n
    cdef double x, a, b, c, g, half = 0.5 * z
    al, be = _recurrence(Np1 - 1)
    cdef const double[::1] alpha = al
    cdef const double[::1] beta = be
    cdef double r2 = sqrt(2.0)
    for q in range(Q):
        # f(s_q - z/2)
        x = nodes[q] - half
        a = PI_M14 * exp(-0.5 * x * x)
        g = coeffs[0] * a
        if Np1 > 1:
            b = r2 * x * a
            g += coeffs[1] * b
            for n in range(1, Np1 - 1):
                c = alpha[n] * x * b - beta[n] * a
                g += coeffs[n + 1] * c
                a = b
                b = c
        g *= scaled_weights[q]
        if g == 0.0:
            continue
        # accumulate g * h_m(s_q + z/2)
        x = nodes[q] + half
        a = PI_M14 * exp(-0.5 * x * x)
        out[0] += g * a
        if Np1 > 1:
            b = r2 * x * a
            out[1] += g * b
            for n in range(1, Np1 - 1):
                c = alpha[n] * x * b - beta[n] * a
                out[n + 1] += g * c
                a = b
                b = c
    return result
