# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: per-sample channel synthesis and lag-sampled periodic correlation."""
import numpy as np

from libc.math cimport cos, sin


def synthesize(const double complex[::1] ex,
               const double complex[::1] ey,
               const long long[::1] delays,
               const double complex[:, ::1] taps,
               const double[:, ::1] mask,
               const double[:, ::1] stim,
               const double[::1] laser,
               Py_ssize_t laser_offset,
               Py_ssize_t t0,
               double complex[::1] out_x,
               double complex[::1] out_y):
    """Accumulate every tap's contribution to ``out_x``/``out_y`` for samples ``t0 .. t0+C-1``."""
    cdef Py_ssize_t n = ex.shape[0]
    cdef Py_ssize_t n_taps = delays.shape[0]
    cdef Py_ssize_t n_stim = mask.shape[1]
    cdef Py_ssize_t chunk = out_x.shape[0]
    cdef Py_ssize_t k, t, j, idx, li
    cdef long long d
    cdef double ph
    cdef double complex w, sx, sy, h00, h01, h10, h11
    for k in range(n_taps):
        d = delays[k]
        h00 = taps[k, 0]
        h01 = taps[k, 1]
        h10 = taps[k, 2]
        h11 = taps[k, 3]
        idx = (t0 - d) % n
        if idx < 0:
            idx += n
        li = laser_offset + t0 - d
        for t in range(chunk):
            ph = laser[li + t] - laser[laser_offset + t0 + t]
            for j in range(n_stim):
                ph += mask[k, j] * stim[j, t]
            w = cos(ph) + 1j * sin(ph)
            sx = ex[idx]
            sy = ey[idx]
            out_x[t] += w * (h00 * sx + h01 * sy)
            out_y[t] += w * (h10 * sx + h11 * sy)
            idx += 1
            if idx == n:
                idx = 0


def correlate_at_lags(const double complex[::1] r,
                      const double complex[::1] code,
                      const long long[::1] lags):
    """``out[f, k] = sum_m r[f*N + m] * conj(code[(m - lags[k]) % N])`` by direct summation."""
    cdef Py_ssize_t n = code.shape[0]
    cdef Py_ssize_t n_frames = r.shape[0] // n
    cdef Py_ssize_t n_lags = lags.shape[0]
    out = np.zeros((n_frames, n_lags), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t f, k, m, lag, base
    cdef double complex acc
    cdef double complex[::1] cc = np.conj(np.asarray(code))
    for f in range(n_frames):
        base = f * n
        for k in range(n_lags):
            lag = lags[k] % n
            if lag < 0:
                lag += n
            acc = 0
            for m in range(lag):
                acc = acc + r[base + m] * cc[m - lag + n]
            for m in range(lag, n):
                acc = acc + r[base + m] * cc[m - lag]
            o[f, k] = acc
    return out
