"""Slow, obviously-correct reference computations used by the tests."""
import numpy as np


def brute_correlate(a, b, periodic=False):
    """c[k] = sum_n a[n] * conj(b[n - k]) by explicit double loop, as (lags, values)."""
    a = list(a)
    b = list(b)
    if periodic:
        n = len(a)
        lags = list(range(n))
        vals = [sum(a[i] * np.conj(b[(i - k) % n]) for i in range(n)) for k in lags]
    else:
        lags = list(range(-(len(b) - 1), len(a)))
        vals = []
        for k in lags:
            acc = 0
            for i in range(len(a)):
                j = i - k
                if 0 <= j < len(b):
                    acc += a[i] * np.conj(b[j])
            vals.append(acc)
    return np.array(lags), np.array(vals)


def dense_convolve_channel(ex, ey, taps, length, weights=None):
    """Noiseless received field by explicit per-sample summation over taps.

    ``taps`` is a list of ``(delay, H)`` with ``H`` a 2x2 matrix; the probe
    repeats with period ``len(ex)``.  ``weights[k][t]`` optionally multiplies
    tap ``k`` at sample ``t``.
    """
    n = len(ex)
    rx = np.zeros(length, dtype=complex)
    ry = np.zeros(length, dtype=complex)
    for t in range(length):
        for k, (d, h) in enumerate(taps):
            w = 1.0 if weights is None else weights[k][t]
            sx = ex[(t - d) % n]
            sy = ey[(t - d) % n]
            rx[t] += w * (h[0][0] * sx + h[0][1] * sy)
            ry[t] += w * (h[1][0] * sx + h[1][1] * sy)
    return rx, ry
