"""Numpy implementations of the compiled kernels, same signatures and semantics."""
import numpy as np
import scipy.fft as sfft

from .codes import DIRECT_MAX_LENGTH

# frames per FFT batch, bounds the temporary memory of correlate_at_lags
_FRAME_BATCH_SAMPLES = 1 << 22


def synthesize(ex, ey, delays, taps, mask, stim, laser, laser_offset, t0, out_x, out_y):
    n = ex.shape[0]
    chunk = out_x.shape[0]
    t = np.arange(t0, t0 + chunk)
    lo_phase = laser[laser_offset + t0 : laser_offset + t0 + chunk]
    for k in range(delays.shape[0]):
        d = int(delays[k])
        ph = laser[laser_offset + t0 - d : laser_offset + t0 - d + chunk] - lo_phase
        if mask.shape[1]:
            ph = ph + mask[k] @ stim
        w = np.cos(ph) + 1j * np.sin(ph)
        idx = (t - d) % n
        sx = ex[idx]
        sy = ey[idx]
        h = taps[k]
        out_x += w * (h[0] * sx + h[1] * sy)
        out_y += w * (h[2] * sx + h[3] * sy)


def correlate_at_lags(r, code, lags):
    n = code.shape[0]
    n_frames = r.shape[0] // n
    frames = r[: n_frames * n].reshape(n_frames, n)
    lags = np.mod(lags, n)
    if n < DIRECT_MAX_LENGTH:
        shifted = np.stack([np.roll(code, int(lag)) for lag in lags], axis=1)
        return frames @ np.conj(shifted)
    spec = np.conj(sfft.fft(code))
    out = np.empty((n_frames, lags.size), dtype=np.complex128)
    batch = max(1, _FRAME_BATCH_SAMPLES // n)
    for start in range(0, n_frames, batch):
        block = sfft.ifft(sfft.fft(frames[start : start + batch], axis=1) * spec, axis=1)
        out[start : start + batch] = block[:, lags]
    return out
