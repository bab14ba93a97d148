"""Correlation receiver: per-grating Jones estimates, determinant phase, space-time phase map."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
from numpy.typing import NDArray

from . import kernels
from .channel import IQCapture
from .codes import correlate
from .errors import DegenerateEstimateError, InvalidArgumentError, PreconditionError
from .modulation import ProbeFrame, Scheme, zero_correlation_zone

#: Increments above this fraction of the pi/2 unwrap limit are counted as near-limit.
NEAR_LIMIT_FRACTION = 0.8


@dataclass(frozen=True)
class JonesEstimateFrame:
    delays: NDArray[np.int64]
    taps: NDArray[np.complex128]  # (n_fbg, 2, 2)
    frame_index: int
    timestamp: float

    def __len__(self) -> int:
        return int(self.delays.size)


def check_delays(frame: ProbeFrame, delays: Sequence[int]) -> np.ndarray:
    """Validate tap delays against the scheme's perfect-estimation conditions."""
    d = np.asarray(delays)
    if d.ndim != 1 or (d.size and not np.issubdtype(d.dtype, np.integer)):
        raise InvalidArgumentError("delays must be a 1-D sequence of integer symbol counts")
    d = d.astype(np.int64)
    if d.size == 0:
        return d
    if np.any(np.diff(d) <= 0):
        raise InvalidArgumentError("delays must be strictly increasing")
    spread = int(d[-1] - d[0])
    if spread >= frame.n:
        raise PreconditionError(
            f"delays span {spread} symbols, more than one frame period of {frame.n}"
        )
    if frame.scheme is Scheme.PDM_QPSK:
        off = (d - d[0]) % 4
        if off.any():
            bad = int(np.flatnonzero(off)[0])
            raise PreconditionError(
                "PDM-QPSK needs tap delays spaced by multiples of 4 symbols (mod-4 rule); "
                f"delay {int(d[bad])} is {int(d[bad] - d[0])} symbols after delay {int(d[0])}"
            )
    else:
        zone = zero_correlation_zone(frame)
        if spread > zone:
            raise PreconditionError(
                f"PDM-BPSK channel response spans {spread} symbols, beyond the "
                f"zero-correlation zone of {zone} symbols"
            )
    return d


def estimate_jones_array(
    capture: IQCapture,
    frame: ProbeFrame,
    delays: Sequence[int],
    average: int = 1,
    check: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(taps[F, K, 2, 2], timestamps[F])`` for every whole (averaged) frame."""
    if check:
        d = check_delays(frame, delays)
    else:
        d = np.asarray(delays, dtype=np.int64)
    if int(average) != average or average < 1:
        raise InvalidArgumentError(f"average must be a positive integer, got {average}")
    n = frame.n
    n_frames = len(capture) // n
    if n_frames < 2:
        raise InvalidArgumentError(
            f"capture holds {len(capture)} samples, at least two frame periods ({2 * n}) are needed"
        )
    rx = np.ascontiguousarray(capture.e_rx[: n_frames * n])
    ry = np.ascontiguousarray(capture.e_ry[: n_frames * n])
    ex = np.ascontiguousarray(frame.e_tx)
    ey = np.ascontiguousarray(frame.e_ty)
    taps = np.empty((n_frames, d.size, 2, 2), dtype=np.complex128)
    for i, r in enumerate((rx, ry)):
        for j, e in enumerate((ex, ey)):
            taps[:, :, i, j] = kernels.correlate_at_lags(r, e, d)
    taps /= frame.energy
    times = (np.arange(n_frames) + 0.5) * frame.t_code
    if average > 1:
        m = n_frames // average
        if m < 2:
            raise InvalidArgumentError("averaging leaves fewer than two estimates")
        taps = taps[: m * average].reshape(m, average, *taps.shape[1:]).mean(axis=1)
        times = times[: m * average].reshape(m, average).mean(axis=1)
    return taps, times


def estimate_jones(
    capture: IQCapture,
    frame: ProbeFrame,
    fbg_delays: Sequence[int],
    average: int = 1,
    check: bool = True,
) -> list[JonesEstimateFrame]:
    """Correlate each frame period against the transmitted code and sample at ``fbg_delays``.

    One estimate per frame period unless ``average`` > 1, which coherently
    averages that many consecutive frames.  ``check=False`` skips the
    delay preconditions (used to study leakage on purpose).
    """
    taps, times = estimate_jones_array(capture, frame, fbg_delays, average, check)
    d = np.asarray(fbg_delays, dtype=np.int64)
    d.flags.writeable = False
    return [JonesEstimateFrame(d, taps[f], f, float(times[f])) for f in range(taps.shape[0])]


def extract_phase(h) -> float:
    """Half the argument of ``det(h)``, in ``(-pi/2, pi/2]``."""
    h = np.asarray(h)
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    if det == 0 or not np.isfinite(det):
        raise DegenerateEstimateError("Jones estimate has zero determinant")
    return 0.5 * float(np.angle(det))


def _wrap_half_pi(x):
    """Map onto ``(-pi/2, pi/2]``."""
    return math.pi / 2 - np.mod(math.pi / 2 - x, math.pi)


def _wrap_pi(x):
    """Map onto ``(-pi, pi]``."""
    return math.pi - np.mod(math.pi - x, 2 * math.pi)


@dataclass(frozen=True)
class PhaseMap:
    """Differential phase per grating (rows) and frame (columns).

    ``near_limit`` counts per row the frame-to-frame increments close to the
    pi/2 unwrap bound; ``ambiguity`` counts increments where the full Jones
    matrices disagree with the determinant about which pi branch was taken.
    """

    phases: NDArray[np.float64]
    timestamps: NDArray[np.float64]
    reference_index: int
    frame_period: float
    near_limit: NDArray[np.int64]
    ambiguity: NDArray[np.int64]

    @property
    def n_fbg(self) -> int:
        return int(self.phases.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.phases.shape[1])

    @property
    def duration(self) -> float:
        return self.n_frames * self.frame_period

    @property
    def f_max(self) -> float:
        return 1.0 / (2.0 * self.frame_period)

    @property
    def near_limit_count(self) -> int:
        return int(self.near_limit.sum())

    @property
    def ambiguity_count(self) -> int:
        return int(self.ambiguity.sum())

    @property
    def unwrap_failures(self) -> int:
        return self.near_limit_count + self.ambiguity_count

    def differential(self) -> "PhaseMap":
        """Row ``k`` minus row ``k-1``, so each row holds a single segment's phase."""
        d = self.phases.copy()
        d[1:] = np.diff(self.phases, axis=0)
        return PhaseMap(d, self.timestamps, self.reference_index, self.frame_period, self.near_limit, self.ambiguity)

    @classmethod
    def from_array(cls, phases, frame_period: float, reference_index: int = 0) -> "PhaseMap":
        """Wrap an existing ``(n_fbg, n_frames)`` array, e.g. synthetic test data."""
        phases = np.atleast_2d(np.asarray(phases, dtype=np.float64))
        ts = (np.arange(phases.shape[1]) + 0.5) * frame_period
        zeros = np.zeros(phases.shape[0], dtype=np.int64)
        return cls(phases, ts, reference_index, float(frame_period), zeros, zeros.copy())


def _ambiguity_flags(taps: np.ndarray, ref: int, det_steps: np.ndarray) -> np.ndarray:
    """Compare determinant increments with the scalar part of the relative Jones change."""
    flags = np.zeros(det_steps.shape, dtype=bool)
    ref_det = np.linalg.det(taps[:, ref])
    if np.any(ref_det == 0):
        return flags
    rel = taps @ np.linalg.inv(taps[:, ref])[:, None]
    rel_det = np.linalg.det(rel)
    ok = np.abs(rel_det) > 0
    safe = np.where(ok[..., None, None], rel, np.eye(2))
    change = safe[1:] @ np.linalg.inv(safe[:-1])
    jones_steps = np.angle(0.5 * (change[..., 0, 0] + change[..., 1, 1]))
    valid = ok[1:] & ok[:-1]
    flags = valid & (np.abs(_wrap_pi(jones_steps - det_steps)) > math.pi / 2)
    return flags


def build_phase_map(estimates, reference_index: int = 0, timestamps=None) -> PhaseMap:
    """Reference every grating to ``reference_index`` and unwrap each row along time.

    ``estimates`` is a list of :class:`JonesEstimateFrame` or a ``(F, K, 2, 2)``
    array (then pass ``timestamps``).  The determinant gives phase modulo pi,
    so successive increments are assumed to stay within pi/2.
    """
    if isinstance(estimates, np.ndarray):
        taps = estimates
        if timestamps is None:
            raise InvalidArgumentError("timestamps are required with an array of estimates")
        ts = np.asarray(timestamps, dtype=np.float64)
    else:
        if len(estimates) < 2:
            raise InvalidArgumentError("a phase map needs at least two frames")
        counts = {len(e) for e in estimates}
        if len(counts) != 1:
            raise InvalidArgumentError(f"inconsistent tap counts across frames: {sorted(counts)}")
        taps = np.stack([e.taps for e in estimates])
        ts = np.array([e.timestamp for e in estimates], dtype=np.float64)
    if taps.ndim != 4 or taps.shape[2:] != (2, 2):
        raise InvalidArgumentError("estimates must have shape (frames, taps, 2, 2)")
    n_frames, n_taps = taps.shape[:2]
    if n_frames < 2:
        raise InvalidArgumentError("a phase map needs at least two frames")
    if ts.shape != (n_frames,):
        raise InvalidArgumentError("one timestamp per frame is required")
    if not 0 <= reference_index < n_taps:
        raise InvalidArgumentError(f"reference index {reference_index} outside 0..{n_taps - 1}")

    det = taps[..., 0, 0] * taps[..., 1, 1] - taps[..., 0, 1] * taps[..., 1, 0]
    if np.any(det == 0):
        bad = np.argwhere(det == 0)[0]
        raise DegenerateEstimateError(f"zero determinant at frame {bad[0]}, tap {bad[1]}")
    raw = 0.5 * np.angle(det)
    rel = _wrap_half_pi(raw - raw[:, [reference_index]])
    steps = _wrap_half_pi(np.diff(rel, axis=0))
    phases = np.zeros((n_frames, n_taps))
    phases[0] = rel[0]
    phases[1:] = rel[0] + np.cumsum(steps, axis=0)
    phases[:, reference_index] = 0.0

    near = np.abs(steps) > NEAR_LIMIT_FRACTION * math.pi / 2
    amb = _ambiguity_flags(taps, reference_index, steps)
    near[:, reference_index] = False
    amb[:, reference_index] = False
    period = float(ts[1] - ts[0])
    return PhaseMap(
        phases.T.copy(),
        ts,
        int(reference_index),
        period,
        near.sum(axis=0).astype(np.int64),
        amb.sum(axis=0).astype(np.int64),
    )


def correlation_intensity(capture: IQCapture, frame: ProbeFrame) -> np.ndarray:
    """Mean over frames of ``sum |h'_ij|^2`` at every lag of the frame period."""
    n = frame.n
    n_frames = len(capture) // n
    if n_frames < 1:
        raise InvalidArgumentError("capture is shorter than one frame period")
    acc = np.zeros(n)
    for f in range(n_frames):
        sl = slice(f * n, (f + 1) * n)
        for r in (capture.e_rx[sl], capture.e_ry[sl]):
            for e in (frame.e_tx, frame.e_ty):
                acc += np.abs(correlate(r, e, mode="periodic").values / frame.energy) ** 2
    return acc / n_frames


def detect_peaks(capture: IQCapture, frame: ProbeFrame, threshold_db: float = 20.0) -> list[int]:
    """Lags (modulo the frame period) of intensity peaks within ``threshold_db`` of the strongest.

    The search is limited to lags where the probe has no correlation
    sidelobes relative to the strongest reflection: its residue class
    modulo 4 for PDM-QPSK, its zero-correlation zone for PDM-BPSK.
    """
    if not threshold_db >= 0:
        raise InvalidArgumentError(f"threshold must be >= 0 dB, got {threshold_db}")
    inten = correlation_intensity(capture, frame)
    n = inten.size
    p = int(np.argmax(inten))
    top = inten[p]
    if not top > 0:
        return []
    lags = np.arange(n)
    if frame.scheme is Scheme.PDM_QPSK:
        allowed = (lags - p) % 4 == 0
        step = 4
    else:
        zone = zero_correlation_zone(frame)
        allowed = np.minimum((lags - p) % n, (p - lags) % n) <= zone
        step = 1
    floor = top * 10.0 ** (-threshold_db / 10.0)
    left = np.roll(inten, step)
    right = np.roll(inten, -step)
    peaks = allowed & (inten >= floor) & (inten > left) & (inten >= right)
    return [int(i) for i in np.flatnonzero(peaks)]


def write_phase_map_csv(pmap: PhaseMap, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["timestamp"] + [f"fbg_{k}" for k in range(pmap.n_fbg)])
    for f in range(pmap.n_frames):
        w.writerow([repr(float(pmap.timestamps[f]))] + [repr(float(v)) for v in pmap.phases[:, f]])


def read_phase_map_csv(fh: IO[str], reference_index: int = 0) -> PhaseMap:
    rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "timestamp":
        raise InvalidArgumentError("phase map CSV must start with a timestamp column")
    data = np.array([[float(v) for v in r] for r in body])
    if data.shape[0] < 2:
        raise InvalidArgumentError("phase map CSV needs at least two rows")
    pm = PhaseMap.from_array(data[:, 1:].T, float(data[1, 0] - data[0, 0]), reference_index)
    return PhaseMap(pm.phases, data[:, 0].copy(), reference_index, pm.frame_period, pm.near_limit, pm.ambiguity)
