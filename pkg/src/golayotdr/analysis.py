"""Sensing metrics computed from phase maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy import optimize, signal

from .errors import InvalidArgumentError, ToneNotFoundError
from .receiver import PhaseMap

MIN_PSD_FRAMES = 64
#: A tone must stand this far above the median noise bin to be analysed.
TONE_DOMINANCE_DB = 10.0
#: Bins on each side of the tone bin left out of the noise estimate.
TONE_GUARD_BINS = 2
LINEARITY_TOLERANCE_DB = 0.5


@dataclass
class MetricReport:
    per_fbg_std: np.ndarray
    mean_std: float
    crosstalk_db: float | None = None
    sensitivity: float | None = None
    psd: tuple[np.ndarray, np.ndarray] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.per_fbg_std = np.asarray(self.per_fbg_std, dtype=np.float64)
        if np.any(self.per_fbg_std < 0) or self.mean_std < 0:
            raise InvalidArgumentError("standard deviations must be nonnegative")

    def to_text(self) -> str:
        lines = [f"mean_std_rad = {float(self.mean_std)!r}"]
        lines += [f"std_fbg_{k}_rad = {float(v)!r}" for k, v in enumerate(self.per_fbg_std)]
        if self.crosstalk_db is not None:
            lines.append(f"crosstalk_db = {float(self.crosstalk_db)!r}")
        if self.sensitivity is not None:
            lines.append(f"sensitivity_rad_per_rthz = {float(self.sensitivity)!r}")
        for key in sorted(self.extra):
            v = self.extra[key]
            lines.append(f"{key} = {float(v)!r}" if isinstance(v, (float, np.floating)) else f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def write_psd_csv(self, fh: IO[str]) -> None:
        if self.psd is None:
            raise InvalidArgumentError("report carries no PSD")
        write_series_csv(fh, {"frequency_hz": self.psd[0], "psd_rad2_per_hz": self.psd[1]})


def write_series_csv(fh: IO[str], columns: dict) -> None:
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    if len({d.size for d in data}) > 1:
        raise InvalidArgumentError("all series need the same length")
    fh.write(",".join(names) + "\n")
    for row in zip(*data):
        fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _row(pmap: PhaseMap, fbg: int) -> np.ndarray:
    if not 0 <= fbg < pmap.n_fbg:
        raise InvalidArgumentError(f"FBG index {fbg} outside 0..{pmap.n_fbg - 1}")
    return pmap.phases[fbg]


def phase_std(pmap: PhaseMap, window: float | None = None) -> MetricReport:
    """Sample std of every row over the first ``window`` seconds (whole map by default).

    The mean leaves out the reference row, whose phase is zero by construction.
    """
    n = pmap.n_frames
    if window is not None:
        if window > pmap.duration * (1 + 1e-9):
            raise InvalidArgumentError(
                f"window {window} s exceeds the map duration of {pmap.duration} s"
            )
        n = max(2, int(round(window / pmap.frame_period)))
    if n < 2:
        raise InvalidArgumentError("need at least two frames for a standard deviation")
    per = np.std(pmap.phases[:, :n], axis=1, ddof=1)
    others = [k for k in range(pmap.n_fbg) if k != pmap.reference_index]
    mean = float(per[others].mean()) if others else 0.0
    return MetricReport(per, mean, extra={"frames": n, "f_max_hz": pmap.f_max})


def resolution(pmap: PhaseMap) -> float:
    """Frequency resolution B of a periodogram over the whole map (Hz)."""
    return 1.0 / pmap.duration


def psd(pmap: PhaseMap, fbg: int, smooth_bins: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """One-sided flat-window periodogram of one row, in rad^2/Hz, bins spaced 1/duration.

    ``smooth_bins`` > 1 applies a moving average over that many bins.
    """
    x = _row(pmap, fbg)
    if x.size < MIN_PSD_FRAMES:
        raise InvalidArgumentError(f"PSD needs at least {MIN_PSD_FRAMES} frames, got {x.size}")
    f, p = signal.periodogram(
        x, fs=1.0 / pmap.frame_period, window="boxcar", detrend="constant", scaling="density"
    )
    if smooth_bins > 1:
        p = np.convolve(p, np.ones(smooth_bins) / smooth_bins, mode="same")
    return f, p


def _tone_bin(f: np.ndarray, tone_hz: float) -> int:
    if not 0 < tone_hz <= f[-1]:
        raise InvalidArgumentError(f"tone {tone_hz} Hz is outside (0, {f[-1]}] Hz")
    return int(np.argmin(np.abs(f - tone_hz)))


def _off_tone(p: np.ndarray, k: int) -> np.ndarray:
    keep = np.ones(p.size, dtype=bool)
    keep[0] = False
    keep[max(0, k - TONE_GUARD_BINS) : k + TONE_GUARD_BINS + 1] = False
    return p[keep]


def tone_power(pmap: PhaseMap, fbg: int, tone_hz: float) -> float:
    """Power (rad^2) in the bins next to ``tone_hz``."""
    f, p = psd(pmap, fbg)
    k = _tone_bin(f, tone_hz)
    b = f[1] - f[0]
    return float(p[max(1, k - 1) : k + 2].sum() * b)


def _check_dominant(p: np.ndarray, k: int, what: str) -> None:
    noise = np.median(_off_tone(p, k))
    peak = p[max(1, k - 1) : k + 2].max()
    if not peak > noise * 10 ** (TONE_DOMINANCE_DB / 10):
        raise ToneNotFoundError(
            f"{what}: tone bin is not {TONE_DOMINANCE_DB:g} dB above the median noise bin"
        )


def sensitivity(pmap: PhaseMap, fbg: int, tone_hz: float) -> float:
    """Noise floor density (rad/sqrt(Hz)) around a tone.

    The fitted tone is subtracted first so its window leakage does not
    masquerade as noise.  The median of the remaining off-tone bins
    estimates the noise power; periodogram bins are exponentially
    distributed, so the median is scaled by ``1/ln 2`` to recover the
    mean density before the square root.
    """
    f, p = psd(pmap, fbg)
    k = _tone_bin(f, tone_hz)
    _check_dominant(p, k, f"row {fbg} at {tone_hz} Hz")
    x = _row(pmap, fbg)
    resid = min(
        (x - _tone_fit(pmap, fbg, fr)[1] for fr in (tone_hz, _refine_tone(pmap, fbg, tone_hz, f[1] - f[0]))),
        key=lambda r: float(np.dot(r - r.mean(), r - r.mean())),
    )
    _, q = psd(PhaseMap.from_array(resid, pmap.frame_period), 0)
    return math.sqrt(float(np.median(_off_tone(q, k))) / math.log(2.0))


def sensitivity_spectrum(pmap: PhaseMap, fbg: int, smooth_bins: int = 9) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed amplitude density sqrt(PSD) per frequency, for export."""
    f, p = psd(pmap, fbg, smooth_bins)
    return f, np.sqrt(p)


def locate_excitation(pmap: PhaseMap, tone_hz: float) -> int:
    """Row of the spatially differenced map holding the most tone power."""
    d = pmap.differential()
    rows = [k for k in range(d.n_fbg) if k != d.reference_index]
    powers = [tone_power(d, k, tone_hz) for k in rows]
    return rows[int(np.argmax(powers))]


def crosstalk_rejection(pmap: PhaseMap, excited_fbg: int, tone_hz: float) -> float:
    """Tone power on the strongest unexcited segment relative to the excited one (dB).

    Rows are spatially differenced first so each row holds one segment.
    """
    d = pmap.differential()
    f, p = psd(d, excited_fbg)
    _check_dominant(p, _tone_bin(f, tone_hz), f"excited row {excited_fbg} at {tone_hz} Hz")
    excited = tone_power(d, excited_fbg, tone_hz)
    others = [
        tone_power(d, k, tone_hz) for k in range(d.n_fbg) if k not in (excited_fbg, d.reference_index)
    ]
    if not others:
        raise InvalidArgumentError("no unexcited row to compare against")
    worst = max(max(others), np.finfo(float).tiny)
    return 10.0 * math.log10(worst / excited)


def _tone_fit(pmap: PhaseMap, fbg: int, tone_hz: float) -> tuple[float, np.ndarray]:
    x = _row(pmap, fbg)
    w = 2.0 * math.pi * tone_hz * pmap.timestamps
    design = np.column_stack([np.cos(w), np.sin(w), np.ones_like(w)])
    coef, *_ = np.linalg.lstsq(design, x, rcond=None)
    return 2.0 * math.hypot(coef[0], coef[1]), design @ coef


def _refine_tone(pmap: PhaseMap, fbg: int, tone_hz: float, b: float) -> float:
    """Frequency within one bin of ``tone_hz`` maximizing the fitted amplitude."""
    res = optimize.minimize_scalar(
        lambda fr: -_tone_fit(pmap, fbg, fr)[0],
        bounds=(max(tone_hz - b, b / 4), tone_hz + b),
        method="bounded",
        options={"xatol": b * 1e-10},
    )
    return float(res.x)


def tone_amplitude(pmap: PhaseMap, fbg: int, tone_hz: float) -> float:
    """Peak-to-peak amplitude of the least-squares sinusoid at ``tone_hz`` on one row."""
    return _tone_fit(pmap, fbg, tone_hz)[0]


def peak_frequency(pmap: PhaseMap, fbg: int) -> float:
    f, p = psd(pmap, fbg)
    return float(f[1 + int(np.argmax(p[1:]))])


@dataclass(frozen=True)
class LinearityReport:
    slope: float
    intercept: float
    r_squared: float
    range_db: float
    span: tuple[float, float]
    amplitudes: np.ndarray
    drive_vpp: np.ndarray


def _fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, r2, resid


def dynamic_range(
    maps: Sequence[PhaseMap], drive_vpp: Sequence[float], fbg: int, tone_hz: float
) -> LinearityReport:
    """Log-log linearity of recovered peak-to-peak phase against drive amplitude.

    Finds the longest contiguous run of drive levels whose straight-line fit
    leaves every residual below 0.5 dB and reports that fit.  The range is
    ``10 log10(Vmax / Vmin)`` over the run.
    """
    v = np.asarray(drive_vpp, dtype=np.float64)
    if len(maps) != v.size:
        raise InvalidArgumentError("one phase map per drive amplitude is required")
    if v.size < 5:
        raise InvalidArgumentError(f"dynamic range needs at least 5 amplitude points, got {v.size}")
    if np.any(v <= 0):
        raise InvalidArgumentError("drive amplitudes must be positive")
    if np.ptp(v) == 0:
        raise InvalidArgumentError("degenerate sweep: all drive amplitudes are equal")
    order = np.argsort(v)
    v = v[order]
    amp = np.array([tone_amplitude(maps[i], fbg, tone_hz) for i in order])
    if np.any(amp <= 0):
        raise InvalidArgumentError("a recovered amplitude is zero; cannot fit in log-log")
    x = np.log10(v)
    y = np.log10(amp)
    best = None
    n = v.size
    for length in range(n, 1, -1):
        for i in range(n - length, -1, -1):
            j = i + length
            if x[j - 1] == x[i]:
                continue
            slope, icpt, r2, resid = _fit(x[i:j], y[i:j])
            if np.all(np.abs(20.0 * resid) < LINEARITY_TOLERANCE_DB):
                best = (i, j, slope, icpt, r2)
                break
        if best:
            break
    if best is None:
        raise InvalidArgumentError("no two consecutive points are consistent with a linear response")
    i, j, slope, icpt, r2 = best
    return LinearityReport(
        float(slope),
        float(icpt),
        float(r2),
        10.0 * math.log10(v[j - 1] / v[i]),
        (float(v[i]), float(v[j - 1])),
        amp,
        v,
    )


def spectral_response(
    pmap: PhaseMap, fbg: int, reference, smooth_bins: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Ratio (dB) of the recovered row's PSD to that of the ideal phase ``reference``.

    ``reference`` holds the stimulus phase expected on the row, sampled at
    the map timestamps.
    """
    ref = np.asarray(reference, dtype=np.float64)
    if ref.shape != (pmap.n_frames,):
        raise InvalidArgumentError("reference must have one sample per frame")
    f, p = psd(pmap, fbg, smooth_bins)
    _, q = psd(PhaseMap.from_array(ref, pmap.frame_period), 0, smooth_bins)
    with np.errstate(divide="ignore", invalid="ignore"):
        resp = 10.0 * np.log10(p / q)
    return f, resp


def flatness_db(f: np.ndarray, response_db: np.ndarray, band: tuple[float, float]) -> float:
    """Largest deviation (dB) from the median response inside ``band``."""
    sel = (f >= band[0]) & (f <= band[1])
    if not sel.any():
        raise InvalidArgumentError(f"no frequency bins inside {band}")
    r = response_db[sel]
    if not np.all(np.isfinite(r)):
        raise InvalidArgumentError("response is undefined somewhere in the band")
    return float(np.max(np.abs(r - np.median(r))))
