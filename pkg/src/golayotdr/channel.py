"""FBG sensor-array channel: Jones taps, piezo stimuli, lead fiber, laser and receiver noise.

Indexing conventions used throughout the package:

* FBGs are numbered ``0 .. n_fbg-1`` from the interrogator outwards.
* Segment ``s`` is the fiber span just before FBG ``s`` (segment 0 joins the
  lead fiber to the first grating).  A stimulus on segment ``s`` therefore
  shows up on FBG ``s`` and every grating behind it.
* Delays are integer symbol counts at the probe symbol rate.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from typing import IO

import numpy as np
from numpy.typing import NDArray
from scipy.constants import c as SPEED_OF_LIGHT

from . import kernels
from .errors import AlignmentError, ConfigurationError, InvalidArgumentError
from .modulation import ProbeFrame

#: Group index giving exactly 0.1 us round trip per 10 m of fiber.
DEFAULT_GROUP_INDEX = SPEED_OF_LIGHT * 1e-7 / 20.0
#: Piezo stretch per volt and fiber stretch per radian of one-way phase.
NM_PER_VOLT = 25.0
NM_PER_RAD = 75.0
#: Receive power at which a lossless first tap of the reference reflectivity has unit amplitude.
REFERENCE_POWER_DBM = -27.0
REFERENCE_REFLECTIVITY = 1e-3
#: Lumped receiver noise density (per sqrt(Hz) of symbol rate) that puts the
#: static floor of an 82 us code near 10 mrad at the reference receive power.
CALIBRATED_NOISE_DENSITY = 0.01 * math.sqrt(2 * 81.92e-6)

# samples per synthesis chunk; fixed so noise draws do not depend on it
_CHUNK = 1 << 16
_IQC_MAGIC = b"IQC1"
_IQC_HEADER = struct.Struct("<4sdQQ")
_IQC_HEADER_SIZE = 64


def calibrated_noise_sigma(f_s: float) -> float:
    """Per-sample receiver noise sigma for the calibrated density at symbol rate ``f_s``."""
    return CALIBRATED_NOISE_DENSITY * math.sqrt(f_s)


def random_unitary(rng: np.random.Generator) -> NDArray[np.complex128]:
    """Draw a 2x2 matrix from the Haar measure on U(2)."""
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def is_unitary(m, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.all(np.isfinite(m)) and np.allclose(m.conj().T @ m, np.eye(2), rtol=0, atol=tol))


def delayed_phase_noise_std(linewidth: float, delay_s: float) -> float:
    """Standard deviation of the self-homodyne phase difference ``phi0(t - delay) - phi0(t)``."""
    return math.sqrt(2.0 * math.pi * linewidth * delay_s)


@dataclass(frozen=True)
class StimulusWaveform:
    """Drive voltage applied to a piezo stretcher.

    ``sine`` uses ``f_start`` only. ``chirp`` sweeps linearly from ``f_start``
    to ``f_end`` over ``duration``. Outside ``[0, duration]`` the voltage is 0.
    """

    kind: str = "none"
    amplitude_vpp: float = 0.0
    f_start: float = 0.0
    f_end: float | None = None
    duration: float = math.inf

    def __post_init__(self) -> None:
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        if kind not in ("sine", "chirp", "none"):
            raise InvalidArgumentError(f"stimulus kind must be sine, chirp or none, got {self.kind!r}")
        if not self.amplitude_vpp >= 0:
            raise InvalidArgumentError(f"stimulus amplitude must be >= 0 Vpp, got {self.amplitude_vpp}")
        if not self.duration > 0:
            raise InvalidArgumentError(f"stimulus duration must be positive, got {self.duration}")
        if kind == "none":
            return
        if not self.f_start > 0:
            raise InvalidArgumentError(f"stimulus frequency must be positive, got {self.f_start}")
        if kind == "chirp":
            if self.f_end is None or not self.f_end > 0:
                raise InvalidArgumentError("a chirp needs a positive f_end")
            if not math.isfinite(self.duration):
                raise InvalidArgumentError("a chirp needs a finite duration")

    @property
    def max_frequency(self) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "chirp":
            return max(self.f_start, self.f_end)
        return self.f_start

    def voltage(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "none" or self.amplitude_vpp == 0:
            return np.zeros_like(t)
        if self.kind == "sine":
            arg = self.f_start * t
        else:
            rate = (self.f_end - self.f_start) / self.duration
            arg = self.f_start * t + 0.5 * rate * t * t
        v = 0.5 * self.amplitude_vpp * np.sin(2.0 * math.pi * arg)
        return np.where((t >= 0) & (t <= self.duration), v, 0.0)


def stimulus_phase(waveform: StimulusWaveform, t) -> np.ndarray:
    """One-way optical phase (rad) produced by the piezo at time ``t``."""
    return waveform.voltage(t) * (NM_PER_VOLT / NM_PER_RAD)


@dataclass(frozen=True)
class Stimulus:
    segment: int
    waveform: StimulusWaveform


@dataclass(frozen=True)
class SensorArrayConfig:
    """Geometry and optics of the grating chain.

    ``segment_jones`` and ``segment_phases`` default to identity matrices
    and zero static phase.  ``alignment_multiple`` is the number of symbols
    the inter-grating round trip must be a multiple of (4 for PDM-QPSK).
    """

    n_fbg: int = 10
    d_s: float = 10.0
    reflectivity: float = 1e-3
    group_index: float = DEFAULT_GROUP_INDEX
    lead_fiber_length: float = 0.0
    fiber_loss_db_km: float = 0.2
    segment_jones: tuple | None = None
    segment_phases: tuple | None = None
    stimuli: tuple = ()
    alignment_multiple: int = 4

    def __post_init__(self) -> None:
        if int(self.n_fbg) != self.n_fbg or self.n_fbg < 0:
            raise ConfigurationError(f"n_fbg must be a nonnegative integer, got {self.n_fbg}")
        object.__setattr__(self, "n_fbg", int(self.n_fbg))
        for name in ("d_s", "reflectivity", "group_index"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.reflectivity <= 1:
            raise ConfigurationError(f"reflectivity is a power ratio <= 1, got {self.reflectivity}")
        if not (self.lead_fiber_length >= 0 and self.fiber_loss_db_km >= 0):
            raise ConfigurationError("lead fiber length and loss must be nonnegative")
        if int(self.alignment_multiple) != self.alignment_multiple or self.alignment_multiple < 1:
            raise ConfigurationError("alignment_multiple must be a positive integer")
        if self.segment_jones is not None:
            mats = tuple(np.array(m, dtype=np.complex128) for m in self.segment_jones)
            if len(mats) != self.n_fbg or any(m.shape != (2, 2) for m in mats):
                raise ConfigurationError("segment_jones needs one 2x2 matrix per FBG")
            for m in mats:
                m.flags.writeable = False
            object.__setattr__(self, "segment_jones", mats)
        if self.segment_phases is not None:
            ph = tuple(float(p) for p in self.segment_phases)
            if len(ph) != self.n_fbg:
                raise ConfigurationError("segment_phases needs one value per FBG")
            object.__setattr__(self, "segment_phases", ph)
        stims = []
        for s in self.stimuli:
            if not isinstance(s, Stimulus):
                s = Stimulus(*s)
            if int(s.segment) != s.segment or not 0 <= s.segment < self.n_fbg:
                raise ConfigurationError(
                    f"stimulus segment {s.segment} out of range for {self.n_fbg} FBGs"
                )
            stims.append(Stimulus(int(s.segment), s.waveform))
        object.__setattr__(self, "stimuli", tuple(stims))

    @classmethod
    def randomized(cls, seed: int, **kwargs) -> "SensorArrayConfig":
        """Haar-random segment matrices and uniform static phases drawn from ``seed``."""
        n = kwargs.get("n_fbg", cls.n_fbg)
        rng = np.random.default_rng(seed)
        jones = tuple(random_unitary(rng) for _ in range(n))
        phases = tuple(rng.uniform(0.0, 2.0 * math.pi, n))
        return cls(segment_jones=jones, segment_phases=phases, **kwargs)

    def with_changes(self, **kwargs) -> "SensorArrayConfig":
        return replace(self, **kwargs)

    @property
    def fiber_speed(self) -> float:
        return SPEED_OF_LIGHT / self.group_index

    @property
    def tau_s(self) -> float:
        """Round-trip delay between consecutive gratings (s)."""
        return 2.0 * self.d_s / self.fiber_speed

    @property
    def lead_delay(self) -> float:
        """Round-trip delay of the lead fiber (s)."""
        return 2.0 * self.lead_fiber_length / self.fiber_speed

    @property
    def rate_granularity(self) -> float:
        """Symbol rates must be integer multiples of this (Hz)."""
        return self.alignment_multiple / self.tau_s

    def tap_loss(self) -> np.ndarray:
        """Round-trip amplitude factor to each grating."""
        dist_km = (self.lead_fiber_length + self.d_s * np.arange(1, self.n_fbg + 1)) / 1e3
        return 10.0 ** (-self.fiber_loss_db_km * 2.0 * dist_km / 20.0)


@dataclass(frozen=True)
class LaserConfig:
    linewidth: float = 600.0
    wavelength: float = 1549.1e-9
    noise_sigma: float = 0.0
    signal_power_dbm: float = REFERENCE_POWER_DBM

    def __post_init__(self) -> None:
        if not self.linewidth >= 0:
            raise ConfigurationError(f"linewidth must be >= 0 Hz, got {self.linewidth}")
        if not self.noise_sigma >= 0:
            raise ConfigurationError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if not self.wavelength > 0:
            raise ConfigurationError(f"wavelength must be positive, got {self.wavelength}")

    def coherence_length(self, group_index: float = DEFAULT_GROUP_INDEX) -> float:
        if self.linewidth == 0:
            return math.inf
        return SPEED_OF_LIGHT / group_index / (math.pi * self.linewidth)

    @property
    def amplitude_gain(self) -> float:
        """Field scale applied to the array response."""
        return 10.0 ** ((self.signal_power_dbm - REFERENCE_POWER_DBM) / 20.0) / math.sqrt(
            REFERENCE_REFLECTIVITY
        )


@dataclass(frozen=True)
class IQCapture:
    """Received field, one complex sample per symbol on each polarization."""

    e_rx: NDArray[np.complex128]
    e_ry: NDArray[np.complex128]
    f_s: float
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("e_rx", "e_ry"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            object.__setattr__(self, name, arr)
        if self.e_rx.shape != self.e_ry.shape or self.e_rx.ndim != 1:
            raise InvalidArgumentError("e_rx and e_ry must be 1-D and of equal length")

    def __len__(self) -> int:
        return int(self.e_rx.size)

    @property
    def duration(self) -> float:
        return len(self) / self.f_s


def check_alignment(cfg: SensorArrayConfig, f_s: float) -> int:
    """Return the inter-grating spacing in symbols, or raise if ``f_s`` is off-grid."""
    if not f_s > 0:
        raise InvalidArgumentError(f"symbol rate must be positive, got {f_s}")
    gran = cfg.rate_granularity
    ratio = f_s / gran
    m = round(ratio)
    if m >= 1 and abs(ratio - m) <= 1e-9 * max(1.0, ratio):
        return int(m) * cfg.alignment_multiple
    below = math.floor(ratio) * gran
    above = math.ceil(ratio) * gran
    near = [r for r in (below, above) if r > 0]
    raise AlignmentError(
        f"symbol rate must be a multiple of {_fmt_hz(gran)} for d_s = {cfg.d_s:g} m "
        f"(got {_fmt_hz(f_s)}); nearest valid rates: {', '.join(_fmt_hz(r) for r in near)}",
        gran,
        tuple(near),
    )


def _fmt_hz(v: float) -> str:
    for unit, scale in (("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3)):
        if abs(v) >= scale:
            return f"{v / scale:.6g} {unit}"
    return f"{v:.6g} Hz"


def tap_delays(cfg: SensorArrayConfig, f_s: float) -> np.ndarray:
    """Symbol delay of every grating's first-order reflection."""
    k = check_alignment(cfg, f_s)
    lead = int(round(cfg.lead_delay * f_s))
    return lead + k * np.arange(1, cfg.n_fbg + 1, dtype=np.int64)


def _static_taps(cfg: SensorArrayConfig) -> np.ndarray:
    """Tap matrices without stimulus, shape ``(n_fbg, 2, 2)``."""
    taps = np.empty((cfg.n_fbg, 2, 2), dtype=np.complex128)
    loss = cfg.tap_loss()
    m = np.eye(2, dtype=np.complex128)
    phase = 0.0
    for k in range(cfg.n_fbg):
        if cfg.segment_jones is not None:
            m = cfg.segment_jones[k] @ m
        if cfg.segment_phases is not None:
            phase += 2.0 * cfg.segment_phases[k]
        taps[k] = math.sqrt(cfg.reflectivity) * loss[k] * (m.T @ m) * np.exp(1j * phase)
    return taps


def _stimulus_mask(cfg: SensorArrayConfig) -> np.ndarray:
    """``mask[k, j]`` is the dual-pass multiplier of stimulus ``j`` on tap ``k``."""
    mask = np.zeros((cfg.n_fbg, len(cfg.stimuli)))
    for j, s in enumerate(cfg.stimuli):
        mask[s.segment :, j] = 2.0
    return mask


def build_impulse_response(cfg: SensorArrayConfig, f_s: float, t: float = 0.0) -> list:
    """List of ``(delay_symbols, 2x2 tap)`` at time ``t`` (s); excludes the receive gain."""
    delays = tap_delays(cfg, f_s)
    taps = _static_taps(cfg)
    mask = _stimulus_mask(cfg)
    if cfg.stimuli:
        beta = np.array([float(stimulus_phase(s.waveform, t)) for s in cfg.stimuli])
        taps = taps * np.exp(1j * (mask @ beta))[:, None, None]
    return [(int(d), taps[k]) for k, d in enumerate(delays)]


def propagate(
    frame: ProbeFrame,
    cfg: SensorArrayConfig,
    laser: LaserConfig,
    duration: float,
    seed: int,
) -> IQCapture:
    """Synthesize the received field for a periodically repeated probe.

    Each tap sees the probe delayed by its round trip, the self-homodyne
    laser phase difference over that delay, and the stimulus phase at the
    sample instant.  Circular Gaussian noise is added per polarization.
    """
    delays = tap_delays(cfg, frame.f_s)
    n = int(round(duration * frame.f_s))
    if n < frame.n:
        raise InvalidArgumentError(
            f"duration {duration} s is shorter than one frame period ({frame.t_code} s)"
        )
    laser_ss, noise_ss = np.random.SeedSequence(int(seed)).spawn(2)
    dmax = int(delays.max()) if delays.size else 0

    # laser[i] holds phi0 at sample time i - dmax
    step = math.sqrt(2.0 * math.pi * laser.linewidth / frame.f_s)
    if step > 0:
        laser_phase = np.cumsum(np.random.default_rng(laser_ss).normal(0.0, step, n + dmax))
    else:
        laser_phase = np.zeros(n + dmax)

    taps = np.ascontiguousarray((laser.amplitude_gain * _static_taps(cfg)).reshape(-1, 4))
    mask = np.ascontiguousarray(_stimulus_mask(cfg))
    ex = np.ascontiguousarray(frame.e_tx)
    ey = np.ascontiguousarray(frame.e_ty)
    noise_rng = np.random.default_rng(noise_ss)
    scale = laser.noise_sigma / math.sqrt(2.0)
    e_rx = np.zeros(n, dtype=np.complex128)
    e_ry = np.zeros(n, dtype=np.complex128)
    for t0 in range(0, n, _CHUNK):
        c = min(_CHUNK, n - t0)
        t = np.arange(t0, t0 + c) / frame.f_s
        stim = np.ascontiguousarray(
            np.array([stimulus_phase(s.waveform, t) for s in cfg.stimuli]).reshape(-1, c)
        )
        kernels.synthesize(
            ex, ey, delays, taps, mask, stim, laser_phase, dmax, t0, e_rx[t0 : t0 + c], e_ry[t0 : t0 + c]
        )
        if scale > 0:
            w = noise_rng.standard_normal((4, c))
            e_rx[t0 : t0 + c] += scale * (w[0] + 1j * w[1])
            e_ry[t0 : t0 + c] += scale * (w[2] + 1j * w[3])
    return IQCapture(e_rx, e_ry, frame.f_s, int(seed))


def write_capture(capture: IQCapture, fh: IO[bytes]) -> None:
    """IQC1 binary: 64-byte header then little-endian float64 quadruples per sample."""
    header = _IQC_HEADER.pack(_IQC_MAGIC, float(capture.f_s), len(capture), int(capture.seed))
    fh.write(header.ljust(_IQC_HEADER_SIZE, b"\0"))
    body = np.empty((len(capture), 4), dtype="<f8")
    body[:, 0] = capture.e_rx.real
    body[:, 1] = capture.e_rx.imag
    body[:, 2] = capture.e_ry.real
    body[:, 3] = capture.e_ry.imag
    fh.write(body.tobytes())


def read_capture(fh: IO[bytes]) -> IQCapture:
    head = fh.read(_IQC_HEADER_SIZE)
    if len(head) != _IQC_HEADER_SIZE:
        raise InvalidArgumentError("truncated IQC1 header")
    magic, f_s, count, seed = _IQC_HEADER.unpack(head[: _IQC_HEADER.size])
    if magic != _IQC_MAGIC:
        raise InvalidArgumentError(f"not an IQC1 stream (magic {magic!r})")
    raw = fh.read(count * 32)
    if len(raw) != count * 32:
        raise InvalidArgumentError(f"IQC1 stream holds fewer than the {count} declared samples")
    body = np.frombuffer(raw, dtype="<f8").reshape(count, 4)
    return IQCapture(body[:, 0] + 1j * body[:, 1], body[:, 2] + 1j * body[:, 3], f_s, seed)


def write_capture_csv(capture: IQCapture, fh: IO[str]) -> None:
    fh.write("index,e_rx_re,e_rx_im,e_ry_re,e_ry_im\n")
    for i, (x, y) in enumerate(zip(capture.e_rx, capture.e_ry)):
        fh.write(f"{i},{float(x.real)!r},{float(x.imag)!r},{float(y.real)!r},{float(y.imag)!r}\n")
