"""Experiment configuration files.

INI syntax with one section per block.  Physical quantities carry their unit
in the key name.  Any number of ``[stimulus.<name>]`` sections may be given;
segment indices are 0-based (segment ``s`` lies just before FBG ``s``).

    [probe]
    scheme = PDM_QPSK
    n_g = 4096
    n_sep = 0
    f_s_hz = 160e6

    [array]
    n_fbg = 10
    d_s_m = 10
    reflectivity = 1e-3
    lead_fiber_length_m = 0
    fiber_loss_db_per_km = 0.2
    segments = random
    seed = 1

    [laser]
    linewidth_hz = 600
    noise_sigma = calibrated
    signal_power_dbm = -27

    [stimulus.tone]
    segment = 2
    kind = sine
    amplitude_vpp = 10
    f_start_hz = 500

    [run]
    duration_s = 0.02
    seed = 1

    [outputs]
    directory = out
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace

from .channel import (
    DEFAULT_GROUP_INDEX,
    LaserConfig,
    SensorArrayConfig,
    Stimulus,
    StimulusWaveform,
    check_alignment,
    calibrated_noise_sigma,
)
from .errors import ConfigurationError, GolayOTDRError
from .modulation import Scheme

SEED_POLICIES = ("fixed", "increment")

# section -> key -> default (None means required or optional without default)
SCHEMA = {
    "probe": {"scheme": "PDM_QPSK", "n_g": "4096", "n_sep": "0", "f_s_hz": "160e6"},
    "array": {
        "n_fbg": "10",
        "d_s_m": "10",
        "reflectivity": "1e-3",
        "group_index": repr(DEFAULT_GROUP_INDEX),
        "lead_fiber_length_m": "0",
        "fiber_loss_db_per_km": "0.2",
        "segments": "random",
        "seed": "1",
        "alignment_multiple": "4",
    },
    "laser": {
        "linewidth_hz": "600",
        "wavelength_m": "1.5491e-06",
        "noise_sigma": "0",
        "signal_power_dbm": "-27",
    },
    "run": {
        "duration_s": "0.02",
        "seed": "1",
        "reference_index": "0",
        "average": "1",
        "window_s": "",
        "sweep_seed": "fixed",
    },
    "outputs": {"directory": "out", "capture": "false", "capture_csv": "false", "psd": "true"},
}
STIMULUS_KEYS = {
    "segment": None,
    "kind": "sine",
    "amplitude_vpp": "0",
    "f_start_hz": "0",
    "f_end_hz": "",
    "duration_s": "inf",
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


class ConfigError(GolayOTDRError, ValueError):
    """Invalid configuration, located at a file line when possible."""

    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Outputs:
    directory: str = "out"
    capture: bool = False
    capture_csv: bool = False
    psd: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: Scheme = Scheme.PDM_QPSK
    n_g: int = 4096
    n_sep: int = 0
    f_s: float = 160e6
    array: SensorArrayConfig = field(default_factory=SensorArrayConfig)
    segments: str = "random"
    array_seed: int = 1
    laser: LaserConfig = field(default_factory=LaserConfig)
    noise: str = "0"
    duration: float = 0.02
    seed: int = 1
    reference_index: int = 0
    average: int = 1
    window: float | None = None
    sweep_seed: str = "fixed"
    outputs: Outputs = field(default_factory=Outputs)
    stimulus_names: tuple = ()

    @property
    def frame_period(self) -> float:
        n = self.n_g if self.scheme is Scheme.PDM_QPSK else 2 * (self.n_g + self.n_sep)
        return n / self.f_s

    def with_changes(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)

    def to_ini(self) -> str:
        """Resolved configuration, every defaulted field written out."""
        a = self.array
        lines = [
            "[probe]",
            f"scheme = {self.scheme.value}",
            f"n_g = {self.n_g}",
            f"n_sep = {self.n_sep}",
            f"f_s_hz = {self.f_s!r}",
            "",
            "[array]",
            f"n_fbg = {a.n_fbg}",
            f"d_s_m = {a.d_s!r}",
            f"reflectivity = {a.reflectivity!r}",
            f"group_index = {a.group_index!r}",
            f"lead_fiber_length_m = {a.lead_fiber_length!r}",
            f"fiber_loss_db_per_km = {a.fiber_loss_db_km!r}",
            f"segments = {self.segments}",
            f"seed = {self.array_seed}",
            f"alignment_multiple = {a.alignment_multiple}",
            "",
            "[laser]",
            f"linewidth_hz = {self.laser.linewidth!r}",
            f"wavelength_m = {self.laser.wavelength!r}",
            f"noise_sigma = {self.noise}",
            f"# resolved per-sample sigma: {self.laser.noise_sigma!r}",
            f"signal_power_dbm = {self.laser.signal_power_dbm!r}",
            "",
        ]
        for name, s in zip(self.stimulus_names, a.stimuli):
            w = s.waveform
            lines += [
                f"[stimulus.{name}]",
                f"segment = {s.segment}",
                f"kind = {w.kind}",
                f"amplitude_vpp = {w.amplitude_vpp!r}",
                f"f_start_hz = {w.f_start!r}",
                f"f_end_hz = {'' if w.f_end is None else repr(w.f_end)}",
                f"duration_s = {w.duration!r}",
                "",
            ]
        lines += [
            "[run]",
            f"duration_s = {self.duration!r}",
            f"seed = {self.seed}",
            f"reference_index = {self.reference_index}",
            f"average = {self.average}",
            f"window_s = {'' if self.window is None else repr(self.window)}",
            f"sweep_seed = {self.sweep_seed}",
            "",
            "[outputs]",
            f"directory = {self.outputs.directory}",
            f"capture = {str(self.outputs.capture).lower()}",
            f"capture_csv = {str(self.outputs.capture_csv).lower()}",
            f"psd = {str(self.outputs.psd).lower()}",
            "",
        ]
        return "\n".join(lines)


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    where = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


class _Reader:
    def __init__(self, parser, lines, source):
        self.p = parser
        self.lines = lines
        self.source = source

    def err(self, msg, section, key=None):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        return ConfigError(msg, self.source, line)

    def raw(self, section, key, default):
        if self.p.has_option(section, key):
            return self.p.get(section, key).strip()
        if default is None:
            raise self.err(f"missing required key '{key}' in [{section}]", section)
        return default

    def num(self, section, key, default, kind=float):
        raw = self.raw(section, key, default)
        try:
            v = float(raw)
        except ValueError:
            raise self.err(f"{key} = {raw!r} is not a number", section, key) from None
        if kind is int:
            if not math.isfinite(v) or v != int(v):
                raise self.err(f"{key} = {raw!r} must be an integer", section, key)
            return int(v)
        return v

    def flag(self, section, key, default):
        raw = self.raw(section, key, default).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise self.err(f"{key} = {raw!r} must be true or false", section, key)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    lines = _key_lines(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        msg = str(exc).splitlines()[0]
        raise ConfigError(msg, source, line) from None
    r = _Reader(parser, lines, source)

    stim_sections = []
    for sec in parser.sections():
        if sec.startswith("stimulus."):
            stim_sections.append(sec)
            allowed = STIMULUS_KEYS
        elif sec in SCHEMA:
            allowed = SCHEMA[sec]
        else:
            raise r.err(
                f"unknown section [{sec}]; expected {', '.join(SCHEMA)} or stimulus.<name>", sec
            )
        for key in parser.options(sec):
            if key not in allowed:
                raise r.err(f"unknown key '{key}' in [{sec}]", sec, key)

    try:
        scheme = Scheme.parse(r.raw("probe", "scheme", SCHEMA["probe"]["scheme"]))
    except GolayOTDRError as exc:
        raise r.err(str(exc), "probe", "scheme") from None
    n_g = r.num("probe", "n_g", SCHEMA["probe"]["n_g"], int)
    if n_g < 4 or n_g & (n_g - 1):
        raise r.err(f"n_g = {n_g} must be a power of two >= 4", "probe", "n_g")
    n_sep = r.num("probe", "n_sep", SCHEMA["probe"]["n_sep"], int)
    if n_sep < 0 or (scheme is Scheme.PDM_QPSK and n_sep):
        raise r.err("n_sep must be >= 0, and 0 for PDM-QPSK", "probe", "n_sep")
    f_s = r.num("probe", "f_s_hz", SCHEMA["probe"]["f_s_hz"])

    A = SCHEMA["array"]
    n_fbg = r.num("array", "n_fbg", A["n_fbg"], int)
    segments = r.raw("array", "segments", A["segments"]).lower()
    if segments not in ("random", "identity"):
        raise r.err(f"segments = {segments!r} must be random or identity", "array", "segments")
    array_seed = r.num("array", "seed", A["seed"], int)

    stimuli = []
    names = []
    for sec in stim_sections:
        seg = r.num(sec, "segment", STIMULUS_KEYS["segment"], int)
        if not 0 <= seg < n_fbg:
            raise r.err(f"segment {seg} out of range: the array has {n_fbg} FBGs (0-based)", sec, "segment")
        f_end_raw = r.raw(sec, "f_end_hz", "")
        try:
            w = StimulusWaveform(
                kind=r.raw(sec, "kind", STIMULUS_KEYS["kind"]),
                amplitude_vpp=r.num(sec, "amplitude_vpp", STIMULUS_KEYS["amplitude_vpp"]),
                f_start=r.num(sec, "f_start_hz", STIMULUS_KEYS["f_start_hz"]),
                f_end=r.num(sec, "f_end_hz", "") if f_end_raw else None,
                duration=r.num(sec, "duration_s", STIMULUS_KEYS["duration_s"]),
            )
        except GolayOTDRError as exc:
            raise r.err(str(exc), sec) from None
        stimuli.append(Stimulus(seg, w))
        names.append(sec.split(".", 1)[1])

    try:
        kw = dict(
            n_fbg=n_fbg,
            d_s=r.num("array", "d_s_m", A["d_s_m"]),
            reflectivity=r.num("array", "reflectivity", A["reflectivity"]),
            group_index=r.num("array", "group_index", A["group_index"]),
            lead_fiber_length=r.num("array", "lead_fiber_length_m", A["lead_fiber_length_m"]),
            fiber_loss_db_km=r.num("array", "fiber_loss_db_per_km", A["fiber_loss_db_per_km"]),
            stimuli=tuple(stimuli),
            alignment_multiple=r.num("array", "alignment_multiple", A["alignment_multiple"], int),
        )
        array = SensorArrayConfig.randomized(array_seed, **kw) if segments == "random" else SensorArrayConfig(**kw)
    except ConfigError:
        raise
    except GolayOTDRError as exc:
        raise r.err(str(exc), "array") from None
    try:
        check_alignment(array, f_s)
    except GolayOTDRError as exc:
        raise r.err(str(exc), "probe", "f_s_hz") from None

    L = SCHEMA["laser"]
    noise = r.raw("laser", "noise_sigma", L["noise_sigma"]).lower()
    if noise == "calibrated":
        sigma = calibrated_noise_sigma(f_s)
    else:
        sigma = r.num("laser", "noise_sigma", L["noise_sigma"])
        noise = repr(sigma)
    try:
        laser = LaserConfig(
            linewidth=r.num("laser", "linewidth_hz", L["linewidth_hz"]),
            wavelength=r.num("laser", "wavelength_m", L["wavelength_m"]),
            noise_sigma=sigma,
            signal_power_dbm=r.num("laser", "signal_power_dbm", L["signal_power_dbm"]),
        )
    except GolayOTDRError as exc:
        raise r.err(str(exc), "laser") from None

    R = SCHEMA["run"]
    window_raw = r.raw("run", "window_s", R["window_s"])
    window = r.num("run", "window_s", R["window_s"]) if window_raw else None
    sweep_seed = r.raw("run", "sweep_seed", R["sweep_seed"]).lower()
    if sweep_seed not in SEED_POLICIES:
        raise r.err(f"sweep_seed must be one of {', '.join(SEED_POLICIES)}", "run", "sweep_seed")
    O = SCHEMA["outputs"]
    outputs = Outputs(
        directory=r.raw("outputs", "directory", O["directory"]),
        capture=r.flag("outputs", "capture", O["capture"]),
        capture_csv=r.flag("outputs", "capture_csv", O["capture_csv"]),
        psd=r.flag("outputs", "psd", O["psd"]),
    )
    cfg = ExperimentConfig(
        scheme=scheme,
        n_g=n_g,
        n_sep=n_sep,
        f_s=f_s,
        array=array,
        segments=segments,
        array_seed=array_seed,
        laser=laser,
        noise=noise,
        duration=r.num("run", "duration_s", R["duration_s"]),
        seed=r.num("run", "seed", R["seed"], int),
        reference_index=r.num("run", "reference_index", R["reference_index"], int),
        average=r.num("run", "average", R["average"], int),
        window=window,
        sweep_seed=sweep_seed,
        outputs=outputs,
        stimulus_names=tuple(names),
    )
    if cfg.duration < 2 * cfg.frame_period:
        raise r.err(
            f"duration_s = {cfg.duration!r} is shorter than two frame periods ({2 * cfg.frame_period!r} s)",
            "run",
            "duration_s",
        )
    if not 0 <= cfg.reference_index < max(n_fbg, 1):
        raise r.err("reference_index must name one of the FBGs", "run", "reference_index")
    if cfg.average < 1:
        raise r.err("average must be >= 1", "run", "average")
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))
