"""Command-line experiment runner: ``run``, ``sweep`` and ``verify-codes``."""
from __future__ import annotations

import argparse
import io
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import analysis
from .channel import IQCapture, propagate, tap_delays, write_capture, write_capture_csv
from .codes import format_sequences, generate_golay_set, verify_golay_set
from .config import ConfigError, ExperimentConfig, load_config
from .errors import GolayOTDRError, ToneNotFoundError
from .modulation import ProbeFrame, build_frame
from .receiver import PhaseMap, build_phase_map, estimate_jones_array, write_phase_map_csv

SWEEP_PARAMS = (
    "code_length",
    "signal_power_dbm",
    "lead_fiber_length",
    "stimulus_amplitude",
    "stimulus_frequency",
)


@dataclass
class RunResult:
    config: ExperimentConfig
    frame: ProbeFrame
    delays: np.ndarray
    capture: IQCapture
    phase_map: PhaseMap
    report: analysis.MetricReport


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    frame = build_frame(generate_golay_set(cfg.n_g), cfg.scheme, cfg.f_s, cfg.n_sep)
    delays = tap_delays(cfg.array, cfg.f_s)
    capture = propagate(frame, cfg.array, cfg.laser, cfg.duration, cfg.seed)
    taps, times = estimate_jones_array(capture, frame, delays, cfg.average)
    pmap = build_phase_map(taps, cfg.reference_index, timestamps=times)
    return RunResult(cfg, frame, delays, capture, pmap, _report(cfg, pmap))


def _report(cfg: ExperimentConfig, pmap: PhaseMap) -> analysis.MetricReport:
    rep = analysis.phase_std(pmap, cfg.window)
    rep.extra.update(
        {
            "t_code_s": float(pmap.frame_period),
            "duration_s": float(pmap.duration),
            "near_limit_increments": pmap.near_limit_count,
            "ambiguity_increments": pmap.ambiguity_count,
        }
    )
    for name, s in zip(cfg.stimulus_names, cfg.array.stimuli):
        w = s.waveform
        if w.kind != "sine" or w.amplitude_vpp == 0 or w.f_start >= pmap.f_max:
            continue
        key = f"stimulus_{name}"
        rep.extra[f"{key}_tone_pp_rad"] = analysis.tone_amplitude(pmap, s.segment, w.f_start)
        if pmap.n_frames < analysis.MIN_PSD_FRAMES:
            continue
        try:
            rep.extra[f"{key}_sensitivity_rad_per_rthz"] = analysis.sensitivity(pmap, s.segment, w.f_start)
            if pmap.n_fbg > 2:
                xt = analysis.crosstalk_rejection(pmap, s.segment, w.f_start)
                rep.extra[f"{key}_crosstalk_db"] = xt
                rep.crosstalk_db = xt if rep.crosstalk_db is None else max(rep.crosstalk_db, xt)
        except ToneNotFoundError:
            rep.extra[f"{key}_tone_found"] = "false"
    return rep


def _write_outputs(res: RunResult, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)

    def text(name, content):
        with open(os.path.join(directory, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)

    cfg = res.config
    text("config.resolved.ini", cfg.to_ini())
    buf = io.StringIO()
    write_phase_map_csv(res.phase_map, buf)
    text("phase_map.csv", buf.getvalue())
    buf = io.StringIO()
    write_phase_map_csv(res.phase_map.differential(), buf)
    text("phase_map_differential.csv", buf.getvalue())
    text("report.txt", res.report.to_text())
    if cfg.outputs.psd and res.phase_map.n_frames >= analysis.MIN_PSD_FRAMES:
        cols = {}
        for k in range(res.phase_map.n_fbg):
            f, p = analysis.psd(res.phase_map, k)
            cols.setdefault("frequency_hz", f)
            cols[f"fbg_{k}"] = p
        buf = io.StringIO()
        analysis.write_series_csv(buf, cols)
        text("psd.csv", buf.getvalue())
    if cfg.outputs.capture:
        with open(os.path.join(directory, "capture.iqc"), "wb") as fh:
            write_capture(res.capture, fh)
    if cfg.outputs.capture_csv:
        buf = io.StringIO()
        write_capture_csv(res.capture, buf)
        text("capture.csv", buf.getvalue())


def _summary(res: RunResult) -> str:
    pm = res.phase_map
    return (
        f"mean_std_rad={res.report.mean_std!r} f_max_hz={pm.f_max!r} "
        f"frames={pm.n_frames} unwrap_flags={pm.unwrap_failures}"
    )


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = args.output or cfg.outputs.directory
    res = run_experiment(cfg)
    _write_outputs(res, out)
    print(_summary(res))
    return 0


def _apply(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    arr = cfg.array
    if param == "code_length":
        n = int(value)
        if n != value or n < 4 or n & (n - 1):
            raise GolayOTDRError(f"code_length values are N_G in symbols (powers of two >= 4), got {value!r}")
        return cfg.with_changes(n_g=n)
    if param == "signal_power_dbm":
        return cfg.with_changes(laser=replace(cfg.laser, signal_power_dbm=float(value)))
    if param == "lead_fiber_length":
        return cfg.with_changes(array=replace(arr, lead_fiber_length=float(value)))
    if not arr.stimuli:
        raise GolayOTDRError(f"sweeping {param} needs at least one [stimulus.*] section")
    if param == "stimulus_amplitude":
        stims = tuple(replace(s, waveform=replace(s.waveform, amplitude_vpp=float(value))) for s in arr.stimuli)
    else:
        stims = tuple(replace(s, waveform=replace(s.waveform, f_start=float(value))) for s in arr.stimuli)
    return cfg.with_changes(array=replace(arr, stimuli=stims))


def _parse_values(raw: str) -> list[float]:
    out = []
    for tok in raw.replace(",", " ").split():
        try:
            out.append(float(tok))
        except ValueError:
            raise GolayOTDRError(f"sweep value {tok!r} is not a number") from None
    if not out:
        raise GolayOTDRError("no sweep values given")
    return out


def sweep_rows(cfg: ExperimentConfig, param: str, values, seed_policy: str | None = None) -> list[dict]:
    if param not in SWEEP_PARAMS:
        raise GolayOTDRError(f"unknown sweep parameter {param!r}; supported: {', '.join(SWEEP_PARAMS)}")
    policy = seed_policy or cfg.sweep_seed
    rows = []
    for i, v in enumerate(values):
        point = _apply(cfg, param, v)
        if policy == "increment":
            point = point.with_changes(seed=cfg.seed + i)
        if point.duration < 2 * point.frame_period:
            point = point.with_changes(duration=2 * point.frame_period)
        res = run_experiment(point)
        row = {
            "value": float(v),
            "t_code_s": float(res.frame.t_code),
            "frames": res.phase_map.n_frames,
            "mean_std_rad": res.report.mean_std,
            "near_limit_increments": res.phase_map.near_limit_count,
            "ambiguity_increments": res.phase_map.ambiguity_count,
        }
        for k, val in sorted(res.report.extra.items()):
            if k.endswith("_tone_pp_rad"):
                row[k] = val
        rows.append(row)
    return rows


def format_rows(rows: list[dict], param: str) -> str:
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    out = [",".join([param if k == "value" else k for k in keys])]
    for r in rows:
        cells = []
        for k in keys:
            v = r.get(k, "")
            cells.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = _parse_values(args.values)
    rows = sweep_rows(cfg, args.param, values, args.seed_policy)
    text = format_rows(rows, args.param)
    out = args.output or cfg.outputs.directory
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.resolved.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.to_ini())
    with open(os.path.join(out, f"sweep_{args.param}.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_verify_codes(args) -> int:
    gs = generate_golay_set(args.ng)
    v = verify_golay_set(gs)
    print(f"n_g={gs.n_g} complementary_1={v.complementary_1} complementary_2={v.complementary_2} "
          f"mutual_a={v.mutual_a} mutual_b={v.mutual_b} max_sidelobe={v.max_sidelobe}")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_sequences(gs))
    return 0 if v.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="golayotdr", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate one configuration and write its outputs")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides [outputs] directory)")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="run one configuration per parameter value")
    s.add_argument("config")
    s.add_argument("--param", required=True, help=", ".join(SWEEP_PARAMS))
    s.add_argument("--values", required=True, help="comma or space separated list")
    s.add_argument("--seed-policy", choices=("fixed", "increment"), default=None)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sweep)
    v = sub.add_parser("verify-codes", help="generate and check a Golay set")
    v.add_argument("--ng", type=int, required=True)
    v.add_argument("-o", "--output", help="write the sequences to this file")
    v.set_defaults(func=cmd_verify_codes)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GolayOTDRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
