"""Time the compiled and numpy kernel backends on realistic workloads.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends get identical inputs; outputs are checked against each other
before timing is reported.
"""
import argparse
import time

import numpy as np

from golayotdr import kernels
from golayotdr.channel import SensorArrayConfig, _static_taps, _stimulus_mask, tap_delays
from golayotdr.codes import generate_golay_set
from golayotdr.modulation import build_pdm_qpsk_frame


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def synth_case(n_samples):
    frame = build_pdm_qpsk_frame(generate_golay_set(4096), f_s=160e6)
    cfg = SensorArrayConfig.randomized(seed=1)
    delays = tap_delays(cfg, frame.f_s)
    taps = np.ascontiguousarray(_static_taps(cfg).reshape(-1, 4))
    mask = np.ascontiguousarray(_stimulus_mask(cfg))
    stim = np.zeros((0, n_samples))
    dmax = int(delays.max())
    laser = np.cumsum(np.random.default_rng(0).normal(0, 1e-3, n_samples + dmax))

    def run(mod):
        rx = np.zeros(n_samples, complex)
        ry = np.zeros(n_samples, complex)
        mod.synthesize(frame.e_tx, frame.e_ty, delays, taps, mask, stim, laser, dmax, 0, rx, ry)
        return rx, ry

    return run


def corr_case(n_g, n_frames, n_lags):
    frame = build_pdm_qpsk_frame(generate_golay_set(n_g), f_s=160e6)
    rng = np.random.default_rng(2)
    r = rng.standard_normal(frame.n * n_frames) + 1j * rng.standard_normal(frame.n * n_frames)
    lags = np.arange(n_lags, dtype=np.int64) * 4 + 40

    def run(mod):
        return mod.correlate_at_lags(r, frame.e_tx, lags)

    return run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    cases = [
        ("synthesize 10 taps, 1M samples", synth_case(1 << 20)),
        ("correlate N_G=4096, 64 frames, 10 lags", corr_case(4096, 64, 10)),
        ("correlate N_G=256, 4096 frames, 10 lags", corr_case(256, 4096, 10)),
        ("correlate N_G=16384, 16 frames, 10 lags", corr_case(16384, 16, 10)),
    ]
    names = list(backends)
    print(f"{'case':44s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, run in cases:
        timings, outs = [], []
        for name in names:
            t, out = _best(lambda: run(backends[name]), args.repeat)
            timings.append(t)
            outs.append(out if isinstance(out, tuple) else (out,))
        for other in outs[1:]:
            for a, b in zip(outs[0], other):
                scale = max(1.0, float(np.max(np.abs(a))))
                assert np.max(np.abs(a - b)) <= 1e-9 * scale, f"backends disagree on {label}"
        row = f"{label:44s}" + "".join(f"{t * 1e3:10.1f}ms" for t in timings)
        if len(timings) > 1:
            row += f"{timings[0] / timings[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
