import filecmp
import os
import textwrap

import numpy as np
import pytest

from golayotdr.cli import main, run_experiment, sweep_rows
from golayotdr.config import ConfigError, parse_config
from golayotdr.modulation import Scheme

BASE = textwrap.dedent(
    """\
    [probe]
    scheme = PDM_QPSK
    n_g = 256
    f_s_hz = 160e6

    [array]
    n_fbg = 4

    [laser]
    linewidth_hz = 600
    noise_sigma = 0.05

    [stimulus.tone]
    segment = 2
    amplitude_vpp = 3
    f_start_hz = 2000

    [run]
    duration_s = 0.002
    seed = 5
    """
)


def _write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.scheme is Scheme.PDM_QPSK and cfg.n_g == 4096 and cfg.f_s == 160e6
        assert cfg.array.n_fbg == 10 and cfg.array.d_s == 10.0 and cfg.array.reflectivity == 1e-3
        assert cfg.laser.linewidth == 600.0 and cfg.laser.signal_power_dbm == -27.0

    def test_parse_base(self):
        cfg = parse_config(BASE)
        assert cfg.n_g == 256 and cfg.array.n_fbg == 4
        (stim,) = cfg.array.stimuli
        assert stim.segment == 2 and stim.waveform.f_start == 2000.0
        assert cfg.stimulus_names == ("tone",)

    def test_calibrated_noise(self):
        cfg = parse_config("[laser]\nnoise_sigma = calibrated\n")
        assert cfg.laser.noise_sigma > 0 and cfg.noise == "calibrated"

    def test_resolved_echo_round_trips(self):
        cfg = parse_config(BASE)
        again = parse_config(cfg.to_ini())
        assert again.to_ini() == cfg.to_ini()
        assert "group_index = " in cfg.to_ini() and "sweep_seed = fixed" in cfg.to_ini()

    def test_misaligned_rate(self):
        text = BASE.replace("f_s_hz = 160e6", "f_s_hz = 150e6")
        with pytest.raises(ConfigError, match="symbol rate must be a multiple of 40 MHz") as exc:
            parse_config(text, "x.ini")
        assert exc.value.line == 4
        assert "120 MHz" in str(exc.value) and "160 MHz" in str(exc.value)

    @pytest.mark.parametrize(
        "old, new, line, fragment",
        [
            ("segment = 2", "segment = 4", 14, "out of range"),
            ("n_g = 256", "n_g = 100", 3, "power of two"),
            ("n_fbg = 4", "n_fbg = four", 7, "not a number"),
            ("duration_s = 0.002", "duration_s = 1e-6", 19, "two frame periods"),
            ("seed = 5", "colour = red", 20, "unknown key"),
            ("[run]", "[runn]", 18, "unknown section"),
        ],
    )
    def test_line_numbered_diagnostics(self, old, new, line, fragment):
        with pytest.raises(ConfigError, match=fragment) as exc:
            parse_config(BASE.replace(old, new), "exp.ini")
        assert exc.value.line == line
        assert str(exc.value).startswith(f"exp.ini:{line}: ")

    def test_syntax_error_has_line(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("[probe]\nn_g = 4\nthis line is junk\n", "bad.ini")
        assert exc.value.line == 3


class TestRun:
    def test_default_array_structure(self, tmp_path, capsys):
        path = _write(tmp_path, "[run]\nduration_s = 0.0005\n")
        assert main(["run", path, "-o", str(tmp_path / "out")]) == 0
        line = capsys.readouterr().out.strip()
        assert line.startswith("mean_std_rad=") and "f_max_hz=19531.25" in line and "frames=19" in line
        header = (tmp_path / "out" / "phase_map.csv").read_text().splitlines()[0]
        assert header == "timestamp," + ",".join(f"fbg_{k}" for k in range(10))

    def test_noiseless_static_std(self, tmp_path, capsys):
        path = _write(tmp_path, "[laser]\nlinewidth_hz = 0\nnoise_sigma = 0\n[run]\nduration_s = 0.0003\n")
        assert main(["run", path, "-o", str(tmp_path / "o")]) == 0
        mean = float(capsys.readouterr().out.split()[0].split("=")[1])
        assert mean < 1e-10

    def test_outputs_and_echo(self, tmp_path):
        text = BASE + "\n[outputs]\ncapture = true\ncapture_csv = true\n"
        path = _write(tmp_path, text)
        out = tmp_path / "o"
        assert main(["run", path, "-o", str(out)]) == 0
        names = sorted(os.listdir(out))
        assert names == [
            "capture.csv",
            "capture.iqc",
            "config.resolved.ini",
            "phase_map.csv",
            "phase_map_differential.csv",
            "psd.csv",
            "report.txt",
        ]
        echo = (out / "config.resolved.ini").read_text()
        assert "reflectivity = 0.001" in echo and "[stimulus.tone]" in echo
        report = (out / "report.txt").read_text()
        assert "stimulus_tone_tone_pp_rad" in report

    def test_byte_identical_reruns(self, tmp_path):
        path = _write(tmp_path, BASE)
        assert main(["run", path, "-o", str(tmp_path / "a")]) == 0
        assert main(["run", path, "-o", str(tmp_path / "b")]) == 0
        cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
        for name in cmp.common_files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        path = _write(tmp_path, BASE.replace("f_s_hz = 160e6", "f_s_hz = 150e6"))
        assert main(["run", path]) == 2
        err = capsys.readouterr().err
        assert "exp.ini:4:" in err and "multiple of 40 MHz" in err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.ini")]) == 2
        assert "cannot read config" in capsys.readouterr().err


class TestSweep:
    def test_single_value_matches_run(self):
        cfg = parse_config(BASE)
        (row,) = sweep_rows(cfg, "signal_power_dbm", [-27.0])
        res = run_experiment(cfg)
        assert row["mean_std_rad"] == res.report.mean_std
        assert row["frames"] == res.phase_map.n_frames

    def test_unknown_param(self, tmp_path, capsys):
        path = _write(tmp_path, BASE)
        assert main(["sweep", path, "--param", "colour", "--values", "1"]) == 2
        err = capsys.readouterr().err
        assert "supported: code_length, signal_power_dbm, lead_fiber_length" in err

    def test_sweep_csv(self, tmp_path, capsys):
        path = _write(tmp_path, BASE)
        out = tmp_path / "s"
        assert main(["sweep", path, "--param", "stimulus_amplitude", "--values", "1,2,4", "-o", str(out)]) == 0
        text = (out / "sweep_stimulus_amplitude.csv").read_text()
        assert text == capsys.readouterr().out
        rows = text.splitlines()
        assert rows[0].startswith("stimulus_amplitude,t_code_s,frames,mean_std_rad")
        pp = [float(r.split(",")[-1]) for r in rows[1:]]
        np.testing.assert_allclose(np.array(pp) / [1, 2, 4], 2 / 3, rtol=0.02)
        assert (out / "config.resolved.ini").exists()

    def test_code_length_sweep_values(self):
        cfg = parse_config(BASE)
        rows = sweep_rows(cfg, "code_length", [64, 1024])
        assert [r["t_code_s"] for r in rows] == [pytest.approx(0.4e-6), pytest.approx(6.4e-6)]
        with pytest.raises(Exception, match="powers of two"):
            sweep_rows(cfg, "code_length", [100])

    def test_seed_policy(self):
        cfg = parse_config(BASE)
        fixed = sweep_rows(cfg, "lead_fiber_length", [0.0, 0.0])
        inc = sweep_rows(cfg, "lead_fiber_length", [0.0, 0.0], "increment")
        assert fixed[0]["mean_std_rad"] == fixed[1]["mean_std_rad"]
        assert inc[0]["mean_std_rad"] != inc[1]["mean_std_rad"]


def test_verify_codes(tmp_path, capsys):
    out = tmp_path / "codes.txt"
    assert main(["verify-codes", "--ng", "16", "-o", str(out)]) == 0
    assert "complementary_1=True" in capsys.readouterr().out
    assert out.read_text().startswith("g_a1 16")
    with pytest.raises(SystemExit):
        main(["verify-codes"])
