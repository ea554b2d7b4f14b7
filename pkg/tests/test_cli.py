import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from blastnull.cli import main
from blastnull.config import load_scenario, scenario_from_dict
from blastnull.exceptions import ParameterError

REPO = Path(__file__).resolve().parents[1]


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "blastnull.cli", *args],
        capture_output=True,
        text=True,
    )
    return proc.returncode, proc.stdout, proc.stderr


SCENARIO_TEXT = """
schema_version = 1

[waveform]
duration = 0.04
center_frequency = 2000.0
bandwidth = 200.0
sample_rate = 10000.0

[model]
fft_size = 512

[channel]
preset = "geometric"
n_paths = 2
delay_spread = 0.008
scattered_lag = 0.013

[levels]
snr_db = [-5.0]
sdr_db = [-12.0]

[detection]
pfa = [1e-2]

[run]
trials = 200
seed = 11
"""


@pytest.fixture()
def scenario_file(tmp_path):
    path = tmp_path / "mini.toml"
    path.write_text(SCENARIO_TEXT)
    return path


class TestThresholdCommand:
    def test_analytic_chi2_threshold(self, capsys):
        code = main(["threshold", "--dist", "chi2", "--dof", "2", "--delta", "0", "--pfa", "1e-2"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("9.2103")

    def test_dncf_threshold_positive(self, capsys):
        code = main(
            [
                "threshold", "--dist", "dncf", "--num-dof", "6", "--den-dof", "2042",
                "--delta", "0", "--lam", "0", "--pfa", "1e-2",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert float(out) > 1.0

    def test_missing_dof_is_config_error(self, capsys):
        code = main(["threshold", "--dist", "chi2", "--pfa", "1e-2"])
        assert code == 2

    def test_bad_pfa_is_config_error(self):
        assert main(["threshold", "--dist", "chi2", "--dof", "2", "--pfa", "2.0"]) == 2


class TestTailCommand:
    def test_chi2_tail_value(self, capsys):
        code = main(["tail", "--dist", "chi2", "--dof", "2", "--delta", "0", "--x", "9.21034"])
        out = capsys.readouterr().out
        assert code == 0
        assert abs(float(out) - math.exp(-9.21034 / 2)) < 1e-12

    def test_strict_escalates_precision_warning(self):
        args = [
            "--strict", "tail", "--dist", "dncf", "--num-dof", "6", "--den-dof", "30",
            "--delta", "0", "--lam", "6e7", "--x", "1.0",
        ]
        assert main(args) == 3
        assert main(args[1:]) == 0  # same call without --strict succeeds


class TestRunCommand:
    def test_run_writes_csv(self, scenario_file, tmp_path, capsys):
        out_path = tmp_path / "rows.csv"
        code = main(["run", str(scenario_file), "--out", str(out_path)])
        assert code == 0
        lines = out_path.read_text().strip().split("\n")
        assert lines[0].startswith("schema_version,")
        assert len(lines) == 3  # header + one point x two detectors

    def test_byte_identical_reruns(self, scenario_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["run", str(scenario_file), "--trials", "150", "--seed", "3", "--out", str(a)]) == 0
        assert main(["run", str(scenario_file), "--trials", "150", "--seed", "3", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_json_format(self, scenario_file, capsys):
        code = main(["run", str(scenario_file), "--format", "json", "--trials", "100"])
        out = capsys.readouterr().out
        assert code == 0
        payload = json.loads(out)
        assert payload["schema_version"] == 1

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(SCENARIO_TEXT.replace("trials = 200", "trails = 200"))
        assert main(["run", str(path)]) == 2

    def test_missing_file_rejected(self, tmp_path, capsys):
        code = main(["run", str(tmp_path / "nope.toml")])
        assert code == 2


class TestEstimateCommand:
    def test_recovers_two_paths(self, tmp_path, capsys):
        from blastnull.signalmodel import generate_lfm

        fs = 10000.0
        wave = generate_lfm(0.04, 2000.0, 200.0, fs)
        delayed = np.zeros(512, dtype=complex)
        n = len(wave.samples)
        delayed[10 : 10 + n] += 1.0 * wave.samples
        delayed[60 : 60 + n] += 0.5 * wave.samples
        sample_file = tmp_path / "samples.npy"
        np.save(sample_file, delayed)

        code = main(
            [
                "estimate", "--input", str(sample_file), "--fs", "10000",
                "--fft-size", "512", "--paths", "2", "--duration", "0.04",
                "--center-frequency", "2000", "--bandwidth", "200",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        payload = json.loads(out)
        delays_samples = sorted(d * fs for d in payload["delays"])
        assert abs(delays_samples[0] - 10) < 0.05
        assert abs(delays_samples[1] - 60) < 0.05

    def test_two_column_text_input(self, tmp_path, capsys):
        from blastnull.signalmodel import generate_lfm

        wave = generate_lfm(0.04, 2000.0, 200.0, 10000.0)
        delayed = np.zeros(512, dtype=complex)
        delayed[25 : 25 + len(wave.samples)] = 0.9 * wave.samples
        text_file = tmp_path / "samples.txt"
        np.savetxt(text_file, np.column_stack([delayed.real, delayed.imag]))
        code = main(
            [
                "estimate", "--input", str(text_file), "--fs", "10000",
                "--fft-size", "512", "--paths", "1", "--duration", "0.04",
                "--center-frequency", "2000", "--bandwidth", "200",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        payload = json.loads(out)
        assert abs(payload["delays"][0] * 10000.0 - 25) < 0.05

    def test_too_many_samples_rejected(self, tmp_path):
        sample_file = tmp_path / "long.npy"
        np.save(sample_file, np.ones(600, dtype=complex))
        code = main(
            [
                "estimate", "--input", str(sample_file), "--fs", "10000",
                "--fft-size", "512", "--paths", "1", "--duration", "0.04",
                "--center-frequency", "2000", "--bandwidth", "200",
            ]
        )
        assert code == 2


class TestSelftestCommand:
    def test_selftest_passes(self):
        code, out, _ = run_cli("selftest")
        assert code == 0
        assert "failed" in out
        assert "0 failed" in out


class TestScenarioLoader:
    def test_loads_shipped_scenarios(self):
        for name in ("desk.toml", "fullscale.toml"):
            sc = load_scenario(REPO / "scenarios" / name)
            assert sc.trials >= 1

    def test_unknown_section_rejected(self):
        with pytest.raises(ParameterError, match="unknown"):
            scenario_from_dict({"wavform": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ParameterError, match="unknown key"):
            scenario_from_dict({"waveform": {"duration": 1.0, "durration": 2.0}})

    def test_missing_section_rejected(self):
        with pytest.raises(ParameterError, match="missing"):
            scenario_from_dict({"waveform": {"duration": 1.0}})

    def test_explicit_pathsets(self, tmp_path):
        text = SCENARIO_TEXT.replace(
            'preset = "geometric"\nn_paths = 2\ndelay_spread = 0.008\nscattered_lag = 0.013',
            "direct_amplitudes = [[1.0, 0.0]]\ndirect_delays = [0.0]\n"
            "scattered_amplitudes = [[0.5, 0.0]]\nscattered_delays = [0.01]",
        )
        path = tmp_path / "explicit.toml"
        path.write_text(text)
        sc = load_scenario(path)
        assert sc.direct is not None
        assert len(sc.direct) == 1
        assert sc.scattered.delays[0] == 0.01
