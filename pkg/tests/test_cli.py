"""Tests for the ``vip-sim`` command line."""

import json
import logging

import pytest

from vip_sim import __version__
from vip_sim.analysis.spectrum import SpectrumLabel, build_spectrum
from vip_sim.main import main
from vip_sim.storage.formats import write_spectrum_csv

SMALL_CONFIG = """\
seed = 3

[run]
duration_on = 145.1
duration_off = 145.1

[signal]
geometric_factor = 0.01008
"""


@pytest.fixture(autouse=True)
def restore_logging():
    """main() reconfigures the root logger; undo it after each test."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(SMALL_CONFIG)
    return path


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def spectrum_file(path, label, bin_width=0.010, truncate=False):
    spectrum = build_spectrum([7.7, 7.8, 3.0], 2.004, bin_width, 1000, 145.1, label)
    text = write_spectrum_csv(spectrum)
    if truncate:
        text = "\n".join(text.splitlines()[:-3]) + "\n"
    path.write_text(text)
    return path


class TestCommands:
    def test_pipeline(self, config_file, out, capsys):
        assert main(["pipeline", "--config", str(config_file), "--out", str(out)]) == 0

        for name in ("spectrum_on.csv", "spectrum_off.csv", "roi_report.toml", "limit_report.toml"):
            assert (out / name).is_file()
        assert "beta^2/2 <=" in capsys.readouterr().out
        assert json.loads((out / "provenance.json").read_text())["seed"] == 3

    def test_simulate_then_analyze_then_limit(self, config_file, out, capsys):
        args = ["--config", str(config_file), "--out", str(out)]
        assert main(["simulate", *args]) == 0
        spectra = ["--on", str(out / "spectrum_on.csv"), "--off", str(out / "spectrum_off.csv")]
        assert main(["analyze", *args, *spectra]) == 0
        assert main(["limit", *args, "--report", str(out / "roi_report.toml"), "--n-sigma", "2"]) == 0
        assert "95.4% CL" in capsys.readouterr().out
        assert main(["project", *args, "--report", str(out / "limit_report.toml"), "--preset", "lngs-1y-bkg10"]) == 0
        assert (out / "projection_report.toml").is_file()

    def test_seed_override(self, config_file, out):
        assert main(["simulate", "--config", str(config_file), "--out", str(out), "--seed", "11"]) == 0
        assert json.loads((out / "provenance.json").read_text())["seed"] == 11

    def test_frames(self, config_file, out, capsys):
        config_file.write_text(SMALL_CONFIG + "\n[ccd]\ncorpus_frames = 2\nframe_width = 32\nframe_height = 32\n")
        assert main(["frames", "--config", str(config_file), "--out", str(out)]) == 0
        assert len(list((out / "frames").iterdir())) == 2
        assert "track rejection" in capsys.readouterr().out

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["--version"])
        assert exc_info.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestOutputDirectory:
    def test_environment_override(self, config_file, tmp_path, monkeypatch):
        monkeypatch.setenv("VIP_OUTPUT_DIR", str(tmp_path / "from-env"))
        assert main(["simulate", "--config", str(config_file)]) == 0
        assert (tmp_path / "from-env" / "spectrum_on.csv").is_file()

    def test_flag_beats_environment(self, config_file, out, tmp_path, monkeypatch):
        monkeypatch.setenv("VIP_OUTPUT_DIR", str(tmp_path / "from-env"))
        assert main(["simulate", "--config", str(config_file), "--out", str(out)]) == 0
        assert (out / "spectrum_on.csv").is_file()
        assert not (tmp_path / "from-env").exists()

    def test_unwritable_output(self, config_file, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        assert main(["simulate", "--config", str(config_file), "--out", str(blocker / "out")]) == 3

    def test_metrics_file(self, config_file, out, tmp_path, monkeypatch):
        metrics = tmp_path / "vip.prom"
        monkeypatch.setenv("VIP_METRICS_FILE", str(metrics))
        assert main(["simulate", "--config", str(config_file), "--out", str(out)]) == 0
        assert "vip_events_generated_total" in metrics.read_text()


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "absent.toml")]) == 10

    def test_config_syntax(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("seed = \n")
        assert main(["simulate", "--config", str(path)]) == 11

    def test_config_validation(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("seed = 1\n[run]\ncurrent = -4.0\n")
        assert main(["simulate", "--config", str(path)]) == 12

    def test_missing_input(self, config_file, out, tmp_path):
        args = ["analyze", "--config", str(config_file), "--out", str(out)]
        assert main([*args, "--on", str(tmp_path / "nope.csv"), "--off", str(tmp_path / "nope.csv")]) == 3

    def test_truncated_spectrum(self, config_file, out, tmp_path):
        on = spectrum_file(tmp_path / "on.csv", SpectrumLabel.CURRENT_ON, truncate=True)
        off = spectrum_file(tmp_path / "off.csv", SpectrumLabel.CURRENT_OFF)
        args = ["analyze", "--config", str(config_file), "--out", str(out)]
        assert main([*args, "--on", str(on), "--off", str(off)]) == 5

    def test_binning_mismatch(self, config_file, out, tmp_path):
        on = spectrum_file(tmp_path / "on.csv", SpectrumLabel.CURRENT_ON)
        off = spectrum_file(tmp_path / "off.csv", SpectrumLabel.CURRENT_OFF, bin_width=0.011)
        args = ["analyze", "--config", str(config_file), "--out", str(out)]
        assert main([*args, "--on", str(on), "--off", str(off)]) == 6

    def test_missing_geometric_factor(self, tmp_path, out):
        config = tmp_path / "nogf.toml"
        config.write_text("seed = 1\n")
        report = tmp_path / "roi_report.toml"
        report.write_text("[roi]\ndelta_counts = -21.0\ndelta_error = 73.0\n")
        assert main(["limit", "--config", str(config), "--report", str(report), "--out", str(out)]) == 7

    def test_domain_error(self, config_file, out, tmp_path):
        report = tmp_path / "limit_report.toml"
        report.write_text("[limit]\nbeta2_over_2_limit = 4.5e-28\n")
        args = ["project", "--config", str(config_file), "--out", str(out), "--report", str(report)]
        assert main([*args, "--background-scale", "0"]) == 4

    def test_missing_command(self):
        with pytest.raises(SystemExit) as exc_info:
            main([])
        assert exc_info.value.code == 2
