"""Tests for process settings and run-configuration loading."""

from pathlib import Path

import pytest

from vip_sim.config import RunConfig, Settings, parse_config
from vip_sim.errors import ConfigFileNotFoundError, ConfigSyntaxError, ConfigValidationError
from vip_sim.models import EnergyScaling

PAPER_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "paper.cfg"


def write(tmp_path: Path, name: str, text: str) -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


class TestSettings:
    """Tests for Settings class."""

    def test_default_settings(self):
        settings = Settings()

        assert settings.log_level == "INFO"
        assert settings.log_format == "console"
        assert settings.output_dir is None
        assert settings.workers == 1
        assert settings.metrics_file is None

    def test_settings_from_env(self, monkeypatch):
        monkeypatch.setenv("VIP_LOG_LEVEL", "debug")
        monkeypatch.setenv("VIP_WORKERS", "4")
        monkeypatch.setenv("VIP_OUTPUT_DIR", "/tmp/vip-out")
        monkeypatch.setenv("VIP_LOG_FORMAT", "json")

        settings = Settings()

        assert settings.log_level == "DEBUG"
        assert settings.workers == 4
        assert settings.output_dir == Path("/tmp/vip-out")
        assert settings.log_format == "json"

    def test_case_insensitive_env_vars(self, monkeypatch):
        monkeypatch.setenv("vip_workers", "3")
        assert Settings().workers == 3

    def test_invalid_workers(self, monkeypatch):
        monkeypatch.setenv("VIP_WORKERS", "0")
        with pytest.raises(ValueError):
            Settings()


class TestPaperConfig:
    def test_loads(self):
        config = parse_config(PAPER_CONFIG)

        assert config.seed == 20050101
        assert config.signal.geometric_factor == pytest.approx(0.01008)
        assert config.resolution.scaling is EnergyScaling.CONSTANT
        assert (config.roi.lo, config.roi.hi) == (7.564, 7.894)
        assert config.output.directory == Path("results")

    def test_integrated_charge(self):
        """40 A over 14 510 minutes is 34.824 MC."""
        summary = parse_config(PAPER_CONFIG).run.run_summary()
        assert summary.integrated_charge_q == pytest.approx(34.824e6)

    def test_frame_count(self):
        """1451 read-outs of 14 chips."""
        run = parse_config(PAPER_CONFIG).run
        assert run.frame_count(run.duration_on) == 20314

    def test_same_as_defaults(self):
        """Every value in the shipped file is also the schema default."""
        paper = parse_config(PAPER_CONFIG)
        defaults = RunConfig.model_validate({"seed": 20050101, "signal": {"geometric_factor": 0.01008}})
        assert paper.digest() == defaults.digest()


class TestParseConfig:
    def test_minimal_toml(self, tmp_path):
        config = parse_config(write(tmp_path, "run.toml", "seed = 1\n"))
        assert config.seed == 1
        assert config.binning.bin_count == 1000

    def test_yaml(self, tmp_path):
        text = "seed: 5\nsignal:\n  beta2_over_2: 1.0e-27\n  geometric_factor: 0.01\n"
        config = parse_config(write(tmp_path, "run.yaml", text))
        assert config.signal.beta2_over_2 == 1.0e-27

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileNotFoundError) as exc_info:
            parse_config(tmp_path / "absent.toml")
        assert exc_info.value.exit_code == 10

    def test_empty_file_needs_seed(self, tmp_path):
        with pytest.raises(ConfigValidationError) as exc_info:
            parse_config(write(tmp_path, "empty.toml", ""))
        assert exc_info.value.problems == [("seed", None, "required key missing")]

    def test_toml_syntax_error(self, tmp_path):
        with pytest.raises(ConfigSyntaxError) as exc_info:
            parse_config(write(tmp_path, "bad.toml", "seed = 1\n[run\ncurrent = 4\n"))
        assert exc_info.value.exit_code == 11
        assert exc_info.value.line == 2

    def test_yaml_syntax_error(self, tmp_path):
        with pytest.raises(ConfigSyntaxError) as exc_info:
            parse_config(write(tmp_path, "bad.yaml", "seed: 1\nrun: [unclosed\n"))
        assert exc_info.value.line is not None

    def test_duplicate_key_names_both_lines(self, tmp_path):
        text = "seed = 1\n[run]\ncurrent = 40.0\n\ncurrent = 20.0\n"
        with pytest.raises(ConfigSyntaxError) as exc_info:
            parse_config(write(tmp_path, "dup.toml", text))
        message = str(exc_info.value)
        assert "run.current" in message
        assert "line 3" in message and "line 5" in message

    def test_duplicate_yaml_key(self, tmp_path):
        with pytest.raises(ConfigSyntaxError, match="duplicate key 'seed'"):
            parse_config(write(tmp_path, "dup.yaml", "seed: 1\nseed: 2\n"))

    def test_unknown_key_has_line(self, tmp_path):
        text = "seed = 1\n[run]\ncurrent = 40.0\ncurent = 20.0\n"
        with pytest.raises(ConfigValidationError) as exc_info:
            parse_config(write(tmp_path, "typo.toml", text))
        assert exc_info.value.exit_code == 12
        assert ("run.curent", 4, "unknown key") in exc_info.value.problems

    def test_out_of_range_value(self, tmp_path):
        text = "seed = 1\n[signal]\ngeometric_factor = 1.5\n"
        with pytest.raises(ConfigValidationError) as exc_info:
            parse_config(write(tmp_path, "range.toml", text))
        [(key, line, _)] = exc_info.value.problems
        assert (key, line) == ("signal.geometric_factor", 3)

    def test_roi_outside_binning(self, tmp_path):
        text = "seed = 1\n[roi]\nlo = 12.5\nhi = 13.0\n"
        with pytest.raises(ConfigValidationError, match="outside the binned range"):
            parse_config(write(tmp_path, "roi.toml", text))

    def test_thresholds_ordered(self, tmp_path):
        text = "seed = 1\n[ccd]\nseed_threshold_sigma = 3.0\nneighbor_threshold_sigma = 4.0\n"
        with pytest.raises(ConfigValidationError):
            parse_config(write(tmp_path, "ccd.toml", text))


class TestOverrides:
    def test_seed_and_output(self, tmp_path):
        config = parse_config(write(tmp_path, "run.toml", "seed = 1\n"))
        updated = config.with_overrides(seed=99, output_dir=tmp_path / "out")
        assert updated.seed == 99
        assert updated.output.directory == tmp_path / "out"
        assert config.seed == 1

    def test_invalid_seed(self):
        with pytest.raises(ConfigValidationError):
            RunConfig(seed=1).with_overrides(seed=-5)

    def test_digest_ignores_output_directory(self, tmp_path):
        config = RunConfig(seed=1)
        assert config.with_overrides(output_dir=tmp_path).digest() == config.digest()
        assert config.with_overrides(seed=2).digest() != config.digest()
