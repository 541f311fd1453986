"""Process settings and run configuration.

Two layers:

1. :class:`Settings` (environment, prefix ``VIP_``) controls how the process
   runs: log level and format, worker count, metrics textfile and the
   output directory override.
2. :class:`RunConfig` (a TOML or YAML file) describes what is simulated
   and analysed. It is validated in full by :func:`parse_config`; errors
   carry the line numbers of the offending keys.

Precedence for the output directory (highest to lowest):
1. ``--out`` on the command line
2. ``VIP_OUTPUT_DIR``
3. ``[output] directory`` in the config file
4. Default ``results``
"""

import hashlib
import json
import logging
import re
from pathlib import Path
from typing import Any, Literal, Optional

import tomli
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from vip_sim.core.rng import MAX_SEED
from vip_sim.errors import ConfigFileNotFoundError, ConfigSyntaxError, ConfigValidationError
from vip_sim.models import (
    ConductorSpec,
    DetectorGeometry,
    EnergyCalibration,
    RegionOfInterest,
    ResolutionModel,
    RunSummary,
)
from vip_sim.physics import DEFAULT_CCD_EFFICIENCY, PEP_VIOLATING_KALPHA, PRIOR_LIMIT_BETA2_OVER_2

logger = logging.getLogger(__name__)

TOML_SUFFIXES = (".toml", ".cfg")
YAML_SUFFIXES = (".yaml", ".yml")


class Settings(BaseSettings):
    """Process-level settings, read from ``VIP_*`` environment variables."""

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO",
        description="Logging level",
    )
    log_format: Literal["console", "json"] = Field(
        default="console",
        description="Key/value console lines or JSON lines",
    )
    output_dir: Optional[Path] = Field(
        default=None,
        description="Overrides [output] directory of the run config (the only run-config override)",
    )
    workers: int = Field(
        default=1,
        ge=1,
        description="Worker processes for transport and frame synthesis",
    )
    metrics_file: Optional[Path] = Field(
        default=None,
        description="Write Prometheus counters to this textfile after each command",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate and normalize log level."""
        if isinstance(v, str):
            v = v.upper()
        return v

    model_config = SettingsConfigDict(
        env_prefix="VIP_",
        case_sensitive=False,
        extra="ignore",
    )


def load_settings() -> Settings:
    return Settings()


# Run configuration


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RunPlan(_Section):
    """Current and durations of the paired current-on/current-off runs."""

    current: float = Field(default=40.0, ge=0, description="Amperes")
    duration_on: float = Field(default=14510.0, gt=0, description="Minutes with current")
    duration_off: float = Field(default=14510.0, gt=0, description="Minutes without current")
    readout_cadence: float = Field(default=10.0, gt=0, description="Minutes between read-outs")
    ccd_live_count: int = Field(default=14, ge=1, le=16)
    segments: Optional[list[tuple[float, float]]] = Field(
        default=None,
        description="(current_A, minutes) pieces of the current-on run; replaces current/duration_on",
    )

    @field_validator("segments")
    @classmethod
    def _segments_valid(cls, v: Optional[list[tuple[float, float]]]) -> Optional[list[tuple[float, float]]]:
        if v is not None:
            if not v:
                raise ValueError("segments must not be empty")
            if any(current < 0 or minutes <= 0 for current, minutes in v):
                raise ValueError("segment currents must be >= 0 and durations > 0")
        return v

    def run_summary(self) -> RunSummary:
        if self.segments:
            return RunSummary.from_segments(self.segments, self.readout_cadence, self.ccd_live_count)
        return RunSummary.from_constant_current(
            self.current, self.duration_on, self.readout_cadence, self.ccd_live_count
        )

    def live_time_on(self) -> float:
        return sum(minutes for _, minutes in self.segments) if self.segments else self.duration_on

    def frame_count(self, duration: float) -> int:
        """CCD frames (read-outs x live chips) in ``duration`` minutes."""
        return int(round(duration / self.readout_cadence)) * self.ccd_live_count


class BackgroundConfig(_Section):
    """Background model shared by both runs.

    The flat default is normalized so the ROI holds about 2730 counts per
    14 510-minute run with 14 CCDs.
    """

    rate_per_kev_per_frame: float = Field(default=0.4072, ge=0)
    shape: Literal["flat", "table"] = "flat"
    table: Optional[Path] = Field(default=None, description="CSV energy_keV,relative_rate when shape = 'table'")
    kalpha_counts: float = Field(default=0.0, ge=0, description="Mean Cu K-alpha fluorescence counts per run")
    kbeta_counts: float = Field(default=0.0, ge=0, description="Mean Cu K-beta fluorescence counts per run")

    @model_validator(mode="after")
    def _table_given(self) -> "BackgroundConfig":
        if self.shape == "table" and self.table is None:
            raise ValueError("shape = 'table' needs a table path")
        return self


class SignalConfig(_Section):
    beta2_over_2: float = Field(default=0.0, ge=0, le=1, description="Injected violation probability")
    geometric_factor: Optional[float] = Field(default=None, gt=0, lt=1)
    line_energy: float = Field(default=PEP_VIOLATING_KALPHA.energy, gt=0, description="keV")


class BinningConfig(_Section):
    bin_lo: float = Field(default=2.004, description="keV")
    bin_width: float = Field(default=0.010, gt=0, description="keV")
    bin_count: int = Field(default=1000, ge=1)

    @property
    def bin_hi(self) -> float:
        return self.bin_lo + self.bin_count * self.bin_width


class TransportConfig(_Section):
    energy: float = Field(default=PEP_VIOLATING_KALPHA.energy, gt=0, description="keV")
    ccd_efficiency: float = Field(default=DEFAULT_CCD_EFFICIENCY, gt=0, le=1)
    sample_count: int = Field(default=1_000_000, ge=1000)
    attenuation_table: Optional[Path] = None


class CcdConfig(_Section):
    reconstruct: bool = Field(default=False, description="Send simulated events through frames and clustering")
    noise_sigma_adc: float = Field(default=10.0, ge=0)
    track_rate: float = Field(default=3.0, ge=0, description="Mean tracks per frame")
    seed_threshold_sigma: float = Field(default=5.0, gt=0)
    neighbor_threshold_sigma: float = Field(default=3.0, gt=0)
    frame_width: int = Field(default=64, ge=4)
    frame_height: int = Field(default=64, ge=4)
    calibration: EnergyCalibration = Field(default_factory=EnergyCalibration)
    corpus_frames: int = Field(default=100, ge=0, description="Frames written by `vip-sim frames`")
    hits_per_frame: int = Field(default=4, ge=0)
    dump_format: Literal["binary", "csv", "none"] = "binary"

    @model_validator(mode="after")
    def _thresholds_ordered(self) -> "CcdConfig":
        if self.neighbor_threshold_sigma > self.seed_threshold_sigma:
            raise ValueError("neighbor_threshold_sigma cannot exceed seed_threshold_sigma")
        return self


class LimitConfig(_Section):
    n_sigma: float = Field(default=3.0, gt=0)
    prior_limit: float = Field(default=PRIOR_LIMIT_BETA2_OVER_2, gt=0)
    projection_background_scale: float = Field(default=0.01, gt=0)
    projection_live_time_scale: float = Field(default=36.5, gt=0)
    projection_current_scale: float = Field(default=1.0, gt=0)


class OutputConfig(_Section):
    directory: Path = Path("results")
    figures: bool = True


class RunConfig(_Section):
    """Everything one simulate/analyze/limit/project pass needs."""

    seed: int = Field(..., ge=0, le=MAX_SEED, description="Master seed of every random substream")
    geometry: DetectorGeometry = Field(default_factory=DetectorGeometry)
    conductor: ConductorSpec = Field(default_factory=ConductorSpec)
    run: RunPlan = Field(default_factory=RunPlan)
    background: BackgroundConfig = Field(default_factory=BackgroundConfig)
    signal: SignalConfig = Field(default_factory=SignalConfig)
    resolution: ResolutionModel = Field(default_factory=ResolutionModel)
    binning: BinningConfig = Field(default_factory=BinningConfig)
    roi: RegionOfInterest = Field(default_factory=RegionOfInterest)
    transport: TransportConfig = Field(default_factory=TransportConfig)
    ccd: CcdConfig = Field(default_factory=CcdConfig)
    limit: LimitConfig = Field(default_factory=LimitConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _roi_inside_binning(self) -> "RunConfig":
        if self.roi.lo < self.binning.bin_lo or self.roi.hi > self.binning.bin_hi:
            raise ValueError(
                f"roi [{self.roi.lo}, {self.roi.hi}] keV lies outside the binned range "
                f"[{self.binning.bin_lo}, {self.binning.bin_hi}] keV"
            )
        if self.run.ccd_live_count != self.geometry.live_panel_count:
            logger.debug(
                "run.ccd_live_count=%d differs from the %d live panels of the geometry",
                self.run.ccd_live_count,
                self.geometry.live_panel_count,
            )
        return self

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[Path] = None) -> "RunConfig":
        data = self.model_dump()
        if seed is not None:
            data["seed"] = seed
        if output_dir is not None:
            data["output"]["directory"] = output_dir
        try:
            return RunConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigValidationError(_problems(exc, {})) from None

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of everything except the output location."""
        payload = self.model_dump(mode="json", exclude={"output": {"directory"}})
        return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# Loading


def load_config_file(config_path: Path) -> tuple[dict[str, Any], dict[str, int]]:
    """Parse a TOML or YAML file into ``(data, key_lines)``.

    ``key_lines`` maps every dotted key present in the file to its
    1-based line number. Duplicate keys are a syntax error here even for
    YAML, where the parser would silently keep the last one.
    """
    try:
        text = config_path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigFileNotFoundError(f"Config file not found: {config_path}") from None
    except IsADirectoryError:
        raise ConfigFileNotFoundError(f"Config path is a directory: {config_path}") from None
    except UnicodeDecodeError as exc:
        raise ConfigSyntaxError(f"Config file is not UTF-8 text: {exc}") from None

    if config_path.suffix.lower() in YAML_SUFFIXES:
        data, key_lines = _load_yaml(text)
        logger.info(f"Loaded configuration from YAML: {config_path}")
    else:
        data, key_lines = _load_toml(text)
        logger.info(f"Loaded configuration from TOML: {config_path}")
    return data, key_lines


_TOML_TABLE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-\s\"']+?)\s*\]\s*(#.*)?$")
_TOML_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+(?:\s*\.\s*[A-Za-z0-9_\-]+)*|\"[^\"]*\"|'[^']*')\s*=")


def _dotted(raw: str) -> str:
    return ".".join(part.strip().strip("\"'") for part in raw.split("."))


def _scan_toml_keys(text: str) -> dict[str, int]:
    """Line numbers of TOML tables and keys, raising on repeats.

    Only keys at bracket depth zero outside multi-line strings are
    considered, which covers every construct the config schema uses.
    """
    lines: dict[str, int] = {}
    table = ""
    depth = 0
    in_multiline: Optional[str] = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if in_multiline:
            if in_multiline in line:
                in_multiline = None
            continue
        if depth == 0:
            header = _TOML_TABLE.match(line)
            if header and not line.lstrip().startswith("[["):
                table = _dotted(header.group(1))
                _record(lines, table, lineno)
                continue
            key = _TOML_KEY.match(line)
            if key:
                dotted = _dotted(key.group(1))
                _record(lines, f"{table}.{dotted}" if table else dotted, lineno)
        value = line.split("=", 1)[1] if depth == 0 and "=" in line else line
        for quote in ('"""', "'''"):
            if value.count(quote) % 2 == 1:
                in_multiline = quote
        code = re.sub(r"\"[^\"]*\"|'[^']*'", "", value).split("#", 1)[0]
        depth = max(0, depth + code.count("[") - code.count("]"))
    return lines


def _record(lines: dict[str, int], key: str, lineno: int) -> None:
    if key in lines:
        raise ConfigSyntaxError(
            f"duplicate key '{key}' (first defined on line {lines[key]}, again on line {lineno})", line=lineno
        )
    lines[key] = lineno


def _load_toml(text: str) -> tuple[dict[str, Any], dict[str, int]]:
    key_lines = _scan_toml_keys(text)
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigSyntaxError(getattr(exc, "msg", str(exc)), line=getattr(exc, "lineno", None)) from None
    return data, key_lines


def _yaml_key_lines(node: yaml.Node, prefix: str, lines: dict[str, int]) -> None:
    if not isinstance(node, yaml.MappingNode):
        return
    for key_node, value_node in node.value:
        key = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
        _record(lines, key, key_node.start_mark.line + 1)
        _yaml_key_lines(value_node, key, lines)


def _load_yaml(text: str) -> tuple[dict[str, Any], dict[str, int]]:
    key_lines: dict[str, int] = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        if root is not None:
            _yaml_key_lines(root, "", key_lines)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        message = str(getattr(exc, "problem", None) or exc)
        raise ConfigSyntaxError(message, line=mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigSyntaxError("Top level of the config must be a mapping of sections", line=1)
    return data, key_lines


def _problems(exc: ValidationError, key_lines: dict[str, int]) -> list[tuple[str, Optional[int], str]]:
    problems = []
    for error in exc.errors():
        parts = [str(p) for p in error["loc"]]
        key = ".".join(parts) if parts else "<root>"
        line = None
        # Nearest enclosing key present in the file.
        for n in range(len(parts), 0, -1):
            line = key_lines.get(".".join(parts[:n]))
            if line is not None:
                break
        if error["type"] == "extra_forbidden":
            reason = "unknown key"
        elif error["type"] == "missing":
            reason = "required key missing"
        else:
            reason = error["msg"]
        problems.append((key, line, reason))
    return problems


def parse_config(path) -> RunConfig:
    """Read and fully validate a run configuration file."""
    path = Path(path)
    data, key_lines = load_config_file(path)
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigValidationError(_problems(exc, key_lines)) from None
    logger.debug("Run configuration %s (digest %s)", path, config.digest()[:12])
    return config


__all__ = [
    "Settings",
    "load_settings",
    "RunPlan",
    "BackgroundConfig",
    "SignalConfig",
    "BinningConfig",
    "TransportConfig",
    "CcdConfig",
    "LimitConfig",
    "OutputConfig",
    "RunConfig",
    "load_config_file",
    "parse_config",
]
