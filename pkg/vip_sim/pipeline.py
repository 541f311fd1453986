"""The batch operations behind each CLI subcommand.

Every ``run_*`` function takes a validated :class:`RunConfig` and an
:class:`ArtifactStore`, writes its artifacts through the store and
returns the in-memory result. Random draws come from substreams keyed by
the config seed, so the same config always writes the same bytes.
"""

import hashlib
import logging
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import scipy
from pydantic import BaseModel, ConfigDict

from vip_sim import __version__
from vip_sim.analysis.limits import compute_limit, project_sensitivity
from vip_sim.analysis.spectrum import Spectrum, SpectrumLabel, build_spectrum, roi_mask, roi_report
from vip_sim.ccd.clustering import (
    ClusterClass,
    CorpusRates,
    measure_corpus,
    reconstruct_energies,
    record_cluster_counts,
)
from vip_sim.ccd.frames import CorpusSpec, synthesize_corpus, synthesize_frame
from vip_sim.ccd.response import smear_energies
from vip_sim.config import RunConfig
from vip_sim.core.parallel import map_ordered
from vip_sim.core.rng import substream
from vip_sim.errors import DomainError, FileFormatError, InputError, MissingGeometricFactorError
from vip_sim.models import GeometricFactorEstimate, LimitResult, ProjectionResult, RoiReport
from vip_sim.physics import (
    EFFICIENCY_REFERENCE_ENERGY,
    NORMAL_KALPHA,
    NORMAL_KBETA,
    expected_signal_counts,
    internal_scatter_count,
    new_electron_count,
    signal_coefficient,
)
from vip_sim.storage.base import ArtifactStore
from vip_sim.storage.formats import (
    BACKGROUND_HEADER,
    read_numeric_csv,
    read_report,
    read_spectrum_csv,
    write_difference_csv,
    write_figure2_csv,
    write_frame_binary,
    write_frame_csv,
    write_report,
    write_spectrum_csv,
)
from vip_sim.transport.attenuation import AttenuationTable
from vip_sim.transport.montecarlo import estimate_geometric_factor
from vip_sim.utils import metrics

logger = logging.getLogger(__name__)

SPECTRUM_ON = "spectrum_on.csv"
SPECTRUM_OFF = "spectrum_off.csv"
SPECTRUM_DIFFERENCE = "spectrum_difference.csv"
ROI_REPORT = "roi_report.toml"
LIMIT_REPORT = "limit_report.toml"
PROJECTION_REPORT = "projection_report.toml"
GEOM_FACTOR_REPORT = "geom_factor.toml"
FRAMES_REPORT = "frames_report.toml"
PROVENANCE = "provenance.json"
FIGURE2 = "figure2_spectra.csv"
FIGURE3 = "figure3_difference.csv"
FIGURE3_ROI = "figure3_roi.csv"

SIMULATE_STAGE = "simulate"
RECONSTRUCT_STAGE = "reconstruct"

_RUN_INDEX = {SpectrumLabel.CURRENT_ON: 0, SpectrumLabel.CURRENT_OFF: 1}

#: Resolution of the inverse-CDF grid used to sample a tabulated background.
_BACKGROUND_GRID_POINTS = 20_001


class Provenance(BaseModel):
    """Sidecar written next to every command's artifacts. No timestamps or paths."""

    model_config = ConfigDict(frozen=True)

    command: str
    config_sha256: str
    seed: int
    vip_sim_version: str
    numpy_version: str
    scipy_version: str
    python_version: str
    artifacts: dict[str, str]


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_provenance(store: ArtifactStore, config: RunConfig, command: str, names: list[str]) -> Provenance:
    provenance = Provenance(
        command=command,
        config_sha256=config.digest(),
        seed=config.seed,
        vip_sim_version=__version__,
        numpy_version=np.__version__,
        scipy_version=scipy.__version__,
        python_version=platform.python_version(),
        artifacts={name: _sha256(store.read_bytes(name)) for name in sorted(names)},
    )
    store.write_text(PROVENANCE, provenance.model_dump_json(indent=2) + "\n")
    return provenance


# Input helpers


def read_text_file(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"Input file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"Cannot read {path}: {exc}") from None


def load_spectrum(path) -> Spectrum:
    return read_spectrum_csv(read_text_file(path))


def load_report(path) -> dict[str, Any]:
    return read_report(read_text_file(path))


def _report_value(report: dict[str, Any], section: str, key: str) -> Any:
    try:
        return report[section][key]
    except (KeyError, TypeError):
        raise FileFormatError(f"Report has no '{section}.{key}' entry") from None


# Geometric factor


def run_geom_factor(config: RunConfig, store: ArtifactStore, workers: int = 1) -> GeometricFactorEstimate:
    """Transport Monte Carlo at the configured energy; writes the geometric-factor report."""
    table = (
        AttenuationTable.load(config.transport.attenuation_table)
        if config.transport.attenuation_table
        else AttenuationTable.copper()
    )
    estimate = estimate_geometric_factor(
        config.geometry,
        config.transport.energy,
        ccd_efficiency=config.transport.ccd_efficiency,
        sample_count=config.transport.sample_count,
        seed=config.seed,
        table=table,
        workers=workers,
    )
    report = {
        "geometric_factor": estimate.model_dump(),
        "efficiency": {
            "ccd_efficiency": config.transport.ccd_efficiency,
            "reference_energy": EFFICIENCY_REFERENCE_ENERGY,
            "transport_energy": config.transport.energy,
        },
        "geometry": {k: v for k, v in config.geometry.model_dump().items() if k != "live_panel_mask"},
        "live_panels": {
            "mask": [bool(v) for v in config.geometry.live_panel_mask],
            "count": config.geometry.live_panel_count,
        },
    }
    store.write_text(GEOM_FACTOR_REPORT, write_report(report, title="Geometric factor estimate"))
    write_provenance(store, config, "geom-factor", [GEOM_FACTOR_REPORT])
    return estimate


def resolve_geometric_factor(config: RunConfig, geom_report: Optional[dict[str, Any]] = None) -> float:
    """Geometric factor from a ``geom-factor`` report, else from the config."""
    if geom_report is not None:
        return float(_report_value(geom_report, "geometric_factor", "total_factor"))
    if config.signal.geometric_factor is not None:
        return config.signal.geometric_factor
    raise MissingGeometricFactorError()


# Simulation


def _background_density(config: RunConfig, grid: np.ndarray) -> np.ndarray:
    if config.background.shape == "flat":
        return np.ones_like(grid)
    energies, rates = read_numeric_csv(read_text_file(config.background.table), BACKGROUND_HEADER)
    if energies.size < 2 or np.any(np.diff(energies) <= 0) or np.any(rates < 0) or energies[0] <= 0:
        raise DomainError("Background table needs increasing positive energies and non-negative rates")
    return np.interp(grid, energies, rates, left=0.0, right=0.0)


def sample_background(config: RunConfig, frames: int, rng: np.random.Generator) -> np.ndarray:
    """Poisson number of background energies over the binned range."""
    lo, hi = config.binning.bin_lo, config.binning.bin_hi
    rate = config.background.rate_per_kev_per_frame * frames
    if config.background.shape == "flat":
        count = rng.poisson(rate * (hi - lo))
        return lo + rng.random(count) * (hi - lo)
    grid = np.linspace(lo, hi, _BACKGROUND_GRID_POINTS)
    density = _background_density(config, grid)
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))))
    if cdf[-1] <= 0:
        return np.empty(0)
    count = rng.poisson(rate * cdf[-1])
    return np.interp(rng.random(count) * cdf[-1], cdf, grid)


def signal_expectation(config: RunConfig, geometric_factor: Optional[float]) -> float:
    """Mean number of violating-line X rays detected in the current-on run."""
    if config.signal.beta2_over_2 == 0:
        return 0.0
    if geometric_factor is None:
        raise MissingGeometricFactorError()
    coefficient = signal_coefficient(config.run.run_summary(), config.conductor, geometric_factor)
    return expected_signal_counts(config.signal.beta2_over_2, coefficient)


def simulate_energies(
    config: RunConfig,
    label: SpectrumLabel,
    signal_mean: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Measured energies of one run: flat (or tabulated) continuum plus smeared lines.

    The continuum is already a measured shape and is not smeared again.
    """
    duration = config.run.live_time_on() if label is SpectrumLabel.CURRENT_ON else config.run.duration_off
    frames = config.run.frame_count(duration)
    background = sample_background(config, frames, rng)

    line_energies = []
    components = {"background": background.size}
    for name, mean, energy in (
        ("kalpha", config.background.kalpha_counts, NORMAL_KALPHA.energy),
        ("kbeta", config.background.kbeta_counts, NORMAL_KBETA.energy),
        ("signal", signal_mean if label is SpectrumLabel.CURRENT_ON else 0.0, config.signal.line_energy),
    ):
        n = int(rng.poisson(mean)) if mean > 0 else 0
        components[name] = n
        line_energies.append(np.full(n, energy))
    lines = smear_energies(np.concatenate(line_energies), config.resolution, rng)

    for name, n in components.items():
        metrics.events_generated_total.labels(label.value, name).inc(n)
    logger.info(f"{label.value}: {duration:g} min, {frames} frames, events {components}")
    return np.concatenate((background, lines))


@dataclass(frozen=True)
class _ReconstructTask:
    config: RunConfig
    stage: str
    index: int
    hits: tuple[tuple[tuple[int, int], float], ...]


def _reconstruct_frame(task: _ReconstructTask):
    ccd = task.config.ccd
    rng = substream(task.config.seed, task.stage, task.index)
    frame = synthesize_frame(
        task.hits,
        ccd.noise_sigma_adc,
        ccd.track_rate,
        ccd.calibration,
        rng,
        width=ccd.frame_width,
        height=ccd.frame_height,
        panel_id=task.index % task.config.run.ccd_live_count,
        exposure=task.config.run.readout_cadence,
    )
    result = reconstruct_energies(
        [frame],
        ccd.calibration,
        ccd.noise_sigma_adc,
        ccd.seed_threshold_sigma,
        ccd.neighbor_threshold_sigma,
    )
    return result.energies, result.class_counts


def reconstruct_run(
    config: RunConfig, label: SpectrumLabel, energies: np.ndarray, rng: np.random.Generator, workers: int = 1
) -> np.ndarray:
    """Place ``energies`` into the run's frames and keep what the clustering accepts."""
    duration = config.run.live_time_on() if label is SpectrumLabel.CURRENT_ON else config.run.duration_off
    n_frames = config.run.frame_count(duration)
    if n_frames == 0:
        return np.empty(0)
    frame_of = rng.integers(0, n_frames, size=energies.size)
    xs = rng.integers(0, config.ccd.frame_width, size=energies.size)
    ys = rng.integers(0, config.ccd.frame_height, size=energies.size)
    per_frame: list[list[tuple[tuple[int, int], float]]] = [[] for _ in range(n_frames)]
    for f, x, y, e in zip(frame_of, xs, ys, energies):
        per_frame[int(f)].append(((int(x), int(y)), float(e)))

    stage = f"{RECONSTRUCT_STAGE}-{label.value}"
    tasks = [_ReconstructTask(config, stage, i, tuple(hits)) for i, hits in enumerate(per_frame)]
    results = map_ordered(_reconstruct_frame, tasks, workers)
    accepted = np.concatenate([energies_ for energies_, _ in results]) if results else np.empty(0)
    totals = {kind: 0 for kind in ClusterClass}
    for _, counts in results:
        for kind, n in counts.items():
            totals[kind] += n
    metrics.frames_synthesized_total.inc(n_frames)
    record_cluster_counts(totals)
    summary = {kind.value: n for kind, n in totals.items()}
    logger.info(f"{label.value}: {energies.size} deposits in {n_frames} frames, clusters {summary}")
    return accepted


def simulate_spectrum(
    config: RunConfig,
    label: SpectrumLabel,
    geometric_factor: Optional[float] = None,
    workers: int = 1,
) -> Spectrum:
    rng = substream(config.seed, SIMULATE_STAGE, _RUN_INDEX[label])
    signal_mean = signal_expectation(config, geometric_factor) if label is SpectrumLabel.CURRENT_ON else 0.0
    energies = simulate_energies(config, label, signal_mean, rng)
    if config.ccd.reconstruct:
        energies = reconstruct_run(config, label, energies, rng, workers)
    live_time = config.run.live_time_on() if label is SpectrumLabel.CURRENT_ON else config.run.duration_off
    return build_spectrum(
        energies, config.binning.bin_lo, config.binning.bin_width, config.binning.bin_count, live_time, label
    )


def run_simulate(
    config: RunConfig,
    store: ArtifactStore,
    workers: int = 1,
    geometric_factor: Optional[float] = None,
) -> tuple[Spectrum, Spectrum]:
    """Simulate the current-on and current-off spectra and write them."""
    if geometric_factor is None and config.signal.beta2_over_2 > 0:
        geometric_factor = resolve_geometric_factor(config)
    on = simulate_spectrum(config, SpectrumLabel.CURRENT_ON, geometric_factor, workers)
    off = simulate_spectrum(config, SpectrumLabel.CURRENT_OFF, geometric_factor, workers)

    names = [SPECTRUM_ON, SPECTRUM_OFF]
    store.write_text(SPECTRUM_ON, write_spectrum_csv(on))
    store.write_text(SPECTRUM_OFF, write_spectrum_csv(off))
    if config.output.figures:
        store.write_text(FIGURE2, write_figure2_csv(on, off))
        names.append(FIGURE2)
    write_provenance(store, config, "simulate", names)
    logger.info(f"Simulated spectra: on {on.total:.0f} entries, off {off.total:.0f} entries")
    return on, off


# Analysis


def run_analyze(on: Spectrum, off: Spectrum, config: RunConfig, store: ArtifactStore) -> tuple[Spectrum, RoiReport]:
    """Subtract ``off`` from ``on`` and summarize the ROI."""
    difference, report = roi_report(on, off, config.roi)
    names = [SPECTRUM_DIFFERENCE, ROI_REPORT]
    store.write_text(SPECTRUM_DIFFERENCE, write_spectrum_csv(difference))
    store.write_text(ROI_REPORT, write_report({"roi": report.model_dump()}, title="ROI counts, current on - off"))
    if config.output.figures:
        store.write_text(FIGURE3, write_difference_csv(difference))
        store.write_text(FIGURE3_ROI, write_difference_csv(difference, roi_mask(difference, config.roi)))
        names += [FIGURE3, FIGURE3_ROI]
    write_provenance(store, config, "analyze", names)
    return difference, report


def run_limit(
    roi: dict[str, Any],
    config: RunConfig,
    store: ArtifactStore,
    geom_report: Optional[dict[str, Any]] = None,
    n_sigma: Optional[float] = None,
) -> LimitResult:
    """Upper limit on beta^2/2 from an ROI report (as read back from ``roi_report.toml``)."""
    delta_counts = float(_report_value(roi, "roi", "delta_counts"))
    delta_error = float(_report_value(roi, "roi", "delta_error"))
    geometric_factor = resolve_geometric_factor(config, geom_report)
    n_sigma = config.limit.n_sigma if n_sigma is None else n_sigma

    summary = config.run.run_summary()
    coefficient = signal_coefficient(summary, config.conductor, geometric_factor)
    result = compute_limit(
        delta_error, coefficient, n_sigma=n_sigma, delta_counts=delta_counts, prior_limit=config.limit.prior_limit
    )
    report = {
        "limit": result.model_dump(),
        "coefficient": {
            "integrated_charge_q": summary.integrated_charge_q,
            "current": summary.current,
            "live_time": summary.live_time,
            "n_new": new_electron_count(summary.integrated_charge_q),
            "n_int": internal_scatter_count(config.conductor),
            "length_d": config.conductor.length_d,
            "mean_free_path_mu": config.conductor.mean_free_path_mu,
            "capture_to_scatter_floor": config.conductor.capture_to_scatter_floor,
            "geometric_factor": geometric_factor,
            "coefficient_k": coefficient,
        },
        "rounded": {
            "beta2_over_2_limit": f"{result.beta2_over_2_limit:.1e}",
            "coefficient_k": f"{coefficient:.1e}",
            "delta": f"{delta_counts:.0f} +- {delta_error:.0f}",
        },
    }
    store.write_text(LIMIT_REPORT, write_report(report, title="Upper limit on beta^2/2"))
    write_provenance(store, config, "limit", [LIMIT_REPORT])
    return result


def run_project(
    limit: dict[str, Any],
    scales: tuple[float, float, float],
    store: ArtifactStore,
    config: Optional[RunConfig] = None,
) -> ProjectionResult:
    """Scale a limit report to another campaign; ``scales`` is (background, live time, current)."""
    base = float(_report_value(limit, "limit", "beta2_over_2_limit"))
    background_scale, live_time_scale, current_scale = scales
    result = project_sensitivity(base, background_scale, live_time_scale, current_scale)
    logger.info(f"Projected limit {result.projected_limit:.3e} (x{result.scale_factor:.4g} of {base:.3e})")
    store.write_text(PROJECTION_REPORT, write_report({"projection": result.model_dump()}, title="Sensitivity"))
    if config is not None:
        write_provenance(store, config, "project", [PROJECTION_REPORT])
    return result


# Frames


def corpus_spec(config: RunConfig) -> CorpusSpec:
    ccd = config.ccd
    return CorpusSpec(
        hits_per_frame=ccd.hits_per_frame,
        hit_energy=NORMAL_KALPHA.energy,
        noise_sigma_adc=ccd.noise_sigma_adc,
        track_rate=ccd.track_rate,
        calibration=ccd.calibration,
        width=ccd.frame_width,
        height=ccd.frame_height,
        panel_count=config.geometry.ccd_panel_count,
    )


def run_frames(config: RunConfig, store: ArtifactStore, workers: int = 1) -> CorpusRates:
    """Synthesize the frame corpus, dump it and measure the clustering on it."""
    ccd = config.ccd
    frames = synthesize_corpus(ccd.corpus_frames, config.seed, corpus_spec(config), workers)
    names = []
    for i, frame in enumerate(frames):
        if ccd.dump_format == "binary":
            name = f"frames/frame_{i:05d}.bin"
            store.write_bytes(name, write_frame_binary(frame))
        elif ccd.dump_format == "csv":
            name = f"frames/frame_{i:05d}.csv"
            store.write_text(name, write_frame_csv(frame))
        else:
            continue
        names.append(name)

    rates = measure_corpus(frames, ccd.noise_sigma_adc, ccd.seed_threshold_sigma, ccd.neighbor_threshold_sigma)
    report = {
        "corpus": {
            "frames": len(frames),
            "width": ccd.frame_width,
            "height": ccd.frame_height,
            "noise_sigma_adc": ccd.noise_sigma_adc,
            "track_rate": ccd.track_rate,
            "hits_per_frame": ccd.hits_per_frame,
        },
        "rates": {
            "xray_acceptance": rates.xray_acceptance,
            "track_rejection": rates.track_rejection,
            "injected_hits": rates.injected_hits,
            "injected_tracks": rates.injected_tracks,
        },
        "clusters": {kind.value: n for kind, n in rates.class_counts.items()},
    }
    store.write_text(FRAMES_REPORT, write_report(report, title="Synthetic frame corpus"))
    write_provenance(store, config, "frames", names + [FRAMES_REPORT])
    logger.info(
        f"Corpus of {len(frames)} frames: X-ray acceptance {rates.xray_acceptance:.4f}, "
        f"track rejection {rates.track_rejection:.4f}"
    )
    return rates


# Everything


@dataclass
class PipelineResult:
    on: Spectrum
    off: Spectrum
    difference: Spectrum
    roi: RoiReport
    limit: LimitResult
    projection: ProjectionResult
    geometric_factor: float
    estimate: Optional[GeometricFactorEstimate] = None


def _written_by_last_step(store: ArtifactStore) -> list[str]:
    """Artifact names listed in the provenance the previous ``run_*`` call wrote."""
    return list(Provenance.model_validate_json(store.read_text(PROVENANCE)).artifacts)


def run_pipeline(config: RunConfig, store: ArtifactStore, workers: int = 1) -> PipelineResult:
    """simulate -> analyze -> limit -> project; runs the transport first when no geometric factor is configured.

    The pipeline provenance lists only what this run wrote, not older files in the store.
    """
    estimate = None
    geom_report = None
    names: list[str] = []
    if config.signal.geometric_factor is None:
        estimate = run_geom_factor(config, store, workers)
        names += _written_by_last_step(store)
        geom_report = read_report(store.read_text(GEOM_FACTOR_REPORT))
    geometric_factor = resolve_geometric_factor(config, geom_report)

    on, off = run_simulate(config, store, workers, geometric_factor=geometric_factor)
    names += _written_by_last_step(store)
    difference, roi = run_analyze(on, off, config, store)
    names += _written_by_last_step(store)
    limit = run_limit(read_report(store.read_text(ROI_REPORT)), config, store, geom_report)
    names += _written_by_last_step(store)
    scales = (
        config.limit.projection_background_scale,
        config.limit.projection_live_time_scale,
        config.limit.projection_current_scale,
    )
    projection = run_project(read_report(store.read_text(LIMIT_REPORT)), scales, store, config)
    names += _written_by_last_step(store)

    write_provenance(store, config, "pipeline", names)
    return PipelineResult(on, off, difference, roi, limit, projection, geometric_factor, estimate)


__all__ = [
    "Provenance",
    "PipelineResult",
    "load_spectrum",
    "load_report",
    "resolve_geometric_factor",
    "sample_background",
    "signal_expectation",
    "simulate_energies",
    "simulate_spectrum",
    "run_geom_factor",
    "run_simulate",
    "run_analyze",
    "run_limit",
    "run_project",
    "run_frames",
    "run_pipeline",
]
