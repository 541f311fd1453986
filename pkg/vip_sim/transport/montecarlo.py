"""Monte Carlo estimate of the geometric factor.

Each photon is emitted uniformly in the copper shell with an isotropic
direction, survives self-absorption with the Beer-Lambert probability of
its full copper chord, and then either reaches the sensitive area of a
live CCD chip or escapes. Compton scattering, fluorescence re-emission and
secondaries are not followed.
"""

import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from vip_sim.core.parallel import DEFAULT_CHUNK_SIZE, chunk_sizes, map_ordered
from vip_sim.core.rng import substream
from vip_sim.errors import DomainError
from vip_sim.models import DetectorGeometry, GeometricFactorEstimate
from vip_sim.physics import DEFAULT_CCD_EFFICIENCY
from vip_sim.transport.attenuation import AttenuationTable
from vip_sim.transport.geometry import (
    chord_lengths,
    isotropic_directions,
    panel_hits,
    sample_emission_points,
    validate_ray,
)
from vip_sim.utils import metrics

logger = logging.getLogger(__name__)

TRANSPORT_STAGE = "transport"
MIN_SAMPLE_COUNT = 1000

_ABSORBED, _HIT, _ESCAPED = 0, 1, 2


class OutcomeTag(str, Enum):
    ABSORBED_IN_COPPER = "AbsorbedInCopper"
    HIT_PANEL = "HitPanel"
    ESCAPED = "Escaped"


@dataclass(frozen=True)
class PhotonOutcome:
    tag: OutcomeTag
    panel: Optional[int] = None
    impact_point: Optional[tuple[float, float, float]] = None


def _transport_batch(
    points: np.ndarray,
    directions: np.ndarray,
    uniforms: np.ndarray,
    attenuation_length: float,
    geometry: DetectorGeometry,
):
    """Outcome code, panel index and impact point for a batch of photons."""
    survival = np.exp(-chord_lengths(points, directions, geometry) / attenuation_length)
    survives = uniforms < survival
    panel, impact = panel_hits(points, directions, geometry)
    panel = np.where(survives, panel, -1)
    codes = np.where(~survives, _ABSORBED, np.where(panel >= 0, _HIT, _ESCAPED))
    return codes, panel, impact


def transport_photon(
    origin,
    energy: float,
    geometry: DetectorGeometry,
    table: AttenuationTable,
    rng: np.random.Generator,
) -> PhotonOutcome:
    """Follow one photon from ``origin`` (a point inside the shell)."""
    origin = np.asarray(origin, dtype=float)
    direction = isotropic_directions(rng, 1)
    validate_ray(origin, direction[0], geometry)
    codes, panel, impact = _transport_batch(
        origin[None, :], direction, rng.random(1), table.attenuation_length(energy), geometry
    )
    if codes[0] == _ABSORBED:
        return PhotonOutcome(OutcomeTag.ABSORBED_IN_COPPER)
    if codes[0] == _HIT:
        return PhotonOutcome(OutcomeTag.HIT_PANEL, panel=int(panel[0]), impact_point=tuple(impact[0].tolist()))
    return PhotonOutcome(OutcomeTag.ESCAPED)


@dataclass(frozen=True)
class _ChunkTask:
    geometry: DetectorGeometry
    attenuation_length: float
    seed: int
    index: int
    size: int


def _simulate_chunk(task: _ChunkTask) -> tuple[int, int, int, float]:
    """``(absorbed, hit, escaped, seconds)`` for one chunk; the draw order is fixed."""
    started = time.perf_counter()
    rng = substream(task.seed, TRANSPORT_STAGE, task.index)
    points = sample_emission_points(task.geometry, rng, task.size)
    directions = isotropic_directions(rng, task.size)
    uniforms = rng.random(task.size)
    codes, _, _ = _transport_batch(points, directions, uniforms, task.attenuation_length, task.geometry)
    counts = np.bincount(codes, minlength=3)
    elapsed = time.perf_counter() - started
    logger.debug("Transport chunk %d: %d photons, %d hits", task.index, task.size, counts[_HIT])
    return int(counts[_ABSORBED]), int(counts[_HIT]), int(counts[_ESCAPED]), elapsed


def estimate_geometric_factor(
    geometry: DetectorGeometry,
    energy: float,
    ccd_efficiency: float = DEFAULT_CCD_EFFICIENCY,
    sample_count: int = 1_000_000,
    seed: int = 0,
    table: Optional[AttenuationTable] = None,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> GeometricFactorEstimate:
    """Survival x acceptance from ``sample_count`` photons, times the CCD efficiency.

    Chunk ``i`` always covers photons ``[i*chunk_size, (i+1)*chunk_size)``
    and draws from substream ``i``, so the estimate is identical for any
    ``workers`` and a run with more samples extends a shorter one.
    """
    if sample_count < MIN_SAMPLE_COUNT:
        raise DomainError(f"sample_count must be at least {MIN_SAMPLE_COUNT}, got {sample_count}")
    if not 0 < ccd_efficiency <= 1:
        raise DomainError(f"CCD efficiency must lie in (0, 1], got {ccd_efficiency}")
    table = table or AttenuationTable.copper()
    attenuation_length = table.attenuation_length(energy)

    tasks = [
        _ChunkTask(geometry, attenuation_length, seed, index, size)
        for index, size in enumerate(chunk_sizes(sample_count, chunk_size))
    ]
    logger.info(
        "Transporting %d photons at %.3f keV in %d chunks (%d workers)", sample_count, energy, len(tasks), workers
    )
    results = map_ordered(_simulate_chunk, tasks, workers)
    absorbed = sum(r[0] for r in results)
    hits = sum(r[1] for r in results)
    escaped = sum(r[2] for r in results)
    for result in results:
        metrics.transport_chunk_seconds.observe(result[3])

    metrics.photons_transported_total.labels(OutcomeTag.ABSORBED_IN_COPPER.value).inc(absorbed)
    metrics.photons_transported_total.labels(OutcomeTag.HIT_PANEL.value).inc(hits)
    metrics.photons_transported_total.labels(OutcomeTag.ESCAPED.value).inc(escaped)

    p = hits / sample_count
    estimate = GeometricFactorEstimate(
        survival_times_acceptance=p,
        statistical_error=float(np.sqrt(p * (1.0 - p) / sample_count)),
        ccd_efficiency_applied=ccd_efficiency,
        total_factor=p * ccd_efficiency,
        sample_count=sample_count,
        seed=seed,
        energy=energy,
        hit_count=hits,
        absorbed_count=absorbed,
        escaped_count=escaped,
    )
    logger.info(
        "Survival x acceptance %.5f +- %.5f, geometric factor %.5f",
        estimate.survival_times_acceptance,
        estimate.statistical_error,
        estimate.total_factor,
    )
    return estimate


__all__ = [
    "OutcomeTag",
    "PhotonOutcome",
    "TRANSPORT_STAGE",
    "MIN_SAMPLE_COUNT",
    "transport_photon",
    "estimate_geometric_factor",
]
