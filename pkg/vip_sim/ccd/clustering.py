"""Cluster finding, classification and energy calibration.

Clusters are grown from seed pixels (above ``seed_threshold_sigma``
noise sigmas) over 4-connected neighbours above
``neighbor_threshold_sigma``. Components of the neighbour mask that hold
no seed pixel are dropped as noise. A cluster of one or two pixels is an
X-ray (single or split hit), four or more is a track, three is noise.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage

from vip_sim.ccd.frames import Frame
from vip_sim.errors import DomainError
from vip_sim.models import EnergyCalibration
from vip_sim.utils import metrics

logger = logging.getLogger(__name__)

DEFAULT_SEED_THRESHOLD_SIGMA = 5.0
DEFAULT_NEIGHBOR_THRESHOLD_SIGMA = 3.0

MAX_XRAY_PIXELS = 2
MIN_TRACK_PIXELS = 4

# 4-connectivity
_CROSS = ndimage.generate_binary_structure(2, 1)


class ClusterClass(str, Enum):
    ACCEPTED_XRAY = "AcceptedXRay"
    REJECTED_TRACK = "RejectedTrack"
    REJECTED_NOISE = "RejectedNoise"


@dataclass(frozen=True, eq=False)
class Cluster:
    """Member pixels as parallel ``xs``, ``ys``, ``adc`` arrays."""

    xs: np.ndarray
    ys: np.ndarray
    adc: np.ndarray

    def __post_init__(self) -> None:
        if self.xs.size == 0:
            raise DomainError("A cluster needs at least one pixel")

    @property
    def pixel_count(self) -> int:
        return int(self.xs.size)

    @property
    def summed_adc(self) -> int:
        return int(self.adc.sum(dtype=np.int64))

    @property
    def centroid(self) -> tuple[float, float]:
        """ADC-weighted ``(x, y)``."""
        weights = self.adc.astype(float)
        total = weights.sum()
        return float(np.dot(weights, self.xs) / total), float(np.dot(weights, self.ys) / total)

    @property
    def classification(self) -> "ClusterClass":
        return classify_cluster(self)

    def pixels(self) -> list[tuple[int, int, int]]:
        return [(int(x), int(y), int(a)) for x, y, a in zip(self.xs, self.ys, self.adc)]


def find_clusters(
    frame: Frame,
    seed_threshold_sigma: float = DEFAULT_SEED_THRESHOLD_SIGMA,
    neighbor_threshold_sigma: float = DEFAULT_NEIGHBOR_THRESHOLD_SIGMA,
    noise_sigma_adc: float = 10.0,
) -> list[Cluster]:
    """Seeded 4-connected clusters of ``frame``, in label (raster) order.

    A pixel is above a threshold when strictly greater than
    ``threshold_sigma * noise_sigma_adc``; with zero noise that is any
    non-zero pixel. A neighbour threshold above the seed threshold is
    lowered to it, so every seed pixel belongs to its own cluster.
    """
    if seed_threshold_sigma <= 0 or neighbor_threshold_sigma <= 0:
        raise DomainError("Cluster thresholds must be positive")
    neighbor_threshold_sigma = min(neighbor_threshold_sigma, seed_threshold_sigma)
    if noise_sigma_adc < 0:
        raise DomainError(f"noise_sigma_adc must be non-negative, got {noise_sigma_adc}")

    pixels = frame.pixels
    neighbours = pixels > neighbor_threshold_sigma * noise_sigma_adc
    labels, count = ndimage.label(neighbours, structure=_CROSS)
    if count == 0:
        return []
    seeded = np.unique(labels[pixels > seed_threshold_sigma * noise_sigma_adc])
    seeded = set(seeded[seeded > 0].tolist())

    clusters = []
    for label, box in enumerate(ndimage.find_objects(labels), start=1):
        if label not in seeded or box is None:
            continue
        ys, xs = np.nonzero(labels[box] == label)
        ys = ys + box[0].start
        xs = xs + box[1].start
        clusters.append(Cluster(xs=xs, ys=ys, adc=pixels[ys, xs].astype(np.int64)))
    return clusters


def classify_cluster(cluster: Cluster) -> ClusterClass:
    if cluster.pixel_count <= MAX_XRAY_PIXELS:
        return ClusterClass.ACCEPTED_XRAY
    if cluster.pixel_count >= MIN_TRACK_PIXELS:
        return ClusterClass.REJECTED_TRACK
    return ClusterClass.REJECTED_NOISE


def calibrate(cluster: Cluster, calibration: EnergyCalibration) -> float:
    """Cluster energy in keV."""
    return float(calibration.to_kev(cluster.summed_adc))


@dataclass
class Reconstruction:
    """Accepted X-ray energies of a batch of frames and how every cluster was classified."""

    energies: np.ndarray
    class_counts: dict[ClusterClass, int] = field(default_factory=lambda: {c: 0 for c in ClusterClass})


def reconstruct_energies(
    frames: Iterable[Frame],
    calibration: EnergyCalibration,
    noise_sigma_adc: float,
    seed_threshold_sigma: float = DEFAULT_SEED_THRESHOLD_SIGMA,
    neighbor_threshold_sigma: float = DEFAULT_NEIGHBOR_THRESHOLD_SIGMA,
) -> Reconstruction:
    """Find, classify and calibrate; only accepted X-ray clusters give energies."""
    result = Reconstruction(energies=np.empty(0))
    energies = []
    for frame in frames:
        for cluster in find_clusters(frame, seed_threshold_sigma, neighbor_threshold_sigma, noise_sigma_adc):
            kind = classify_cluster(cluster)
            result.class_counts[kind] += 1
            if kind is ClusterClass.ACCEPTED_XRAY:
                energies.append(calibrate(cluster, calibration))
    result.energies = np.asarray(energies, dtype=float)
    logger.debug("Reconstructed %d accepted X rays (%s)", len(energies), result.class_counts)
    return result


def record_cluster_counts(class_counts: dict[ClusterClass, int]) -> None:
    """Add per-class cluster counts to the metrics registry.

    Call from the parent process; ``reconstruct_energies`` may run in a pool worker.
    """
    for kind, n in class_counts.items():
        metrics.clusters_total.labels(kind.value).inc(n)


@dataclass(frozen=True)
class CorpusRates:
    xray_acceptance: float
    track_rejection: float
    injected_hits: int
    injected_tracks: int
    class_counts: dict[ClusterClass, int]


def measure_corpus(
    frames: Iterable[Frame],
    noise_sigma_adc: float,
    seed_threshold_sigma: float = DEFAULT_SEED_THRESHOLD_SIGMA,
    neighbor_threshold_sigma: float = DEFAULT_NEIGHBOR_THRESHOLD_SIGMA,
) -> CorpusRates:
    """X-ray acceptance and track rejection of the clustering on synthetic frames.

    A hit counts as accepted when its pixel lies in an accepted cluster; a
    track leaks when an accepted cluster touches its pixels.
    """
    hits = accepted_hits = tracks = leaks = 0
    counts = {c: 0 for c in ClusterClass}
    for frame in frames:
        if frame.truth is None:
            raise DomainError("measure_corpus needs synthetic frames that carry their injection truth")
        accepted = np.zeros(frame.pixels.shape, dtype=bool)
        for cluster in find_clusters(frame, seed_threshold_sigma, neighbor_threshold_sigma, noise_sigma_adc):
            kind = classify_cluster(cluster)
            counts[kind] += 1
            if kind is ClusterClass.ACCEPTED_XRAY:
                accepted[cluster.ys, cluster.xs] = True
                if frame.truth.track_mask is not None and frame.truth.track_mask[cluster.ys, cluster.xs].any():
                    leaks += 1
        hits += len(frame.truth.hit_sites)
        accepted_hits += sum(bool(accepted[y, x]) for x, y in frame.truth.hit_sites)
        tracks += frame.truth.track_count
    record_cluster_counts(counts)
    return CorpusRates(
        xray_acceptance=accepted_hits / hits if hits else 1.0,
        track_rejection=1.0 - leaks / tracks if tracks else 1.0,
        injected_hits=hits,
        injected_tracks=tracks,
        class_counts=counts,
    )


__all__ = [
    "DEFAULT_NEIGHBOR_THRESHOLD_SIGMA",
    "DEFAULT_SEED_THRESHOLD_SIGMA",
    "Cluster",
    "ClusterClass",
    "CorpusRates",
    "Reconstruction",
    "calibrate",
    "classify_cluster",
    "find_clusters",
    "measure_corpus",
    "reconstruct_energies",
    "record_cluster_counts",
]
