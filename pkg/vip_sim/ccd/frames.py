"""Synthetic CCD read-out frames.

A frame is a ``height x width`` grid of unsigned 16-bit ADC values.
X-ray hits deposit their charge in one pixel, or split it between two
neighbouring pixels; charged-particle background shows up as straight
4-connected tracks. The 85/15 single/split ratio and the track charge
range are conventions of the synthetic corpus, not measured CCD
properties.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from vip_sim.core.parallel import map_ordered
from vip_sim.core.rng import substream
from vip_sim.errors import DomainError
from vip_sim.models import EnergyCalibration
from vip_sim.utils import metrics

logger = logging.getLogger(__name__)

FRAME_STAGE = "frames"

DEFAULT_FRAME_SIZE = 256
DEFAULT_EXPOSURE = 10.0
ADC_MAX = np.iinfo(np.uint16).max

SPLIT_PROBABILITY = 0.15
#: Share of the charge kept by the first pixel of a split hit.
SPLIT_SHARE_RANGE = (0.3, 0.7)

TRACK_MIN_LENGTH = 4
TRACK_MAX_LENGTH = 40
TRACK_ADC_PER_PIXEL = (150.0, 600.0)

_NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True, eq=False)
class FrameTruth:
    """What was injected into a synthetic frame; never persisted."""

    hit_sites: tuple[tuple[int, int], ...] = ()
    track_count: int = 0
    track_mask: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class Frame:
    """One CCD read-out. ``pixels[row, col]``, i.e. ``pixels[y, x]``."""

    pixels: np.ndarray
    panel_id: int = 0
    exposure: float = DEFAULT_EXPOSURE
    truth: Optional[FrameTruth] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.size == 0:
            raise DomainError("Frame pixels must be a non-empty 2-D array")
        if pixels.dtype != np.uint16:
            if np.any(pixels < 0) or np.any(pixels > ADC_MAX):
                raise DomainError("Frame pixel values must fit in an unsigned 16-bit ADC range")
            pixels = pixels.astype(np.uint16)
        if self.panel_id < 0:
            raise DomainError(f"panel_id must be non-negative, got {self.panel_id}")
        if self.exposure <= 0:
            raise DomainError(f"Exposure must be positive, got {self.exposure}")
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def same_content(self, other: "Frame") -> bool:
        return (
            self.panel_id == other.panel_id
            and self.exposure == other.exposure
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
        )


def track_pixels(length: int, angle: float) -> np.ndarray:
    """``(length, 2)`` array of ``(x, y)`` cells of a 4-connected straight segment from the origin.

    Grid traversal: every step moves exactly one cell along x or y,
    whichever boundary the ray crosses first.
    """
    dx, dy = np.cos(angle), np.sin(angle)
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    t_delta_x = abs(1.0 / dx) if dx != 0 else np.inf
    t_delta_y = abs(1.0 / dy) if dy != 0 else np.inf
    # Start at the cell centre.
    t_max_x = 0.5 * t_delta_x
    t_max_y = 0.5 * t_delta_y
    x = y = 0
    cells = [(0, 0)]
    while len(cells) < length:
        if t_max_x < t_max_y:
            x += step_x
            t_max_x += t_delta_x
        else:
            y += step_y
            t_max_y += t_delta_y
        cells.append((x, y))
    return np.array(cells, dtype=np.int64)


def _deposit_hits(signal: np.ndarray, hits, calibration: EnergyCalibration, rng: np.random.Generator) -> None:
    height, width = signal.shape
    for (x, y), energy in hits:
        adc = float(calibration.to_adc(energy))
        if rng.random() >= SPLIT_PROBABILITY:
            signal[y, x] += adc
            continue
        candidates = [(x + ox, y + oy) for ox, oy in _NEIGHBOURS if 0 <= x + ox < width and 0 <= y + oy < height]
        if not candidates:
            signal[y, x] += adc
            continue
        nx, ny = candidates[int(rng.integers(len(candidates)))]
        share = rng.uniform(*SPLIT_SHARE_RANGE)
        signal[y, x] += adc * share
        signal[ny, nx] += adc * (1.0 - share)


def _inject_tracks(signal: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    height, width = signal.shape
    mask = np.zeros(signal.shape, dtype=bool)
    max_length = min(TRACK_MAX_LENGTH, width, height)
    for _ in range(count):
        length = int(rng.integers(TRACK_MIN_LENGTH, max_length + 1))
        cells = track_pixels(length, rng.uniform(0.0, 2 * np.pi))
        lo, hi = cells.min(axis=0), cells.max(axis=0)
        offset_x = int(rng.integers(-lo[0], width - hi[0]))
        offset_y = int(rng.integers(-lo[1], height - hi[1]))
        xs, ys = cells[:, 0] + offset_x, cells[:, 1] + offset_y
        signal[ys, xs] += rng.uniform(*TRACK_ADC_PER_PIXEL, size=length)
        mask[ys, xs] = True
    return mask


def synthesize_frame(
    hits: Sequence[tuple[tuple[int, int], float]],
    noise_sigma_adc: float,
    track_rate: float,
    calibration: EnergyCalibration,
    rng: np.random.Generator,
    width: int = DEFAULT_FRAME_SIZE,
    height: int = DEFAULT_FRAME_SIZE,
    panel_id: int = 0,
    exposure: float = DEFAULT_EXPOSURE,
) -> Frame:
    """Build one frame from ``((x, y), energy_keV)`` hits plus noise and tracks.

    Draw order is fixed (split decisions, track count, tracks, noise) so a
    frame is a pure function of its inputs and the generator state.
    """
    if noise_sigma_adc < 0:
        raise DomainError(f"noise_sigma_adc must be non-negative, got {noise_sigma_adc}")
    if track_rate < 0:
        raise DomainError(f"track_rate must be non-negative, got {track_rate}")
    if track_rate > 0 and min(width, height) < TRACK_MIN_LENGTH:
        raise DomainError(f"A {width}x{height} frame cannot hold a {TRACK_MIN_LENGTH}-pixel track")
    for (x, y), energy in hits:
        if not (0 <= x < width and 0 <= y < height):
            raise DomainError(f"Hit at ({x}, {y}) is outside the {width}x{height} frame")
        if energy <= 0:
            raise DomainError(f"Hit energy must be positive, got {energy}")

    signal = np.zeros((height, width), dtype=float)
    _deposit_hits(signal, hits, calibration, rng)
    track_count = int(rng.poisson(track_rate)) if track_rate > 0 else 0
    track_mask = _inject_tracks(signal, track_count, rng)
    if noise_sigma_adc > 0:
        signal += rng.normal(0.0, noise_sigma_adc, size=signal.shape)

    pixels = np.clip(np.rint(signal), 0, ADC_MAX).astype(np.uint16)
    truth = FrameTruth(
        hit_sites=tuple((int(x), int(y)) for (x, y), _ in hits),
        track_count=track_count,
        track_mask=track_mask,
    )
    return Frame(pixels=pixels, panel_id=panel_id, exposure=exposure, truth=truth)


@dataclass(frozen=True)
class CorpusSpec:
    """Parameters of a synthetic frame corpus; every frame shares them."""

    hits_per_frame: int = 4
    hit_energy: float = 8.040
    noise_sigma_adc: float = 10.0
    track_rate: float = 3.0
    calibration: EnergyCalibration = field(default_factory=EnergyCalibration)
    width: int = DEFAULT_FRAME_SIZE
    height: int = DEFAULT_FRAME_SIZE
    panel_count: int = 16


@dataclass(frozen=True)
class _FrameTask:
    spec: CorpusSpec
    seed: int
    index: int


def _corpus_frame(task: _FrameTask) -> Frame:
    spec = task.spec
    rng = substream(task.seed, FRAME_STAGE, task.index)
    xs = rng.integers(0, spec.width, size=spec.hits_per_frame)
    ys = rng.integers(0, spec.height, size=spec.hits_per_frame)
    hits = [((int(x), int(y)), spec.hit_energy) for x, y in zip(xs, ys)]
    return synthesize_frame(
        hits,
        spec.noise_sigma_adc,
        spec.track_rate,
        spec.calibration,
        rng,
        width=spec.width,
        height=spec.height,
        panel_id=task.index % spec.panel_count,
    )


def synthesize_corpus(
    n_frames: int, seed: int, spec: Optional[CorpusSpec] = None, workers: int = 1
) -> list[Frame]:
    """``n_frames`` frames, frame ``i`` drawn from its own substream."""
    spec = spec or CorpusSpec()
    if n_frames < 0:
        raise DomainError(f"n_frames must be non-negative, got {n_frames}")
    logger.info(f"Synthesizing {n_frames} frames ({spec.width}x{spec.height}, {workers} workers)")
    tasks = [_FrameTask(spec, seed, i) for i in range(n_frames)]
    frames = map_ordered(_corpus_frame, tasks, workers)
    # Pool workers have their own registries; count in the parent.
    metrics.frames_synthesized_total.inc(len(frames))
    return frames


__all__ = [
    "ADC_MAX",
    "DEFAULT_EXPOSURE",
    "DEFAULT_FRAME_SIZE",
    "FRAME_STAGE",
    "CorpusSpec",
    "Frame",
    "FrameTruth",
    "synthesize_frame",
    "synthesize_corpus",
    "track_pixels",
]
