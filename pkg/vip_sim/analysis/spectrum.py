"""Uniform-binned energy spectra, live-time normalized subtraction and ROI sums."""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from vip_sim.errors import BinningMismatchError, DomainError
from vip_sim.models import RegionOfInterest, RoiReport

logger = logging.getLogger(__name__)

#: Relative tolerance when comparing bin edges of two spectra.
_BINNING_RTOL = 1e-12


class SpectrumLabel(str, Enum):
    CURRENT_ON = "CurrentOn"
    CURRENT_OFF = "CurrentOff"
    DIFFERENCE = "Difference"


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Histogram with bins ``[bin_lo + i*bin_width, bin_lo + (i+1)*bin_width)``.

    ``underflow``/``overflow`` count entries below/above the histogram
    range; they are reported but never enter a bin.
    """

    bin_lo: float
    bin_width: float
    counts: np.ndarray
    errors: np.ndarray
    live_time: float
    label: SpectrumLabel
    underflow: float = 0.0
    overflow: float = 0.0

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=float)
        errors = np.array(self.errors, dtype=float)
        label = SpectrumLabel(self.label)
        if counts.ndim != 1 or counts.size == 0:
            raise DomainError("A spectrum needs at least one bin")
        if errors.shape != counts.shape:
            raise DomainError(f"{errors.size} errors given for {counts.size} bins")
        if not self.bin_width > 0:
            raise DomainError(f"Bin width must be positive, got {self.bin_width}")
        if self.live_time < 0:
            raise DomainError(f"Live time must be non-negative, got {self.live_time}")
        if label is not SpectrumLabel.DIFFERENCE and np.any(counts < 0):
            raise DomainError("Counts of a measured spectrum cannot be negative")
        counts.flags.writeable = False
        errors.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "label", label)

    @property
    def bin_count(self) -> int:
        return int(self.counts.size)

    @property
    def edges(self) -> np.ndarray:
        return self.bin_lo + np.arange(self.bin_count + 1) * self.bin_width

    @property
    def centers(self) -> np.ndarray:
        return self.bin_lo + (np.arange(self.bin_count) + 0.5) * self.bin_width

    @property
    def span(self) -> tuple[float, float]:
        return self.bin_lo, self.bin_lo + self.bin_count * self.bin_width

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def same_binning(self, other: "Spectrum") -> bool:
        return (
            self.bin_count == other.bin_count
            and math.isclose(self.bin_lo, other.bin_lo, rel_tol=_BINNING_RTOL, abs_tol=1e-15)
            and math.isclose(self.bin_width, other.bin_width, rel_tol=_BINNING_RTOL)
        )

    def same_content(self, other: "Spectrum") -> bool:
        """Exact equality of every field; used by round-trip checks."""
        return (
            self.bin_lo == other.bin_lo
            and self.bin_width == other.bin_width
            and self.live_time == other.live_time
            and self.label is other.label
            and self.underflow == other.underflow
            and self.overflow == other.overflow
            and bool(np.array_equal(self.counts, other.counts))
            and bool(np.array_equal(self.errors, other.errors))
        )


def build_spectrum(
    energies,
    bin_lo: float,
    bin_width: float,
    bin_count: int,
    live_time: float,
    label: SpectrumLabel,
) -> Spectrum:
    """Histogram ``energies`` (keV) into ``bin_count`` half-open bins.

    An energy sitting exactly on an interior edge lands in the upper bin;
    the edge test uses the same ``bin_lo + i*bin_width`` arithmetic as
    :attr:`Spectrum.edges`, so floating-point division never moves it.
    """
    if not bin_width > 0:
        raise DomainError(f"Bin width must be positive, got {bin_width}")
    if bin_count < 1:
        raise DomainError(f"Bin count must be at least 1, got {bin_count}")
    energies = np.asarray(energies, dtype=float).ravel()
    if not np.all(np.isfinite(energies)):
        raise DomainError("Energies must be finite")

    index = np.floor((energies - bin_lo) / bin_width).astype(np.int64)
    lower = bin_lo + index * bin_width
    index = np.where(energies < lower, index - 1, index)
    upper = bin_lo + (index + 1) * bin_width
    index = np.where(energies >= upper, index + 1, index)

    underflow = int(np.count_nonzero(index < 0))
    overflow = int(np.count_nonzero(index >= bin_count))
    inside = index[(index >= 0) & (index < bin_count)]
    counts = np.bincount(inside, minlength=bin_count).astype(float)
    logger.debug(
        "Binned %d energies into %d bins (%d underflow, %d overflow)", energies.size, bin_count, underflow, overflow
    )
    return Spectrum(
        bin_lo=bin_lo,
        bin_width=bin_width,
        counts=counts,
        errors=np.sqrt(counts),
        live_time=live_time,
        label=label,
        underflow=underflow,
        overflow=overflow,
    )


def subtract_spectra(on: Spectrum, off: Spectrum) -> Spectrum:
    """``on - norm*off`` with ``norm = on.live_time / off.live_time``; errors added in quadrature."""
    if not on.same_binning(off):
        raise BinningMismatchError(
            f"Cannot subtract spectra with different binning: "
            f"({on.bin_lo}, {on.bin_width}, {on.bin_count}) vs ({off.bin_lo}, {off.bin_width}, {off.bin_count})"
        )
    if off.live_time <= 0:
        raise DomainError("The subtracted spectrum has zero live time")
    norm = on.live_time / off.live_time
    return Spectrum(
        bin_lo=on.bin_lo,
        bin_width=on.bin_width,
        counts=on.counts - norm * off.counts,
        errors=np.sqrt(on.errors**2 + (norm * off.errors) ** 2),
        live_time=on.live_time,
        label=SpectrumLabel.DIFFERENCE,
        underflow=on.underflow - norm * off.underflow,
        overflow=on.overflow - norm * off.overflow,
    )


def roi_mask(spectrum: Spectrum, roi: RegionOfInterest) -> np.ndarray:
    """Bins whose centre lies in ``[roi.lo, roi.hi)``."""
    lo, hi = spectrum.span
    if roi.lo < lo or roi.hi > hi:
        raise DomainError(f"ROI [{roi.lo}, {roi.hi}] keV is outside the spectrum span [{lo}, {hi}] keV")
    centers = spectrum.centers
    return (centers >= roi.lo) & (centers < roi.hi)


def roi_counts(spectrum: Spectrum, roi: RegionOfInterest) -> tuple[float, float]:
    """``(counts, error)`` in the ROI, error as the root-sum-square of bin errors."""
    mask = roi_mask(spectrum, roi)
    return float(spectrum.counts[mask].sum()), float(np.sqrt(np.sum(spectrum.errors[mask] ** 2)))


def roi_report(on: Spectrum, off: Spectrum, roi: RegionOfInterest) -> tuple[Spectrum, RoiReport]:
    """Difference spectrum and the ROI summary of an on/off pair."""
    difference = subtract_spectra(on, off)
    n_on, n_on_error = roi_counts(on, roi)
    n_off, n_off_error = roi_counts(off, roi)
    delta, delta_error = roi_counts(difference, roi)
    report = RoiReport(
        roi_lo=roi.lo,
        roi_hi=roi.hi,
        n_on=n_on,
        n_on_error=n_on_error,
        n_off=n_off,
        n_off_error=n_off_error,
        delta_counts=delta,
        delta_error=delta_error,
        normalization=on.live_time / off.live_time,
        live_time_on=on.live_time,
        live_time_off=off.live_time,
    )
    logger.info(
        "ROI [%.3f, %.3f] keV: on %.0f +- %.1f, off %.0f +- %.1f, difference %.1f +- %.2f",
        roi.lo,
        roi.hi,
        n_on,
        n_on_error,
        n_off,
        n_off_error,
        delta,
        delta_error,
    )
    return difference, report


__all__ = [
    "Spectrum",
    "SpectrumLabel",
    "build_spectrum",
    "subtract_spectra",
    "roi_mask",
    "roi_counts",
    "roi_report",
]
