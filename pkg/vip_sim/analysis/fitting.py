"""Gaussian peak fits for resolution checks."""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import curve_fit

from vip_sim.analysis.spectrum import Spectrum
from vip_sim.errors import DomainError
from vip_sim.models import FWHM_PER_SIGMA

logger = logging.getLogger(__name__)

DEFAULT_FIT_BINS = 200


@dataclass(frozen=True)
class PeakFit:
    centroid: float
    centroid_error: float
    sigma: float
    sigma_error: float
    amplitude: float
    entries: float

    @property
    def fwhm(self) -> float:
        return FWHM_PER_SIGMA * self.sigma

    @property
    def fwhm_error(self) -> float:
        return FWHM_PER_SIGMA * self.sigma_error


def gaussian(x, amplitude, centroid, sigma):
    return amplitude * np.exp(-0.5 * ((x - centroid) / sigma) ** 2)


def fit_gaussian_peak(
    data: Union[Spectrum, np.ndarray],
    window: Optional[tuple[float, float]] = None,
    bins: int = DEFAULT_FIT_BINS,
) -> PeakFit:
    """Least-squares Gaussian fit to a spectrum or to raw energies.

    Raw energies are histogrammed into ``bins`` bins over ``window``
    (default: mean +- 5 standard deviations). Bins are weighted by their
    Poisson error, empty bins by 1.
    """
    if isinstance(data, Spectrum):
        x, y = data.centers, np.asarray(data.counts, dtype=float)
        if window is not None:
            keep = (x >= window[0]) & (x < window[1])
            x, y = x[keep], y[keep]
    else:
        energies = np.asarray(data, dtype=float).ravel()
        if energies.size < 3:
            raise DomainError("At least three energies are needed for a peak fit")
        if window is None:
            mean, std = energies.mean(), energies.std()
            window = (mean - 5 * std, mean + 5 * std)
        y, edges = np.histogram(energies, bins=bins, range=window)
        x = 0.5 * (edges[:-1] + edges[1:])
        y = y.astype(float)

    if x.size < 3 or y.sum() <= 0:
        raise DomainError("Not enough populated bins for a peak fit")
    centroid0 = float(np.sum(x * y) / y.sum())
    sigma0 = float(np.sqrt(np.sum(y * (x - centroid0) ** 2) / y.sum())) or float(x[1] - x[0])
    weights = np.sqrt(np.where(y > 0, y, 1.0))
    try:
        popt, pcov = curve_fit(gaussian, x, y, p0=(y.max(), centroid0, sigma0), sigma=weights, absolute_sigma=True)
    except RuntimeError as exc:
        raise DomainError(f"Gaussian fit did not converge: {exc}") from exc
    errors = np.sqrt(np.diag(pcov))
    fit = PeakFit(
        centroid=float(popt[1]),
        centroid_error=float(errors[1]),
        sigma=abs(float(popt[2])),
        sigma_error=float(errors[2]),
        amplitude=float(popt[0]),
        entries=float(y.sum()),
    )
    logger.debug(f"Peak at {fit.centroid:.4f} keV, FWHM {1000 * fit.fwhm:.1f} +- {1000 * fit.fwhm_error:.1f} eV")
    return fit


__all__ = ["DEFAULT_FIT_BINS", "PeakFit", "gaussian", "fit_gaussian_peak"]
