"""Gaussian energy smearing at the CCD resolution."""

import numpy as np

from vip_sim.errors import DomainError
from vip_sim.models import ResolutionModel


def smear_energy(true_energy: float, model: ResolutionModel, rng: np.random.Generator) -> float:
    """One measured energy (keV) for a deposit of ``true_energy`` keV."""
    return float(smear_energies(np.array([true_energy], dtype=float), model, rng)[0])


def smear_energies(true_energies: np.ndarray, model: ResolutionModel, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`smear_energy`.

    Negative draws are redrawn, not clamped, so the line shape above zero
    stays Gaussian. Zero FWHM returns the inputs untouched and consumes no
    random numbers.
    """
    true_energies = np.asarray(true_energies, dtype=float)
    if true_energies.size and np.any(true_energies <= 0):
        raise DomainError(f"True energy must be positive, got {true_energies[true_energies <= 0][0]}")
    if model.fwhm_at_ref == 0 or true_energies.size == 0:
        return true_energies.copy()

    sigma = model.sigma_at(true_energies)
    measured = rng.normal(true_energies, sigma)
    negative = measured < 0
    while np.any(negative):
        measured[negative] = rng.normal(true_energies[negative], sigma[negative])
        negative = measured < 0
    return measured


__all__ = ["smear_energy", "smear_energies"]
