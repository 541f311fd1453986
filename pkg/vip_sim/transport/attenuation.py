"""Photon attenuation lengths in copper and Beer-Lambert survival."""

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from vip_sim.errors import DomainError, FileFormatError

logger = logging.getLogger(__name__)

ATTENUATION_HEADER = ("energy_keV", "attenuation_length_cm")

#: Every table must cover the K-alpha region, normal and violating lines.
REQUIRED_SPAN = (7.0, 9.0)

COPPER_DENSITY = 8.96


@dataclass(frozen=True, eq=False)
class AttenuationTable:
    """Attenuation length versus photon energy, interpolated log-log between nodes."""

    energies: np.ndarray
    attenuation_lengths: np.ndarray
    material_density: float = COPPER_DENSITY
    _log_e: np.ndarray = field(init=False, repr=False, compare=False)
    _log_l: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        energies = np.array(self.energies, dtype=float)
        lengths = np.array(self.attenuation_lengths, dtype=float)
        if energies.ndim != 1 or energies.shape != lengths.shape or energies.size < 2:
            raise DomainError("Attenuation table needs at least two (energy, length) nodes")
        if np.any(np.diff(energies) <= 0):
            raise DomainError("Attenuation table energies must be strictly increasing")
        if np.any(lengths <= 0):
            raise DomainError("Attenuation lengths must be strictly positive")
        if energies[0] > REQUIRED_SPAN[0] or energies[-1] < REQUIRED_SPAN[1]:
            raise DomainError(
                f"Attenuation table spans [{energies[0]}, {energies[-1]}] keV; "
                f"it must cover at least {list(REQUIRED_SPAN)} keV"
            )
        energies.flags.writeable = False
        lengths.flags.writeable = False
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "attenuation_lengths", lengths)
        object.__setattr__(self, "_log_e", np.log(energies))
        object.__setattr__(self, "_log_l", np.log(lengths))

    @property
    def span(self) -> tuple[float, float]:
        return float(self.energies[0]), float(self.energies[-1])

    def attenuation_length(self, energy: float) -> float:
        """Attenuation length (cm) at ``energy`` keV."""
        lo, hi = self.span
        if not lo <= energy <= hi:
            raise DomainError(f"Energy {energy} keV is outside the attenuation table span [{lo}, {hi}]")
        return float(np.exp(np.interp(np.log(energy), self._log_e, self._log_l)))

    @classmethod
    def from_csv_text(cls, text: str, material_density: float = COPPER_DENSITY) -> "AttenuationTable":
        from vip_sim.storage.formats import read_numeric_csv

        columns = read_numeric_csv(text, ATTENUATION_HEADER)
        return cls(columns[0], columns[1], material_density=material_density)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "AttenuationTable":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise FileFormatError(f"Cannot read attenuation table {path}: {exc}") from exc
        logger.info("Loaded attenuation table from %s", path)
        return cls.from_csv_text(text)

    @classmethod
    def copper(cls) -> "AttenuationTable":
        """The shipped copper table."""
        text = resources.files("vip_sim").joinpath("data/copper_attenuation.csv").read_text(encoding="utf-8")
        return cls.from_csv_text(text)


def attenuation_survival(path: float, energy: float, table: AttenuationTable) -> float:
    """Probability that a photon crosses ``path`` cm of material unabsorbed."""
    if path < 0:
        raise DomainError(f"Path length must be non-negative, got {path}")
    return float(np.exp(-path / table.attenuation_length(energy)))


__all__ = ["ATTENUATION_HEADER", "COPPER_DENSITY", "REQUIRED_SPAN", "AttenuationTable", "attenuation_survival"]
