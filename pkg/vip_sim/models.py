"""Pydantic models for the values passed between modules.

Everything here is immutable once built (``frozen=True``) so a single
instance can be shared by every worker of a Monte Carlo run. Array-valued
types (spectra, frames, attenuation tables) live next to the code that
builds them as frozen dataclasses instead.
"""

from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

#: FWHM of a Gaussian in units of its sigma, 2*sqrt(2*ln 2).
FWHM_PER_SIGMA = 2.35482

#: Panels reported dead in the 2005 campaign (14 of 16 read out).
DEFAULT_DEAD_PANELS = (14, 15)


class TransitionLabel(str, Enum):
    NORMAL_KALPHA = "NormalKAlpha"
    PEP_VIOLATING_KALPHA = "PepViolatingKAlpha"
    NORMAL_KBETA = "NormalKBeta"


class TransitionLine(BaseModel):
    """An X-ray line of copper."""

    model_config = ConfigDict(frozen=True)

    label: TransitionLabel
    energy: float = Field(..., gt=0, description="Line energy in keV")
    energy_uncertainty: float = Field(default=0.0, ge=0, description="Theoretical uncertainty in keV")


class ConductorSpec(BaseModel):
    """The copper electrode the current flows through.

    ``length_d`` is the electrode length D along the current and
    ``mean_free_path_mu`` the electron mean free path mu; both in cm. The
    capture floor is the assumed lower bound of capture over scattering
    probability.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    length_d: float = Field(default=8.8, gt=0, description="Electrode length D along the current, cm")
    mean_free_path_mu: float = Field(default=3.9e-6, gt=0, description="Electron mean free path in copper, cm")
    capture_to_scatter_floor: float = Field(default=0.1, gt=0, le=1)


class RunSummary(BaseModel):
    """Integrated bookkeeping of one current-on measurement campaign."""

    model_config = ConfigDict(frozen=True)

    integrated_charge_q: float = Field(..., ge=0, description="Sum of I*dt over the run, coulombs")
    current: float = Field(..., ge=0, description="Mean current, amperes")
    live_time: float = Field(..., ge=0, description="Minutes")
    readout_cadence: float = Field(default=10.0, gt=0, description="Minutes between CCD read-outs")
    ccd_live_count: int = Field(default=14, ge=0, le=16)

    @classmethod
    def from_constant_current(
        cls,
        current: float,
        live_time: float,
        readout_cadence: float = 10.0,
        ccd_live_count: int = 14,
    ) -> "RunSummary":
        return cls(
            integrated_charge_q=current * live_time * 60.0,
            current=current,
            live_time=live_time,
            readout_cadence=readout_cadence,
            ccd_live_count=ccd_live_count,
        )

    @classmethod
    def from_segments(
        cls,
        segments: list[tuple[float, float]],
        readout_cadence: float = 10.0,
        ccd_live_count: int = 14,
    ) -> "RunSummary":
        """Accumulate ``(current_A, minutes)`` segments into one summary.

        ``current`` is the charge-weighted mean, i.e. Q over total time.
        """
        charge = sum(current * minutes * 60.0 for current, minutes in segments)
        live_time = sum(minutes for _, minutes in segments)
        mean_current = charge / (live_time * 60.0) if live_time > 0 else 0.0
        return cls(
            integrated_charge_q=charge,
            current=mean_current,
            live_time=live_time,
            readout_cadence=readout_cadence,
            ccd_live_count=ccd_live_count,
        )

    @property
    def readout_count(self) -> int:
        """Number of CCD read-outs in the run."""
        return int(round(self.live_time / self.readout_cadence))


class DetectorGeometry(BaseModel):
    """Copper cylinder surrounded by a ring of flat CCD panels. Lengths in cm.

    Panel ``k`` sits at azimuth ``2*pi*k/ccd_panel_count`` with its plane
    at ``cylinder_radius + ccd_standoff`` from the axis. Its chips are
    stacked vertically and centred on the cylinder's mid-height. Only the
    chip area inside ``chip_dead_border`` of every edge is sensitive.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    cylinder_radius: float = Field(default=4.5, gt=0)
    cylinder_thickness: float = Field(default=50e-4, gt=0)
    cylinder_height: float = Field(default=8.8, gt=0)
    ccd_standoff: float = Field(default=2.3, gt=0)
    ccd_panel_count: int = Field(default=16, ge=1)
    ccd_chip_width: float = Field(default=2.7, gt=0)
    ccd_chip_height: float = Field(default=2.7, gt=0)
    chips_per_panel: int = Field(default=2, ge=1)
    chip_dead_border: float = Field(default=0.45, ge=0)
    live_panel_mask: tuple[bool, ...] = Field(default=())

    @model_validator(mode="before")
    @classmethod
    def _default_mask(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("live_panel_mask"):
            count = data.get("ccd_panel_count", 16)
            dead = DEFAULT_DEAD_PANELS if count == 16 else ()
            data = {**data, "live_panel_mask": tuple(i not in dead for i in range(count))}
        return data

    @model_validator(mode="after")
    def _check_shape(self) -> "DetectorGeometry":
        if len(self.live_panel_mask) != self.ccd_panel_count:
            raise ValueError(
                f"live_panel_mask has {len(self.live_panel_mask)} entries for {self.ccd_panel_count} panels"
            )
        if self.cylinder_thickness >= self.cylinder_radius:
            raise ValueError("cylinder_thickness must be smaller than cylinder_radius")
        if 2 * self.chip_dead_border >= min(self.ccd_chip_width, self.ccd_chip_height):
            raise ValueError("chip_dead_border leaves no active chip area")
        return self

    @property
    def inner_radius(self) -> float:
        return self.cylinder_radius - self.cylinder_thickness

    @property
    def panel_distance(self) -> float:
        """Distance of every panel plane from the cylinder axis."""
        return self.cylinder_radius + self.ccd_standoff

    @property
    def live_panel_count(self) -> int:
        return sum(self.live_panel_mask)

    def active_chip_bounds(self) -> list[tuple[float, float, float, float]]:
        """``(u_lo, u_hi, z_lo, z_hi)`` of each chip's sensitive area in panel coordinates.

        ``u`` runs along the panel's tangential direction, zero at the
        panel centre.
        """
        half_u = self.ccd_chip_width / 2 - self.chip_dead_border
        z0 = self.cylinder_height / 2 - self.chips_per_panel * self.ccd_chip_height / 2
        bounds = []
        for j in range(self.chips_per_panel):
            lo = z0 + j * self.ccd_chip_height + self.chip_dead_border
            hi = z0 + (j + 1) * self.ccd_chip_height - self.chip_dead_border
            bounds.append((-half_u, half_u, lo, hi))
        return bounds

    def with_mask(self, mask: tuple[bool, ...]) -> "DetectorGeometry":
        return DetectorGeometry(**{**self.model_dump(), "live_panel_mask": tuple(mask)})


class GeometricFactorEstimate(BaseModel):
    """Result of the transport Monte Carlo."""

    model_config = ConfigDict(frozen=True)

    survival_times_acceptance: float = Field(..., ge=0, le=1)
    statistical_error: float = Field(..., ge=0)
    ccd_efficiency_applied: float = Field(..., gt=0, le=1)
    total_factor: float = Field(..., ge=0, le=1)
    sample_count: int = Field(..., ge=1)
    seed: int
    energy: float = Field(..., gt=0, description="Photon energy in keV")
    hit_count: int = Field(default=0, ge=0)
    absorbed_count: int = Field(default=0, ge=0)
    escaped_count: int = Field(default=0, ge=0)


class EnergyScaling(str, Enum):
    CONSTANT = "Constant"
    SQRT_ENERGY = "SqrtEnergy"


class ResolutionModel(BaseModel):
    """Gaussian CCD energy resolution, quoted as FWHM at a reference energy."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fwhm_at_ref: float = Field(default=0.320, ge=0, description="keV")
    ref_energy: float = Field(default=8.0, gt=0, description="keV")
    scaling: EnergyScaling = EnergyScaling.CONSTANT

    def sigma_at(self, energy: Any) -> Any:
        """Gaussian sigma (keV) at ``energy``; works on scalars and arrays."""
        sigma = self.fwhm_at_ref / FWHM_PER_SIGMA
        if self.scaling is EnergyScaling.SQRT_ENERGY:
            return sigma * np.sqrt(np.asarray(energy, dtype=float) / self.ref_energy)
        return sigma * np.ones_like(energy, dtype=float)


class EnergyCalibration(BaseModel):
    """Linear ADC-to-energy conversion: E[eV] = gain * adc + offset."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gain: float = Field(default=3.65, gt=0, description="eV per ADC count")
    offset: float = Field(default=0.0, description="eV")

    def to_adc(self, energy_kev: Any) -> Any:
        return (energy_kev * 1000.0 - self.offset) / self.gain

    def to_kev(self, adc: Any) -> Any:
        return (self.gain * adc + self.offset) / 1000.0


class RegionOfInterest(BaseModel):
    """Energy window around the violating line, keV.

    The default is one detector FWHM (0.320 keV) plus the 0.010 keV
    theoretical uncertainty, centred on 7.729 keV.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    lo: float = 7.564
    hi: float = 7.894

    @model_validator(mode="after")
    def _ordered(self) -> "RegionOfInterest":
        if not self.lo < self.hi:
            raise ValueError(f"ROI lower edge {self.lo} must be below upper edge {self.hi}")
        return self

    @property
    def width(self) -> float:
        return self.hi - self.lo


class RoiReport(BaseModel):
    """ROI content of a current-on/current-off pair and their difference."""

    model_config = ConfigDict(frozen=True)

    roi_lo: float
    roi_hi: float
    n_on: float
    n_on_error: float
    n_off: float
    n_off_error: float
    delta_counts: float
    delta_error: float
    normalization: float = Field(..., ge=0, description="on.live_time / off.live_time applied to the off run")
    live_time_on: float
    live_time_off: float


class LimitResult(BaseModel):
    """Upper limit on beta^2/2 and its equivalents."""

    model_config = ConfigDict(frozen=True)

    delta_counts: Optional[float] = Field(default=None, description="Observed ROI difference, if known")
    delta_error: float = Field(..., gt=0)
    n_sigma: float = Field(..., gt=0)
    coefficient_k: float = Field(..., gt=0)
    beta2_over_2_limit: float = Field(..., ge=0)
    quon_half_1_plus_q: float = Field(..., ge=0, description="(1+q)/2, equal to the beta^2/2 limit")
    one_plus_q: float = Field(..., ge=0, description="1+q; q itself rounds to -1 in double precision")
    confidence_label: str
    prior_limit: float = Field(..., gt=0)
    improvement_factor: float = Field(..., gt=0)


class ProjectionResult(BaseModel):
    """Sensitivity of a future campaign scaled from a measured limit."""

    model_config = ConfigDict(frozen=True)

    base_limit: float = Field(..., gt=0)
    background_scale: float = Field(..., gt=0)
    live_time_scale: float = Field(..., gt=0)
    current_scale: float = Field(..., gt=0)
    scale_factor: float = Field(..., gt=0)
    projected_limit: float = Field(..., gt=0)
    model: str = "limit ~ sqrt(background * live_time) / (current * live_time)"
