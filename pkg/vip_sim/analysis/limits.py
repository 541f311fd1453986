"""Upper limit on beta^2/2 from an ROI difference, and sensitivity projections.

The limit follows the n-standard-deviation convention on the error of the
on/off difference, ignoring its central value:

    beta^2/2 <= n_sigma * delta_error / K

In the quon picture the same number bounds (1+q)/2.
"""

import logging
import math
from typing import Optional, Union

from scipy.special import erf

from vip_sim.errors import DomainError
from vip_sim.models import LimitResult, ProjectionResult
from vip_sim.physics import PRIOR_LIMIT_BETA2_OVER_2

logger = logging.getLogger(__name__)

#: One year of current-on data over the 14 510-minute campaign.
ONE_YEAR_LIVE_TIME_SCALE = 525_600 / 14_510

#: Named ``(background_scale, live_time_scale, current_scale)`` triples for
#: an underground campaign with 10-100 times less background.
PROJECTION_PRESETS: dict[str, tuple[float, float, float]] = {
    "lngs-1y-bkg100": (0.01, 36.5, 1.0),
    "lngs-1y-bkg10": (0.1, 36.5, 1.0),
    "lngs-2y": (0.01, ONE_YEAR_LIVE_TIME_SCALE, 1.0),
}


def confidence_label(n_sigma: float) -> str:
    """Two-sided Gaussian coverage of ``n_sigma``, e.g. ``"99.7% CL"`` for 3."""
    if n_sigma <= 0:
        raise DomainError(f"n_sigma must be positive, got {n_sigma}")
    coverage = float(erf(n_sigma / math.sqrt(2.0)))
    return f"{100.0 * coverage:.1f}% CL"


def compute_limit(
    delta_error: float,
    coefficient_k: float,
    n_sigma: float = 3.0,
    delta_counts: Optional[float] = None,
    prior_limit: float = PRIOR_LIMIT_BETA2_OVER_2,
) -> LimitResult:
    if delta_error <= 0:
        raise DomainError(f"delta_error must be positive, got {delta_error}")
    if coefficient_k <= 0:
        raise DomainError(f"Signal coefficient K must be positive, got {coefficient_k}")
    label = confidence_label(n_sigma)
    limit = n_sigma * delta_error / coefficient_k
    result = LimitResult(
        delta_counts=delta_counts,
        delta_error=delta_error,
        n_sigma=n_sigma,
        coefficient_k=coefficient_k,
        beta2_over_2_limit=limit,
        quon_half_1_plus_q=limit,
        one_plus_q=2.0 * limit,
        confidence_label=label,
        prior_limit=prior_limit,
        improvement_factor=prior_limit / limit,
    )
    logger.info(f"beta^2/2 <= {limit:.4e} at {label} (K={coefficient_k:.4e}, error={delta_error:.3f})")
    return result


def project_sensitivity(
    base: Union[LimitResult, float],
    background_scale: float,
    live_time_scale: float,
    current_scale: float,
) -> ProjectionResult:
    """Scale a limit to a campaign with different background, duration and current.

    The error of the difference grows as sqrt(B*T) while the signal
    coefficient grows as I*T.
    """
    base_limit = base.beta2_over_2_limit if isinstance(base, LimitResult) else float(base)
    for name, value in (
        ("base limit", base_limit),
        ("background_scale", background_scale),
        ("live_time_scale", live_time_scale),
        ("current_scale", current_scale),
    ):
        if value <= 0:
            raise DomainError(f"{name} must be positive, got {value}")
    factor = math.sqrt(background_scale * live_time_scale) / (current_scale * live_time_scale)
    return ProjectionResult(
        base_limit=base_limit,
        background_scale=background_scale,
        live_time_scale=live_time_scale,
        current_scale=current_scale,
        scale_factor=factor,
        projected_limit=base_limit * factor,
    )


def projection_preset(name: str) -> tuple[float, float, float]:
    try:
        return PROJECTION_PRESETS[name]
    except KeyError:
        raise DomainError(f"Unknown projection preset {name!r}; choose from {sorted(PROJECTION_PRESETS)}") from None


__all__ = [
    "ONE_YEAR_LIVE_TIME_SCALE",
    "PROJECTION_PRESETS",
    "confidence_label",
    "compute_limit",
    "project_sensitivity",
    "projection_preset",
]
