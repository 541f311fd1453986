"""Ray geometry of the copper shell and the CCD panel ring.

The batch functions work on ``(n, 3)`` arrays of points and unit
directions and are what the Monte Carlo runs; the single-ray functions
validate their inputs and delegate to them.

Shell: ``inner_radius <= rho <= cylinder_radius``, ``0 <= z <= cylinder_height``
with ``rho`` the distance from the z axis.
"""

import numpy as np

from vip_sim.errors import DomainError
from vip_sim.models import DetectorGeometry

#: Relative slack for "point is inside the shell" and "direction is unit".
_CONTAINMENT_TOL = 1e-12
_UNIT_TOL = 1e-12


def sample_emission_points(geometry: DetectorGeometry, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` points uniform in the shell volume.

    Radius is drawn uniform in rho^2 (uniform volume across the thickness),
    azimuth and height uniform.
    """
    r_in2 = geometry.inner_radius**2
    rho = np.sqrt(r_in2 + rng.random(n) * (geometry.cylinder_radius**2 - r_in2))
    phi = rng.random(n) * (2 * np.pi)
    z = rng.random(n) * geometry.cylinder_height
    return np.column_stack((rho * np.cos(phi), rho * np.sin(phi), z))


def sample_emission_point(geometry: DetectorGeometry, rng: np.random.Generator) -> np.ndarray:
    return sample_emission_points(geometry, rng, 1)[0]


def isotropic_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    cos_theta = 2.0 * rng.random(n) - 1.0
    sin_theta = np.sqrt(np.clip(1.0 - cos_theta**2, 0.0, None))
    psi = rng.random(n) * (2 * np.pi)
    return np.column_stack((sin_theta * np.cos(psi), sin_theta * np.sin(psi), cos_theta))


def _shell_intervals(points: np.ndarray, directions: np.ndarray, geometry: DetectorGeometry):
    """Ray parameters bounding the copper along each ray.

    Returns ``(t_end, t_hole_in, t_hole_out)``: the ray is inside the
    outer cylinder and between the end planes for ``0 <= t <= t_end``,
    and inside the hollow for ``t_hole_in < t < t_hole_out`` (both ``inf``
    when the ray never enters it).
    """
    px, py, pz = points[:, 0], points[:, 1], points[:, 2]
    dx, dy, dz = directions[:, 0], directions[:, 1], directions[:, 2]
    a = dx * dx + dy * dy
    b = 2.0 * (px * dx + py * dy)
    c = px * px + py * py
    vertical = a <= 1e-300

    with np.errstate(divide="ignore", invalid="ignore"):
        # Outer cylinder, written to avoid cancellation for points at the surface.
        rem_out = np.clip(geometry.cylinder_radius**2 - c, 0.0, None)
        sq_out = np.sqrt(b * b + 4.0 * a * rem_out)
        t_out = np.where(b >= 0, 2.0 * rem_out / (b + sq_out), (sq_out - b) / (2.0 * a))
        t_out = np.where(vertical, np.inf, t_out)

        t_z = np.where(dz > 0, (geometry.cylinder_height - pz) / dz, np.where(dz < 0, -pz / dz, np.inf))
        t_z = np.clip(t_z, 0.0, None)

        # Inner cylinder: only rays heading inward (b < 0) can enter the hollow.
        rem_in = np.clip(c - geometry.inner_radius**2, 0.0, None)
        disc_in = b * b - 4.0 * a * rem_in
        enters = (~vertical) & (b < 0) & (disc_in > 0)
        q = -0.5 * (b - np.sqrt(np.where(enters, disc_in, 0.0)))
        t_hole_in = np.where(enters, rem_in / q, np.inf)
        t_hole_out = np.where(enters, q / a, np.inf)

    return np.minimum(t_out, t_z), t_hole_in, t_hole_out


def first_exit_lengths(points: np.ndarray, directions: np.ndarray, geometry: DetectorGeometry) -> np.ndarray:
    """Copper traversed before the ray first leaves the shell through any surface."""
    t_end, t_hole_in, _ = _shell_intervals(points, directions, geometry)
    return np.minimum(t_end, t_hole_in)


def chord_lengths(points: np.ndarray, directions: np.ndarray, geometry: DetectorGeometry) -> np.ndarray:
    """Total copper along the whole ray, including the far wall for inward rays."""
    t_end, t_hole_in, t_hole_out = _shell_intervals(points, directions, geometry)
    overlap = np.clip(np.minimum(t_hole_out, t_end) - np.minimum(t_hole_in, t_end), 0.0, None)
    overlap = np.where(np.isfinite(t_hole_in), overlap, 0.0)
    return t_end - overlap


def validate_ray(point: np.ndarray, direction: np.ndarray, geometry: DetectorGeometry) -> None:
    if point.shape != (3,) or direction.shape != (3,):
        raise DomainError("Point and direction must be 3-vectors")
    if abs(np.linalg.norm(direction) - 1.0) > _UNIT_TOL:
        raise DomainError(f"Direction must be a unit vector, |d| = {np.linalg.norm(direction)!r}")
    rho = np.hypot(point[0], point[1])
    slack = _CONTAINMENT_TOL * geometry.cylinder_radius
    inside = (
        geometry.inner_radius - slack <= rho <= geometry.cylinder_radius + slack
        and -slack <= point[2] <= geometry.cylinder_height + slack
    )
    if not inside:
        raise DomainError(f"Point {point.tolist()} is outside the copper shell")


def path_length_in_copper(point, direction, geometry: DetectorGeometry) -> float:
    """Exact copper length from ``point`` along ``direction`` to the first shell exit (cm)."""
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    validate_ray(point, direction, geometry)
    return float(first_exit_lengths(point[None, :], direction[None, :], geometry)[0])


def copper_chord_length(point, direction, geometry: DetectorGeometry) -> float:
    """Total copper length along the ray from ``point`` to infinity (cm)."""
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    validate_ray(point, direction, geometry)
    return float(chord_lengths(point[None, :], direction[None, :], geometry)[0])


def panel_hits(points: np.ndarray, directions: np.ndarray, geometry: DetectorGeometry):
    """First live chip each ray reaches.

    Returns ``(panel, impact)``: panel index per ray (``-1`` for none) and
    the ``(n, 3)`` impact points (``nan`` rows for misses).
    """
    n = points.shape[0]
    best_t = np.full(n, np.inf)
    panel = np.full(n, -1, dtype=np.int64)
    distance = geometry.panel_distance
    chips = geometry.active_chip_bounds()

    for k, live in enumerate(geometry.live_panel_mask):
        if not live:
            continue
        angle = 2.0 * np.pi * k / geometry.ccd_panel_count
        nx, ny = np.cos(angle), np.sin(angle)
        toward = directions[:, 0] * nx + directions[:, 1] * ny
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(toward > 0, (distance - (points[:, 0] * nx + points[:, 1] * ny)) / toward, np.inf)
            hx = points[:, 0] + t * directions[:, 0]
            hy = points[:, 1] + t * directions[:, 1]
            hz = points[:, 2] + t * directions[:, 2]
            u = -ny * hx + nx * hy
            on_chip = np.zeros(n, dtype=bool)
            for u_lo, u_hi, z_lo, z_hi in chips:
                on_chip |= (u >= u_lo) & (u <= u_hi) & (hz >= z_lo) & (hz <= z_hi)
        closer = on_chip & (t > 0) & (t < best_t)
        best_t = np.where(closer, t, best_t)
        panel = np.where(closer, k, panel)

    hit = panel >= 0
    impact = np.full((n, 3), np.nan)
    impact[hit] = points[hit] + best_t[hit, None] * directions[hit]
    return panel, impact


def chip_solid_angle_fraction(half_width: float, half_height: float, distance: float) -> float:
    """Omega/4pi of a rectangle seen from a point on its central normal.

    Used as the analytic reference for the transport acceptance.
    """
    a, b, d = half_width, half_height, distance
    omega = 4.0 * np.arctan(a * b / (d * np.sqrt(d * d + a * a + b * b)))
    return float(omega / (4.0 * np.pi))


__all__ = [
    "sample_emission_points",
    "sample_emission_point",
    "isotropic_directions",
    "first_exit_lengths",
    "chord_lengths",
    "validate_ray",
    "path_length_in_copper",
    "copper_chord_length",
    "panel_hits",
    "chip_solid_angle_fraction",
]
