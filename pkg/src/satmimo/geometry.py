"""Antenna positioning for GEO line-of-sight MIMO links.

Ground arrays are uniform linear arrays (ULAs) tangent to a spherical Earth,
satellite arrays are ULAs in the equatorial plane along the orbit. All angles
are taken in degrees at the API boundary and converted once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "GroundArray",
    "OrbitArray",
    "GeometrySummary",
    "DesignResidual",
    "DesignSolution",
    "DegenerateGeometryError",
    "ecef_ground_antenna",
    "ecef_satellite_antenna",
    "path_length",
    "range_factor",
    "within_range_envelope",
    "geometry_summary",
    "path_length_taylor",
    "design_lhs",
    "optimality_residual",
    "optimal_ground_spacing",
    "solve_design",
]

RANGE_FACTOR_ENVELOPE = (1.0, 1.16)
DEGENERATE_REDUCTION = 1e-6


@dataclass(frozen=True)
class PhysicalConstants:
    earth_radius_m: float = 6378.1e3
    geo_radius_m: float = 42164.2e3
    min_slant_range_m: float = 35786.1e3
    speed_of_light_mps: float = 299792458.0


CONSTANTS = PhysicalConstants()


class DegenerateGeometryError(ValueError):
    """The array is collinear with the iso-phase direction; no finite spacing exists."""


@dataclass(frozen=True)
class GroundArray:
    """ULA on the Earth's surface.

    ``orientation_deg`` is measured from the east-west direction towards north.
    """

    center_lat_deg: float
    center_lon_deg: float
    orientation_deg: float = 0.0
    spacing_m: float = 0.0
    count: int = 2

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"antenna count must be >= 1, got {self.count}")
        if self.spacing_m < 0:
            raise ValueError(f"spacing must be non-negative, got {self.spacing_m}")
        if abs(self.center_lat_deg) > 90:
            raise ValueError(f"latitude out of range: {self.center_lat_deg}")

    def offsets(self) -> np.ndarray:
        m = np.arange(1, self.count + 1)
        return self.spacing_m * (m - 0.5 - self.count / 2)

    def positions(self) -> np.ndarray:
        return np.array([ecef_ground_antenna(self, m) for m in range(1, self.count + 1)])

    def direction(self) -> np.ndarray:
        """Unit vector along the array axis (ECEF)."""
        lat, lon, delta = np.radians([self.center_lat_deg, self.center_lon_deg, self.orientation_deg])
        return np.array([
            -(np.sin(lon) * np.cos(delta) + np.sin(lat) * np.cos(lon) * np.sin(delta)),
            np.cos(lon) * np.cos(delta) - np.sin(lat) * np.sin(lon) * np.sin(delta),
            np.cos(lat) * np.sin(delta),
        ])

    def center(self) -> np.ndarray:
        lat, lon = np.radians([self.center_lat_deg, self.center_lon_deg])
        r = CONSTANTS.earth_radius_m
        return r * np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


@dataclass(frozen=True)
class OrbitArray:
    """ULA in the equatorial plane, tangential to the GEO arc."""

    center_lon_deg: float
    spacing_m: float = 0.0
    count: int = 2

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"antenna count must be >= 1, got {self.count}")
        if self.spacing_m < 0:
            raise ValueError(f"spacing must be non-negative, got {self.spacing_m}")

    def offsets(self) -> np.ndarray:
        z = np.arange(1, self.count + 1)
        return self.spacing_m * (z - 0.5 - self.count / 2)

    def positions(self) -> np.ndarray:
        return np.array([ecef_satellite_antenna(self, z) for z in range(1, self.count + 1)])

    def center(self) -> np.ndarray:
        lon = math.radians(self.center_lon_deg)
        return CONSTANTS.geo_radius_m * np.array([math.cos(lon), math.sin(lon), 0.0])


def ecef_ground_antenna(array: GroundArray, m: int) -> np.ndarray:
    """ECEF position of the m-th (1-based) ground antenna in meters."""
    if not 1 <= m <= array.count:
        raise IndexError(f"antenna index {m} outside 1..{array.count}")
    offset = array.spacing_m * (m - 0.5 - array.count / 2)
    return array.center() + offset * array.direction()


def ecef_satellite_antenna(array: OrbitArray, z: int) -> np.ndarray:
    """ECEF position of the z-th (1-based) satellite antenna in meters."""
    if not 1 <= z <= array.count:
        raise IndexError(f"antenna index {z} outside 1..{array.count}")
    lon = math.radians(array.center_lon_deg)
    offset = array.spacing_m * (z - 0.5 - array.count / 2)
    r = CONSTANTS.geo_radius_m
    return np.array([r * math.cos(lon) - offset * math.sin(lon), r * math.sin(lon) + offset * math.cos(lon), 0.0])


def path_length(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def range_factor(lat_deg: float, delta_lon_deg: float) -> float:
    """Closed-form relative slant range ``r / r_min``.

    Uses the rounded coefficients 1.42 and 0.42; the exact mean range is
    available from :func:`geometry_summary`.
    """
    if abs(lat_deg) > 90:
        raise ValueError(f"latitude out of range: {lat_deg}")
    lat, dlon = math.radians(lat_deg), math.radians(delta_lon_deg)
    return math.sqrt(1.42 - 0.42 * math.cos(lat) * math.cos(dlon))


def within_range_envelope(value: float) -> bool:
    """True when a range factor lies inside the visibility-limited [1, 1.16] band."""
    lo, hi = RANGE_FACTOR_ENVELOPE
    return lo - 1e-12 <= value <= hi


@dataclass(frozen=True)
class GeometrySummary:
    mean_range_m: float
    range_factor: float
    alpha: float
    beta: float
    psi: float
    reduction_factor: float

    @property
    def in_envelope(self) -> bool:
        return within_range_envelope(self.range_factor)


def _substitutions(lat_deg, delta_lon_deg, orientation_deg):
    lat, dlon, delta = np.radians([lat_deg, delta_lon_deg, orientation_deg])
    alpha = math.cos(delta) * math.sin(dlon) + math.sin(lat) * math.sin(delta) * math.cos(dlon)
    beta = math.cos(lat) * math.sin(dlon)
    psi = math.sin(lat) * math.sin(delta) * math.sin(dlon) - math.cos(delta) * math.cos(dlon)
    return alpha, beta, psi


def _center_range(lat_deg, delta_lon_deg) -> float:
    re, ro = CONSTANTS.earth_radius_m, CONSTANTS.geo_radius_m
    c = math.cos(math.radians(lat_deg)) * math.cos(math.radians(delta_lon_deg))
    return math.sqrt(re * re + ro * ro - 2.0 * re * ro * c)


def geometry_summary(lat_deg: float, delta_lon_deg: float, orientation_deg: float = 0.0) -> GeometrySummary:
    """Design-condition substitutions for an array centered at (lat, lon_sat + delta_lon).

    The mean range is the exact center-to-center distance and the cross-term
    coefficient is ``R_earth * R_geo / r**2`` (0.21 / range_factor**2 to four digits).
    """
    alpha, beta, psi = _substitutions(lat_deg, delta_lon_deg, orientation_deg)
    r = _center_range(lat_deg, delta_lon_deg)
    coef = CONSTANTS.earth_radius_m * CONSTANTS.geo_radius_m / (r * r)
    return GeometrySummary(
        mean_range_m=r,
        range_factor=r / CONSTANTS.min_slant_range_m,
        alpha=alpha,
        beta=beta,
        psi=psi,
        reduction_factor=psi + coef * alpha * beta,
    )


def _summary_for(ground: GroundArray, orbit: OrbitArray) -> GeometrySummary:
    return geometry_summary(ground.center_lat_deg, ground.center_lon_deg - orbit.center_lon_deg, ground.orientation_deg)


def path_length_taylor(ground: GroundArray, orbit: OrbitArray, m: int, z: int) -> float:
    """Second-order Taylor approximation of the (m, z) path length."""
    if not 1 <= m <= ground.count:
        raise IndexError(f"ground index {m} outside 1..{ground.count}")
    if not 1 <= z <= orbit.count:
        raise IndexError(f"orbit index {z} outside 1..{orbit.count}")
    s = _summary_for(ground, orbit)
    r = s.mean_range_m
    dm = ground.offsets()[m - 1]
    dz = orbit.offsets()[z - 1]
    re, ro = CONSTANTS.earth_radius_m, CONSTANTS.geo_radius_m
    delta = 2.0 * (dm * ro * s.alpha - dz * re * s.beta + dm * dz * s.psi) / r**2 + (dm**2 + dz**2) / r**2
    return r * (1.0 + delta / 2.0 - delta**2 / 8.0)


def design_lhs(ground: GroundArray, orbit: OrbitArray) -> float:
    """Left-hand side ``d_SL * d_ES / r * reduction_factor`` of the design condition, in meters."""
    s = _summary_for(ground, orbit)
    return orbit.spacing_m * ground.spacing_m / s.mean_range_m * s.reduction_factor


@dataclass(frozen=True)
class DesignResidual:
    """Outcome of checking a spacing against the orthogonality condition.

    ``v_index`` is the nearest admissible index (not a multiple of the divisor)
    and ``residual_m`` is measured against it. ``nearest_integer`` may be a
    multiple of the divisor, in which case ``keyhole`` is set.
    """

    residual_m: float
    v_index: int
    nearest_integer: int
    keyhole: bool
    lhs_m: float

    @property
    def orthogonal(self) -> bool:
        return not self.keyhole


def _nearest_admissible(x: float, n: int) -> int:
    lo = math.floor(x)
    candidates = [c for c in range(max(1, lo - n), lo + n + 2) if c % n != 0]
    # ties go to the smaller |v|
    return min(candidates, key=lambda c: (abs(x - c), abs(c)))


def optimality_residual(ground: GroundArray, orbit: OrbitArray, wavelength_m: float, n_divisor: int) -> DesignResidual:
    if n_divisor < 2:
        raise ValueError("n_divisor must be >= 2")
    s = _summary_for(ground, orbit)
    if abs(s.reduction_factor) < DEGENERATE_REDUCTION:
        raise DegenerateGeometryError("array collinear with iso-phase direction")
    lhs = abs(design_lhs(ground, orbit))
    unit = wavelength_m / n_divisor
    x = lhs / unit
    nearest = int(math.floor(x + 0.5))
    v = _nearest_admissible(x, n_divisor)
    return DesignResidual(
        residual_m=lhs - v * unit,
        v_index=v,
        nearest_integer=nearest,
        keyhole=nearest % n_divisor == 0,
        lhs_m=lhs,
    )


def optimal_ground_spacing(
    orbit: OrbitArray,
    carrier_hz: float,
    lat_deg: float,
    delta_lon_deg: float,
    orientation_deg: float = 0.0,
    v: int = 1,
    n_divisor: int | None = None,
) -> float:
    """Ground spacing satisfying the design condition for index ``v``.

    ``n_divisor`` defaults to the satellite antenna count.
    """
    n = orbit.count if n_divisor is None else n_divisor
    if v % n == 0:
        raise ValueError(f"v={v} is a multiple of the antenna count {n} (keyhole)")
    if orbit.spacing_m <= 0:
        raise ValueError("satellite spacing must be positive")
    s = geometry_summary(lat_deg, delta_lon_deg, orientation_deg)
    if abs(s.reduction_factor) < DEGENERATE_REDUCTION:
        raise DegenerateGeometryError("array collinear with iso-phase direction")
    wavelength = CONSTANTS.speed_of_light_mps / carrier_hz
    return abs(v) * wavelength * s.mean_range_m / (n * orbit.spacing_m * abs(s.reduction_factor))


@dataclass(frozen=True)
class DesignSolution:
    ground_spacing_m: float
    v_index: int
    residual_m: float


def solve_design(
    orbit: OrbitArray,
    carrier_hz: float,
    lat_deg: float,
    lon_deg: float,
    orientation_deg: float = 0.0,
    v: int = 1,
    count: int = 2,
) -> DesignSolution:
    n = max(orbit.count, count)
    spacing = optimal_ground_spacing(orbit, carrier_hz, lat_deg, lon_deg - orbit.center_lon_deg, orientation_deg, v, n)
    ground = GroundArray(lat_deg, lon_deg, orientation_deg, spacing, count)
    res = optimality_residual(ground, orbit, CONSTANTS.speed_of_light_mps / carrier_hz, n)
    return DesignSolution(spacing, res.v_index, res.residual_m)
