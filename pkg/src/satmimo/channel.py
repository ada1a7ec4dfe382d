"""Channel matrices for the feeder uplink and the multibeam downlink.

Every coefficient follows the common-amplitude line-of-sight model
``a * exp(-j 2 pi r / lambda)`` with ``a = lambda / (4 pi r_mean)``. Rows index
receivers and columns index transmitters unless stated otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import brentq
from scipy.special import jv

from .geometry import CONSTANTS, GroundArray, OrbitArray

__all__ = [
    "CarrierConfig",
    "LosMatrix",
    "AtmosphericState",
    "ReflectorPattern",
    "FeederUplinkChannel",
    "BeamLayout",
    "Payload",
    "DownlinkChannel",
    "BelowHorizonError",
    "FEEDER_BLOCK_CENTERS_HZ",
    "wrap_phase",
    "los_coefficient",
    "los_matrix",
    "los_matrix_from_positions",
    "los_matrix_from_offsets",
    "range_increments",
    "atmospheric_diagonal",
    "pattern_amplitude",
    "pattern_gain",
    "half_power_u",
    "first_null_u",
    "half_power_angle_deg",
    "feeder_uplink_channel",
    "geodetic_to_ecef",
    "hex_beam_layout",
    "four_reflector_payload",
    "single_reflector_payload",
    "downlink_channel",
]

FEEDER_BLOCK_CENTERS_HZ = tuple(
    f * 1e9 for f in (42.75, 43.25, 47.45, 47.95, 48.45, 48.95, 49.45, 49.95)
)


@dataclass(frozen=True)
class CarrierConfig:
    frequency_hz: float

    def __post_init__(self):
        if not self.frequency_hz > 0:
            raise ValueError(f"carrier frequency must be positive, got {self.frequency_hz}")

    @property
    def wavelength_m(self) -> float:
        return CONSTANTS.speed_of_light_mps / self.frequency_hz


def wrap_phase(cycles) -> np.ndarray:
    """Convert a path length in wavelengths to a phase in (-pi, pi].

    The integer part is removed before scaling by 2 pi, which keeps the
    phase accurate for paths of ~1e10 wavelengths.
    """
    cycles = np.asarray(cycles, dtype=float)
    frac = cycles - np.floor(cycles + 0.5)
    return -2.0 * np.pi * frac


def los_coefficient(range_m, mean_range_m: float, carrier: CarrierConfig):
    """Line-of-sight coefficient ``lambda/(4 pi r_mean) * exp(-j 2 pi r / lambda)``."""
    r = np.asarray(range_m, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path length must be positive")
    lam = carrier.wavelength_m
    amp = lam / (4.0 * np.pi * mean_range_m)
    out = amp * np.exp(1j * wrap_phase(r / lam))
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LosMatrix:
    entries: np.ndarray
    carrier: CarrierConfig
    mean_gain: float
    mean_range_m: float

    @property
    def shape(self):
        return self.entries.shape

    def gram(self) -> np.ndarray:
        return self.entries @ self.entries.conj().T


def _pairwise_ranges(rx: np.ndarray, tx: np.ndarray) -> np.ndarray:
    diff = rx[:, None, :] - tx[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def los_matrix_from_positions(rx_positions, tx_positions, carrier: CarrierConfig) -> LosMatrix:
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    tx = np.atleast_2d(np.asarray(tx_positions, dtype=float))
    if rx.shape[0] == 0 or tx.shape[0] == 0:
        raise ValueError("antenna sets must be non-empty")
    ranges = _pairwise_ranges(rx, tx)
    r_mean = float(ranges.mean())
    entries = los_coefficient(ranges, r_mean, carrier)
    entries = np.asarray(entries, dtype=complex).reshape(ranges.shape)
    return LosMatrix(entries, carrier, carrier.wavelength_m / (4 * np.pi * r_mean), r_mean)


def range_increments(center_delta, rx_offsets, tx_offsets):
    """Centre range ``r0`` and per-pair increments ``r_ij - r0`` without cancellation.

    ``center_delta`` is ``rx_centre - tx_centre``; offsets are relative to
    each centre. Absolute ranges of ~4e7 m carry ~7e-9 m rounding, which is
    a few microradians of phase at Ka/V band; the increments here are exact
    to rounding of the (small) offsets.
    """
    c = np.asarray(center_delta, dtype=float)
    d = np.asarray(rx_offsets, dtype=float)[:, None, :] - np.asarray(tx_offsets, dtype=float)[None, :, :]
    r0 = float(np.linalg.norm(c))
    cd = c + d
    dr = (2.0 * d @ c + np.einsum("ijk,ijk->ij", d, d)) / (np.sqrt(np.einsum("ijk,ijk->ij", cd, cd)) + r0)
    return r0, dr


def los_matrix_from_offsets(center_delta, rx_offsets, tx_offsets, carrier: CarrierConfig) -> LosMatrix:
    """LOS matrix from array centres and antenna offsets (full phase precision)."""
    r0, dr = range_increments(center_delta, rx_offsets, tx_offsets)
    lam = carrier.wavelength_m
    r_mean = r0 + float(dr.mean())
    amp = lam / (4.0 * np.pi * r_mean)
    entries = amp * np.exp(1j * (wrap_phase(r0 / lam) + wrap_phase(dr / lam)))
    return LosMatrix(entries, carrier, amp, r_mean)


def _array_offsets(array) -> np.ndarray:
    if isinstance(array, GroundArray):
        axis = array.direction()
    else:
        lon = np.radians(array.center_lon_deg)
        axis = np.array([-np.sin(lon), np.cos(lon), 0.0])
    return array.offsets()[:, None] * axis[None, :]


def los_matrix(ground: GroundArray, orbit: OrbitArray, carrier: CarrierConfig, receiver: str = "ground") -> LosMatrix:
    """LOS matrix between a ground ULA and an orbit ULA using exact path lengths.

    ``receiver="ground"`` puts ground antennas on the rows (downlink view);
    ``receiver="orbit"`` returns the transposed uplink view.
    """
    g_off, s_off = _array_offsets(ground), _array_offsets(orbit)
    delta = ground.center() - orbit.center()
    if receiver == "ground":
        return los_matrix_from_offsets(delta, g_off, s_off, carrier)
    if receiver == "orbit":
        return los_matrix_from_offsets(-delta, s_off, g_off, carrier)
    raise ValueError(f"receiver must be 'ground' or 'orbit', got {receiver!r}")


@dataclass(frozen=True)
class AtmosphericState:
    attenuation_db: tuple
    phase_rad: tuple = ()

    def __post_init__(self):
        att = tuple(float(a) for a in self.attenuation_db)
        ph = tuple(float(p) for p in self.phase_rad) if self.phase_rad else (0.0,) * len(att)
        if len(ph) != len(att):
            raise ValueError("attenuation and phase lists differ in length")
        if any(a < 0 for a in att):
            raise ValueError("attenuation must be non-negative")
        object.__setattr__(self, "attenuation_db", att)
        object.__setattr__(self, "phase_rad", ph)

    @classmethod
    def clear_sky(cls, count: int) -> "AtmosphericState":
        return cls((0.0,) * count)

    @property
    def magnitude(self) -> np.ndarray:
        return 10.0 ** (-np.asarray(self.attenuation_db) / 20.0)


def atmospheric_diagonal(state: AtmosphericState) -> np.ndarray:
    """Diagonal impairment matrix ``diag(|s_m| exp(-j xi_m))``."""
    return np.diag(state.magnitude * np.exp(-1j * np.asarray(state.phase_rad)))


def pattern_amplitude(u) -> np.ndarray:
    """Normalized amplitude ``J1(u)/(2u) + 36 J3(u)/u^3`` with value 1 at ``u = 0``."""
    u = np.abs(np.asarray(u, dtype=float))
    out = np.ones_like(u)
    small = u < 1e-4
    big = ~small
    ub = u[big]
    out[big] = jv(1, ub) / (2 * ub) + 36.0 * jv(3, ub) / ub**3
    us = u[small]
    # series of both terms up to u^2: (1/4 - u^2/32) + 36 (1/48 - u^2/768)
    out[small] = 1.0 - us**2 * (1.0 / 32.0 + 36.0 / 768.0)
    return out if out.ndim else float(out)


def half_power_u() -> float:
    return brentq(lambda u: pattern_amplitude(u) ** 2 - 0.5, 0.5, 4.0, xtol=1e-14)


def first_null_u() -> float:
    return brentq(pattern_amplitude, 4.0, 7.0, xtol=1e-14)


@dataclass(frozen=True)
class ReflectorPattern:
    """Circular-aperture pattern with boresight given as an ECEF unit vector."""

    diameter_m: float
    carrier: CarrierConfig
    boresight: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.diameter_m > 0:
            raise ValueError("reflector diameter must be positive")
        b = np.asarray(self.boresight, dtype=float)
        object.__setattr__(self, "boresight", tuple(b / np.linalg.norm(b)))

    def u_of_angle(self, theta_rad):
        return np.pi * self.diameter_m / self.carrier.wavelength_m * np.sin(theta_rad)


def half_power_angle_deg(diameter_m: float, carrier: CarrierConfig) -> float:
    """Half-power (3 dB) half-beamwidth of the reflector pattern."""
    s = half_power_u() * carrier.wavelength_m / (np.pi * diameter_m)
    return float(np.degrees(np.arcsin(s)))


def _off_axis(boresight: np.ndarray, directions: np.ndarray) -> np.ndarray:
    d = directions / np.linalg.norm(directions, axis=-1, keepdims=True)
    cross = np.linalg.norm(np.cross(d, boresight), axis=-1)
    return np.arctan2(cross, d @ boresight)


def pattern_gain(pattern: ReflectorPattern, target_direction) -> np.ndarray:
    """Amplitude gain toward one or more directions (last axis = xyz)."""
    d = np.asarray(target_direction, dtype=float)
    theta = _off_axis(np.asarray(pattern.boresight), np.atleast_2d(d))
    g = pattern_amplitude(pattern.u_of_angle(theta))
    return float(g[0]) if d.ndim == 1 else g


@dataclass(frozen=True)
class FeederUplinkChannel:
    blocks: tuple
    block_carriers: tuple
    assembled: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.assembled.shape[0]


def feeder_uplink_channel(
    ground: GroundArray,
    orbit: OrbitArray,
    carriers: Sequence[CarrierConfig],
    atmosphere: AtmosphericState | None = None,
    sat_diameter_m: float | None = 1.2,
) -> FeederUplinkChannel:
    """Block-diagonal feeder uplink, one 2x2 block per FDMA carrier.

    Block rows are satellite receive antennas, columns are gateway antennas.
    The satellite receive patterns point at the gateway array centre; pass
    ``sat_diameter_m=None`` for isotropic satellite antennas.
    """
    if ground.count != 2 or orbit.count != 2:
        raise ValueError("feeder uplink expects 2 gateways and 2 satellite receive antennas")
    if not carriers:
        raise ValueError("at least one carrier is required")
    atmosphere = atmosphere or AtmosphericState.clear_sky(ground.count)
    if len(atmosphere.attenuation_db) != ground.count:
        raise ValueError("atmospheric state must have one entry per gateway antenna")
    d = atmospheric_diagonal(atmosphere)
    g_pos, s_pos = ground.positions(), orbit.positions()
    aim = ground.center()
    blocks = []
    for carrier in carriers:
        h = los_matrix(ground, orbit, carrier, receiver="orbit").entries @ d
        if sat_diameter_m is not None:
            gains = np.empty((2, 2))
            for z in range(2):
                pat = ReflectorPattern(sat_diameter_m, carrier, tuple(aim - s_pos[z]))
                gains[z] = pattern_gain(pat, g_pos - s_pos[z])
            h = h * gains
        blocks.append(h)
    return FeederUplinkChannel(tuple(blocks), tuple(carriers), block_diag(*blocks))


def geodetic_to_ecef(lat_deg, lon_deg, radius_m: float = CONSTANTS.earth_radius_m) -> np.ndarray:
    lat, lon = np.radians(lat_deg), np.radians(lon_deg)
    return radius_m * np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat) * np.ones_like(lon)], axis=-1
    )


@dataclass(frozen=True)
class BeamLayout:
    """Beam boresights as ECEF unit vectors from the satellite plus a colour per beam."""

    boresights: np.ndarray
    colors: tuple
    aim_lat_deg: float
    aim_lon_deg: float
    spacing_deg: float

    @property
    def count(self) -> int:
        return len(self.colors)


def _satellite_position(sat_lon_deg: float) -> np.ndarray:
    return geodetic_to_ecef(0.0, sat_lon_deg, CONSTANTS.geo_radius_m)


def _boresight_frame(sat: np.ndarray, aim: np.ndarray):
    b0 = aim - sat
    b0 = b0 / np.linalg.norm(b0)
    e_u = np.cross(np.array([0.0, 0.0, 1.0]), b0)
    e_u /= np.linalg.norm(e_u)
    e_v = np.cross(b0, e_u)
    return b0, e_u, e_v


def hex_beam_layout(
    sat_lon_deg: float,
    aim_lat_deg: float,
    aim_lon_deg: float,
    spacing_deg: float,
    rows: int = 4,
    cols: int = 4,
) -> BeamLayout:
    """Hexagonal-offset lattice of beams in the satellite's angular frame.

    Odd rows shift by half a spacing. The colour ``(col % 2) + 2 (row % 2)``
    never repeats between lattice neighbours.
    """
    sat = _satellite_position(sat_lon_deg)
    b0, e_u, e_v = _boresight_frame(sat, geodetic_to_ecef(aim_lat_deg, aim_lon_deg))
    s = np.radians(spacing_deg)
    pts, colors = [], []
    for r in range(rows):
        for c in range(cols):
            pts.append(((c + 0.5 * (r % 2)) * s, r * s * np.sqrt(3) / 2))
            colors.append((c % 2) + 2 * (r % 2))
    pts = np.array(pts)
    pts -= pts.mean(axis=0)
    dirs = b0[None, :] + np.tan(pts[:, :1]) * e_u[None, :] + np.tan(pts[:, 1:]) * e_v[None, :]
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return BeamLayout(dirs, tuple(colors), aim_lat_deg, aim_lon_deg, spacing_deg)


@dataclass(frozen=True)
class Payload:
    """Multibeam transmit payload: one phase centre and one boresight per feed."""

    satellite_position: np.ndarray
    phase_centers: np.ndarray
    layout: BeamLayout
    reflector_diameter_m: float
    reflector_of_feed: tuple
    name: str = "payload"

    @property
    def feed_count(self) -> int:
        return self.phase_centers.shape[0]


def four_reflector_payload(
    layout: BeamLayout, sat_lon_deg: float, uca_diameter_m: float = 3.0, reflector_diameter_m: float = 2.6
) -> Payload:
    """Reflectors on a circle perpendicular to nadir; reflector index equals beam colour."""
    sat = _satellite_position(sat_lon_deg)
    nadir = -sat / np.linalg.norm(sat)
    e1 = np.cross(np.array([0.0, 0.0, 1.0]), nadir)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nadir, e1)
    n_refl = max(layout.colors) + 1
    angles = np.pi / 4 + 2 * np.pi * np.arange(n_refl) / n_refl
    centers = sat + 0.5 * uca_diameter_m * (np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2)
    phase = np.array([centers[c] for c in layout.colors])
    return Payload(sat, phase, layout, reflector_diameter_m, tuple(layout.colors), "four-reflector")


def single_reflector_payload(
    layout: BeamLayout, sat_lon_deg: float, focal_length_m: float = 2.6, reflector_diameter_m: float = 2.6
) -> Payload:
    """All beams from one reflector; feeds sit at focal-plane offsets of a few cm."""
    sat = _satellite_position(sat_lon_deg)
    b0 = layout.boresights.mean(axis=0)
    b0 /= np.linalg.norm(b0)
    # a feed displaced by x in the focal plane steers the beam by about -x / f
    offsets = -(layout.boresights - (layout.boresights @ b0)[:, None] * b0) * focal_length_m
    phase = sat + offsets
    return Payload(sat, phase, layout, reflector_diameter_m, (0,) * layout.count, "single-reflector")


class BelowHorizonError(ValueError):
    """A user cannot see the satellite."""


@dataclass(frozen=True)
class DownlinkChannel:
    entries: np.ndarray
    user_ids: tuple
    payload_name: str
    carrier: CarrierConfig

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def downlink_channel(
    lat_deg, lon_deg, payload: Payload, carrier: CarrierConfig, user_ids: Sequence | None = None, with_phase: bool = True
) -> DownlinkChannel:
    """K x Z_t downlink matrix ``H_d * G_d`` for users at the given coordinates.

    Amplitudes use each user's mean range over all feeds. ``with_phase=False``
    drops the line-of-sight phase (amplitude-only channel).
    """
    lat = np.atleast_1d(np.asarray(lat_deg, dtype=float))
    lon = np.atleast_1d(np.asarray(lon_deg, dtype=float))
    users = geodetic_to_ecef(lat, lon)
    up = users / np.linalg.norm(users, axis=1, keepdims=True)
    if np.any(np.einsum("ij,ij->i", payload.satellite_position[None, :] - users, up) <= 0):
        raise BelowHorizonError("user below the horizon of the satellite")
    ranges = _pairwise_ranges(users, payload.phase_centers)
    r_mean = ranges.mean(axis=1, keepdims=True)
    lam = carrier.wavelength_m
    amp = lam / (4 * np.pi * r_mean)
    dirs = users - payload.satellite_position[None, :]
    gains = np.empty_like(ranges)
    for z in range(payload.feed_count):
        theta = _off_axis(payload.layout.boresights[z], dirs)
        gains[:, z] = pattern_amplitude(np.pi * payload.reflector_diameter_m / lam * np.sin(theta))
    if with_phase:
        h = amp * gains * np.exp(1j * wrap_phase(ranges / lam))
    else:
        h = np.abs(amp * gains).astype(complex)
    ids = tuple(range(len(lat))) if user_ids is None else tuple(user_ids)
    return DownlinkChannel(h, ids, payload.name, carrier)
