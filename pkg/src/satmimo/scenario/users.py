"""User population synthesis over a lon/lat service region."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import MultiPoint, MultiPolygon, Polygon
from shapely.ops import unary_union

from ..channel import BeamLayout, geodetic_to_ecef, half_power_angle_deg, CarrierConfig
from ..geometry import CONSTANTS
from ..scheduling import UserTerminal

__all__ = ["Region", "UserPopulation", "generate_users", "footprint_region", "beam_contour"]


@dataclass(frozen=True)
class Region:
    """Polygon with vertices given as (lon_deg, lat_deg), optionally with holes.

    ``parts`` holds further disjoint polygons as ``(vertices, holes)`` pairs.
    """

    vertices: tuple
    holes: tuple = ()
    parts: tuple = ()

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("region polygon needs at least 3 vertices")
        poly = self.polygon
        if not poly.is_valid or poly.area <= 0:
            raise ValueError("region polygon is degenerate or self-intersecting")

    @property
    def polygon(self):
        first = Polygon(self.vertices, self.holes)
        if not self.parts:
            return first
        return MultiPolygon([first] + [Polygon(v, h) for v, h in self.parts])

    @classmethod
    def from_geometry(cls, geom) -> "Region":
        polys = [geom] if geom.geom_type == "Polygon" else list(geom.geoms)

        def rings(p):
            ext = tuple(tuple(c) for c in list(p.exterior.coords)[:-1])
            return ext, tuple(tuple(tuple(c) for c in list(r.coords)[:-1]) for r in p.interiors)

        head, *rest = [rings(p) for p in polys]
        return cls(head[0], head[1], tuple(rest))

    @classmethod
    def box(cls, lon_min, lon_max, lat_min, lat_max) -> "Region":
        return cls(((lon_min, lat_min), (lon_max, lat_min), (lon_max, lat_max), (lon_min, lat_max)))


@dataclass(frozen=True)
class UserPopulation:
    ids: np.ndarray
    lat_deg: np.ndarray
    lon_deg: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def terminals(self, g_over_t_db: float = 16.9) -> list:
        return [UserTerminal(int(i), float(a), float(o), g_over_t_db) for i, a, o in zip(self.ids, self.lat_deg, self.lon_deg)]


def generate_users(count: int, region: Region, seed: int) -> UserPopulation:
    """Uniform draw over the region's area on the sphere.

    Longitude and sin(latitude) are drawn uniformly inside the bounding box,
    points outside the polygon are rejected.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    poly = region.polygon
    lon0, lat0, lon1, lat1 = poly.bounds
    s0, s1 = np.sin(np.radians(lat0)), np.sin(np.radians(lat1))
    lat_out, lon_out = [], []
    have = 0
    while have < count:
        n = max(64, 2 * (count - have))
        lon = rng.uniform(lon0, lon1, n)
        lat = np.degrees(np.arcsin(rng.uniform(s0, s1, n)))
        keep = shapely.contains_xy(poly, lon, lat)
        lon_out.append(lon[keep])
        lat_out.append(lat[keep])
        have += int(keep.sum())
    lat = np.concatenate(lat_out)[:count] if count else np.zeros(0)
    lon = np.concatenate(lon_out)[:count] if count else np.zeros(0)
    return UserPopulation(np.arange(count), lat, lon)


def _ray_to_earth(origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
    d = direction / np.linalg.norm(direction, axis=-1, keepdims=True)
    b = d @ origin
    c = origin @ origin - CONSTANTS.earth_radius_m**2
    disc = b**2 - c
    if np.any(disc < 0):
        raise ValueError("beam contour misses the Earth")
    t = -b - np.sqrt(disc)
    return origin + t[:, None] * d


def beam_contour(sat_position, boresight, half_angle_deg: float, points: int = 36) -> np.ndarray:
    """(lon, lat) of the ground trace of a cone around ``boresight``."""
    b = np.asarray(boresight, dtype=float)
    b = b / np.linalg.norm(b)
    e1 = np.cross([0.0, 0.0, 1.0], b)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(b, e1)
    th = np.radians(half_angle_deg)
    phi = np.linspace(0, 2 * np.pi, points, endpoint=False)
    dirs = np.cos(th) * b + np.sin(th) * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    p = _ray_to_earth(np.asarray(sat_position, dtype=float), dirs)
    lat = np.degrees(np.arcsin(p[:, 2] / np.linalg.norm(p, axis=1)))
    lon = np.degrees(np.arctan2(p[:, 1], p[:, 0]))
    return np.column_stack([lon, lat])


def footprint_region(
    layout: BeamLayout, sat_lon_deg: float, diameter_m: float, carrier: CarrierConfig, kind: str = "union"
) -> Region:
    """Service region from the beams' 3 dB ground contours.

    ``kind="union"`` keeps exactly the area inside some 3 dB contour, which
    for tangent beams is a set of near-disjoint disks; ``kind="hull"`` takes
    their convex hull.
    """
    sat = geodetic_to_ecef(0.0, sat_lon_deg, CONSTANTS.geo_radius_m)
    half = half_power_angle_deg(diameter_m, carrier)
    contours = [beam_contour(sat, b, half, points=72) for b in layout.boresights]
    if kind == "hull":
        geom = MultiPoint([tuple(p) for c in contours for p in c]).convex_hull
    elif kind == "union":
        geom = unary_union([Polygon(c) for c in contours])
    else:
        raise ValueError(f"unknown region kind {kind!r}")
    return Region.from_geometry(geom)
