"""Spherical-Earth geometry: great-circle distances, centroids and spreads.

Angles are degrees at the API boundary and radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_KM = 6373.0


def normalize_lon(lon: float) -> float:
    """Wrap a longitude into [-180, 180]; values already in range are untouched."""
    if -180.0 <= lon <= 180.0:
        return float(lon)
    return (lon + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        lon, lat = float(self.lon), float(self.lat)
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise ValueError(f"non-finite coordinate ({self.lon}, {self.lat})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        object.__setattr__(self, "lon", normalize_lon(lon))
        object.__setattr__(self, "lat", lat)


@dataclass(frozen=True)
class EarthModel:
    radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        if not self.radius_km > 0:
            raise ValueError("radius_km must be positive")


EARTH = EarthModel()


def haversine_km(lat1, lon1, lat2, lon2, radius_km: float = EARTH_RADIUS_KM):
    """Vectorized great-circle distance in km between degree coordinates.

    The chord-like length ``s = R * sqrt(hav)`` is turned into the central
    angle through ``theta = 2 atan(sqrt(s^2 / (R^2 - s^2)))``. ``arctan2`` is
    used for that ratio so that ``s == R`` (antipodes) gives ``pi`` instead of
    dividing by zero, and ``s`` is clamped to ``R`` against rounding.
    """
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi1 - phi2
    dlam = np.radians(np.asarray(lon1, dtype=float) - np.asarray(lon2, dtype=float))
    hav = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    s = radius_km * np.sqrt(np.clip(hav, 0.0, 1.0))
    s = np.minimum(s, radius_km)
    theta = 2.0 * np.arctan2(s, np.sqrt(radius_km**2 - s**2))
    return radius_km * theta


def great_circle_distance(a: GeoPoint, b: GeoPoint, earth: EarthModel = EARTH) -> float:
    """Distance in km between two points on a spherical Earth."""
    return float(haversine_km(a.lat, a.lon, b.lat, b.lon, earth.radius_km))


def to_unit_vectors(lat, lon) -> np.ndarray:
    """Degree coordinates -> (n, 3) array of unit vectors."""
    phi = np.radians(np.asarray(lat, dtype=float))
    lam = np.radians(np.asarray(lon, dtype=float))
    cphi = np.cos(phi)
    return np.stack([cphi * np.cos(lam), cphi * np.sin(lam), np.sin(phi)], axis=-1)


def from_unit_vectors(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(n, 3) unit vectors -> (lat, lon) in degrees."""
    xyz = np.asarray(xyz, dtype=float)
    lat = np.degrees(np.arctan2(xyz[..., 2], np.hypot(xyz[..., 0], xyz[..., 1])))
    lon = np.degrees(np.arctan2(xyz[..., 1], xyz[..., 0]))
    return lat, lon


def _coords(points: Iterable[GeoPoint]) -> tuple[np.ndarray, np.ndarray]:
    pts = list(points)
    if not pts:
        raise ValueError("empty point list")
    lat = np.array([p.lat for p in pts], dtype=float)
    lon = np.array([p.lon for p in pts], dtype=float)
    return lat, lon


def spherical_centroid(points: Sequence[GeoPoint]) -> GeoPoint:
    """Mean of the points' unit vectors, projected back onto the sphere.

    Raises:
        ValueError: for an empty list, or when the mean vector vanishes
            (e.g. two antipodal points) and no direction is defined.
    """
    lat, lon = _coords(points)
    mean = to_unit_vectors(lat, lon).mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise ValueError("degenerate centroid")
    clat, clon = from_unit_vectors(mean / norm)
    return GeoPoint(lon=float(clon), lat=float(clat))


def rms_spread(points: Sequence[GeoPoint], center: GeoPoint, earth: EarthModel = EARTH) -> float:
    """Root-mean-square great-circle distance (km) of ``points`` to ``center``."""
    lat, lon = _coords(points)
    d = haversine_km(lat, lon, center.lat, center.lon, earth.radius_km)
    return float(np.sqrt(np.mean(d**2)))
