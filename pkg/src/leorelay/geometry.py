"""Spherical geometry for a ground station pair and a satellite shell.

All angles are radians.  Distances are kilometres.  Functions accept
scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EARTH_RADIUS_KM",
    "GeometryDomainError",
    "InfeasibleGeometryError",
    "ConstellationGeometry",
    "SphericalPoint",
    "chord_distance",
    "central_angle_from_chord",
    "dsq_operator",
    "psi_of",
    "l_max",
    "visibility_angle",
    "min_hops",
    "ground_separation_angle",
]

EARTH_RADIUS_KM = 6371.0

# Slack for rounding noise at domain edges.
_EDGE_SLACK = 1e-12


class GeometryDomainError(ValueError):
    """An angle or distance lies outside the domain of a geometric map."""


class InfeasibleGeometryError(ValueError):
    """No satellite position can serve both stations."""


@dataclass(frozen=True)
class ConstellationGeometry:
    """Earth radius, shell radius and satellite count of a BPP constellation."""

    re_km: float = EARTH_RADIUS_KM
    rs_km: float = EARTH_RADIUS_KM + 500.0
    n_sats: int = 500

    def __post_init__(self):
        if not self.re_km > 0:
            raise ValueError("re_km must be positive")
        if not self.rs_km > self.re_km:
            raise ValueError("rs_km must exceed re_km")
        if int(self.n_sats) != self.n_sats or self.n_sats < 1:
            raise ValueError("n_sats must be a positive integer")
        object.__setattr__(self, "n_sats", int(self.n_sats))

    @classmethod
    def from_altitude(cls, altitude_km: float, n_sats: int = 500,
                      re_km: float = EARTH_RADIUS_KM) -> "ConstellationGeometry":
        return cls(re_km=re_km, rs_km=re_km + altitude_km, n_sats=n_sats)

    @property
    def altitude_km(self) -> float:
        return self.rs_km - self.re_km

    @property
    def d_min(self) -> float:
        """Shortest ground-to-shell distance (satellite at zenith)."""
        return self.rs_km - self.re_km

    @property
    def d_max(self) -> float:
        """Longest ground-to-shell distance (antipodal satellite)."""
        return self.rs_km + self.re_km


@dataclass(frozen=True)
class SphericalPoint:
    """Point given by polar angle, azimuth and radius.

    The azimuth is normalised into ``[0, 2*pi)`` on construction.
    """

    polar: float
    azimuth: float
    radius: float

    def __post_init__(self):
        if not (0.0 <= self.polar <= math.pi):
            raise GeometryDomainError(f"polar angle {self.polar} outside [0, pi]")
        if self.radius < 0:
            raise GeometryDomainError("radius must be nonnegative")
        object.__setattr__(self, "azimuth", math.fmod(self.azimuth, 2 * math.pi) % (2 * math.pi))

    def unit_vector(self) -> np.ndarray:
        s = math.sin(self.polar)
        return np.array([s * math.cos(self.azimuth), s * math.sin(self.azimuth),
                         math.cos(self.polar)])

    def cartesian(self) -> np.ndarray:
        return self.radius * self.unit_vector()


def _check_angle(psi, upper=math.pi, name="angle"):
    psi = np.asarray(psi, dtype=float)
    if np.any(~np.isfinite(psi)) or np.any(psi < -_EDGE_SLACK) or np.any(psi > upper + _EDGE_SLACK):
        raise GeometryDomainError(f"{name} outside [0, {upper:g}]")
    return np.clip(psi, 0.0, upper)


def chord_distance(psi, geom: ConstellationGeometry):
    """Distance from a ground point to a shell point separated by central angle ``psi``.

    Equal to ``sqrt(Rs^2 + Re^2 - 2 Rs Re cos psi)``; evaluated through the
    half-angle form, which keeps full precision near ``psi = 0``.
    """
    psi = _check_angle(psi)
    h = geom.rs_km - geom.re_km
    s = np.sin(0.5 * psi)
    return np.sqrt(h * h + 4.0 * geom.rs_km * geom.re_km * s * s)


def central_angle_from_chord(d, geom: ConstellationGeometry):
    """Inverse of :func:`chord_distance` on ``[Rs - Re, Rs + Re]``."""
    d = np.asarray(d, dtype=float)
    lo, hi = geom.d_min, geom.d_max
    if np.any(~np.isfinite(d)) or np.any(d < lo * (1 - _EDGE_SLACK)) or np.any(d > hi * (1 + _EDGE_SLACK)):
        raise GeometryDomainError(f"distance outside [{lo:g}, {hi:g}] km")
    d = np.clip(d, lo, hi)
    # 4 Rs Re sin^2(psi/2) = d^2 - (Rs-Re)^2 and 4 Rs Re cos^2(psi/2) = (Rs+Re)^2 - d^2
    near = np.sqrt((d - lo) * (d + lo))
    far = np.sqrt((hi - d) * (hi + d))
    return 2.0 * np.arctan2(near, far)


def _cos_between(theta1, phi1, theta2, phi2):
    return (np.sin(theta1) * np.sin(theta2) * np.cos(phi1 - phi2)
            + np.cos(theta1) * np.cos(theta2))


def _haversine(theta1, phi1, theta2, phi2):
    """``sin^2(psi / 2)`` for the central angle ``psi``, accurate for small angles."""
    hav = (np.sin(0.5 * (theta1 - theta2)) ** 2
           + np.sin(theta1) * np.sin(theta2) * np.sin(0.5 * (phi1 - phi2)) ** 2)
    return np.clip(hav, 0.0, 1.0)


def dsq_operator(theta1, phi1, theta2, phi2, geom: ConstellationGeometry):
    """Squared distance between the shell point ``(theta1, phi1)`` and the
    ground point ``(theta2, phi2)``, both in polar/azimuth coordinates."""
    theta1 = _check_angle(theta1, name="theta1")
    theta2 = _check_angle(theta2, name="theta2")
    rs, re = geom.rs_km, geom.re_km
    # (Rs - Re)^2 + 2 Rs Re (1 - cos psi), with 1 - cos psi = 2 hav(psi)
    return (rs - re) ** 2 + 4.0 * rs * re * _haversine(theta1, phi1, theta2, phi2)


def psi_of(theta, phi, Theta, literal: bool = False):
    """Central angle between the direction ``(theta, phi)`` and ``(Theta, 0)``.

    With ``literal=True`` the doubled form ``2 * arccos(...)`` of the
    cosine-rule argument is returned instead; it is kept only for comparison runs.
    """
    theta = _check_angle(theta, name="theta")
    Theta = _check_angle(Theta, name="Theta")
    if literal:
        arg = _cos_between(theta, phi, Theta, 0.0)
        if np.any(np.abs(arg) - 1.0 > 1e-12):
            raise GeometryDomainError("arccos argument outside [-1, 1]")
        return 2.0 * np.arccos(np.clip(arg, -1.0, 1.0))
    return 2.0 * np.arcsin(np.sqrt(_haversine(theta, phi, Theta, 0.0)))


def visibility_angle(geom: ConstellationGeometry) -> float:
    """Largest central angle between a ground station and a satellite above its horizon."""
    return math.acos(min(1.0, geom.re_km / geom.rs_km))


def l_max(geom: ConstellationGeometry) -> float:
    """Maximum ground chord served by one satellite hop, ``2 Re sin(acos(Re/Rs) / 2)``."""
    return 2.0 * geom.re_km * math.sin(0.5 * visibility_angle(geom))


def min_hops(total_ground_distance: float, geom: ConstellationGeometry,
             arc: bool = False) -> int:
    """Smallest number of relay units covering ``total_ground_distance``.

    By default the distance is compared against ``l_max`` directly.  With
    ``arc=True`` it is compared against the great-circle arc that ``l_max``
    subtends on the Earth's surface.
    """
    if not total_ground_distance > 0:
        raise ValueError("total_ground_distance must be positive")
    reach = l_max(geom)
    if arc:
        reach = geom.re_km * 2.0 * math.asin(min(1.0, reach / (2.0 * geom.re_km)))
    return max(1, math.ceil(total_ground_distance / reach))


def ground_separation_angle(distance_km, geom: ConstellationGeometry,
                            arc: bool = True):
    """Central angle between two ground stations ``distance_km`` apart.

    ``arc=True`` reads the distance as a great-circle arc, ``arc=False`` as a
    straight chord through the Earth.
    """
    distance_km = np.asarray(distance_km, dtype=float)
    if np.any(distance_km < 0):
        raise GeometryDomainError("distance must be nonnegative")
    if arc:
        out = distance_km / geom.re_km
        if np.any(out > math.pi + _EDGE_SLACK):
            raise GeometryDomainError("arc longer than half a great circle")
        return np.minimum(out, math.pi)
    ratio = distance_km / (2.0 * geom.re_km)
    if np.any(ratio > 1 + _EDGE_SLACK):
        raise GeometryDomainError("chord longer than the Earth's diameter")
    return 2.0 * np.arcsin(np.minimum(ratio, 1.0))
