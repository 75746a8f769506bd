"""Distance and time-to-contact warning baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ObjectState


@dataclass(frozen=True)
class DistanceParams:
    distance_threshold: float = 1.5
    fov_half_angle: float = 85.0  # degrees; 170 deg camera coverage

    def __post_init__(self):
        if not self.distance_threshold > 0:
            raise ValueError("distance_threshold must be > 0")
        if not 0 < self.fov_half_angle <= 180:
            raise ValueError("fov_half_angle must lie in (0, 180]")


@dataclass(frozen=True)
class TtcParams:
    distance_threshold: float = 1.0
    time_threshold: float = 4.0

    def __post_init__(self):
        if not (self.distance_threshold > 0 and self.time_threshold > 0):
            raise ValueError("TTC thresholds must be > 0")


def bearing_deg(px, py):
    """Unsigned angle between the position vector and +y, in degrees."""
    return np.degrees(np.abs(np.arctan2(px, py)))


def distance_warnings(states: np.ndarray, params: DistanceParams) -> np.ndarray:
    """Vectorized :func:`distance_warning` over ``(M, 4)`` state rows."""
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    px, py = states[:, 0], states[:, 1]
    dist = np.hypot(px, py)
    # bearing is undefined at the origin; an object on the user counts as seen
    in_fov = (bearing_deg(px, py) <= params.fov_half_angle) | (dist == 0)
    return (dist < params.distance_threshold) & in_fov


def distance_warning(obj: ObjectState, params: DistanceParams) -> bool:
    return bool(distance_warnings([[obj.px, obj.py, obj.vx, obj.vy]], params)[0])


def closest_approach(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Time and distance of closest approach to the origin under linear motion.

    Objects already past their closest approach get ``t* = 0``.
    """
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    p, v = states[:, :2], states[:, 2:]
    vv = np.einsum("ij,ij->i", v, v)
    pv = np.einsum("ij,ij->i", p, v)
    moving = np.sqrt(vv) >= 1e-6
    t_star = np.where(moving, np.maximum(0.0, -pv / np.where(moving, vv, 1.0)), 0.0)
    closest = p + v * t_star[:, None]
    return t_star, np.hypot(closest[:, 0], closest[:, 1])


def ttc_warnings(states: np.ndarray, params: TtcParams) -> np.ndarray:
    t_star, d_min = closest_approach(states)
    return (d_min < params.distance_threshold) & (t_star < params.time_threshold)


def ttc_warning(obj: ObjectState, params: TtcParams) -> bool:
    return bool(ttc_warnings([[obj.px, obj.py, obj.vx, obj.vy]], params)[0])
