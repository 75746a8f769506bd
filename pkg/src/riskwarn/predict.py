"""Linear trajectory prediction with growing Gaussian position uncertainty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ObjectState

MIN_SPEED = 1e-6


@dataclass(frozen=True)
class GaussianBelief2D:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class UncertaintyParams:
    sigma0: float = 0.1
    growth_long: float = 0.3
    growth_lat: float = 0.1

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if self.growth_long < 0 or self.growth_lat < 0:
            raise ValueError("growth rates must be >= 0")


def _check_offset(s: float) -> None:
    if s < 0:
        raise ValueError(f"prediction offset must be >= 0, got {s}")


def predict_position(state: ObjectState, s: float) -> np.ndarray:
    _check_offset(s)
    return np.array([state.px + state.vx * s, state.py + state.vy * s])


def object_stds(speed, s, u: UncertaintyParams):
    """Longitudinal and lateral std at offset(s) ``s``.

    Near-zero speeds get the isotropic fallback ``sigma0 + max(growth) * s``.
    Broadcasts over ``speed`` and ``s``.
    """
    s = np.asarray(s, dtype=float)
    moving = np.asarray(speed) >= MIN_SPEED
    g_iso = max(u.growth_long, u.growth_lat)
    long_std = np.where(moving, u.sigma0 + u.growth_long * s, u.sigma0 + g_iso * s)
    lat_std = np.where(moving, u.sigma0 + u.growth_lat * s, u.sigma0 + g_iso * s)
    return long_std, lat_std


def predict_belief(state: ObjectState, s: float, u: UncertaintyParams) -> GaussianBelief2D:
    """Predicted position belief for ``state`` after ``s`` seconds.

    The covariance has its long axis along the velocity direction; the std on
    each axis grows linearly in ``s``.
    """
    _check_offset(s)
    v = np.array([state.vx, state.vy])
    speed = float(np.hypot(*v))
    long_std, lat_std = (float(x) for x in object_stds(speed, s, u))
    if speed < MIN_SPEED:
        cov = long_std**2 * np.eye(2)
    else:
        e_long = v / speed
        e_lat = np.array([-e_long[1], e_long[0]])
        cov = long_std**2 * np.outer(e_long, e_long) + lat_std**2 * np.outer(e_lat, e_lat)
        cov = 0.5 * (cov + cov.T)
    return GaussianBelief2D(predict_position(state, s), cov)


def user_std(s, u: UncertaintyParams):
    return u.sigma0 + u.growth_lat * np.asarray(s, dtype=float)


def user_belief(s: float, u: UncertaintyParams) -> GaussianBelief2D:
    # the user is not tracked, so it stays at the origin of its own frame
    _check_offset(s)
    return GaussianBelief2D(np.zeros(2), float(user_std(s, u)) ** 2 * np.eye(2))
