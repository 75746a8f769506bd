"""Probabilistic collision risk.

Per prediction step the collision probability is the overlap integral of the
user's and the object's predicted position densities, scaled by a cross
section area. Collision probabilities of all objects are summed into a total,
which drives a survival function (escape rate plus collision rate); the risk
of object ``i`` is its collision rate integrated against that survival
function over the prediction horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Frame, ObjectState
from .predict import (
    GaussianBelief2D,
    UncertaintyParams,
    object_stds,
    predict_belief,
    user_belief,
    user_std,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RiskParams:
    risk_threshold: float = 0.05
    horizon_s_max: float = 5.0
    interval_ds: float = 0.1
    escape_rate: float = 0.3
    event_duration_dt: float = 0.5
    cross_section: float = 0.25
    uncertainty: UncertaintyParams = field(default_factory=UncertaintyParams)

    def __post_init__(self):
        if not 0 < self.risk_threshold < 1:
            raise ValueError(f"risk_threshold must lie in (0, 1), got {self.risk_threshold}")
        if not self.horizon_s_max > 0:
            raise ValueError("horizon_s_max must be > 0")
        if not 0 < self.interval_ds <= self.horizon_s_max:
            raise ValueError("interval_ds must satisfy 0 < interval_ds <= horizon_s_max")
        if self.escape_rate < 0:
            raise ValueError("escape_rate must be >= 0")
        if not self.event_duration_dt > 0:
            raise ValueError("event_duration_dt must be > 0")
        if not self.cross_section > 0:
            raise ValueError("cross_section must be > 0")

    def grid(self) -> np.ndarray:
        """Prediction offsets ``0, ds, ..., K*ds`` with ``K*ds <= s_max``."""
        k_max = int(math.floor(self.horizon_s_max / self.interval_ds + 1e-9))
        return np.arange(k_max + 1) * self.interval_ds


@dataclass(frozen=True)
class CollisionProfile:
    s: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if s.shape != p.shape or s.ndim != 1:
            raise ValueError("profile offsets and probabilities must be equal-length 1-D arrays")
        if np.any(np.diff(s) <= 0):
            raise ValueError("profile offsets must be strictly increasing")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("collision probabilities must lie in [0, 1]")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "p", p)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.s.tolist(), self.p.tolist()))

    def __len__(self):
        return len(self.s)


@dataclass(frozen=True)
class RiskScore:
    id: int
    value: float


def collision_probability(user: GaussianBelief2D, obj: GaussianBelief2D, cross_section: float) -> float:
    """Scaled overlap of two Gaussian position beliefs, capped at 1.

    The integral of the product of two Gaussian densities equals the density
    of ``N(0, cov_user + cov_obj)`` evaluated at the mean difference.
    """
    cov = user.cov + obj.cov
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    if not det > 0:
        raise np.linalg.LinAlgError("summed covariance is singular")
    d = obj.mean - user.mean
    quad = (cov[1, 1] * d[0] ** 2 - 2 * cov[0, 1] * d[0] * d[1] + cov[0, 0] * d[1] ** 2) / det
    density = math.exp(-0.5 * quad) / (TWO_PI * math.sqrt(det))
    return min(1.0, cross_section * density)


def object_collision_profile(obj: ObjectState, params: RiskParams) -> CollisionProfile:
    s = params.grid()
    u = params.uncertainty
    p = [
        collision_probability(user_belief(float(sk), u), predict_belief(obj, float(sk), u), params.cross_section)
        for sk in s
    ]
    return CollisionProfile(s, np.array(p))


def total_collision_profile(profiles: list[CollisionProfile]) -> CollisionProfile:
    if not profiles:
        raise ValueError("need at least one profile")
    s = profiles[0].s
    for prof in profiles[1:]:
        if prof.s.shape != s.shape or not np.array_equal(prof.s, s):
            raise ValueError("collision profiles are sampled on different grids")
    total = np.sum([prof.p for prof in profiles], axis=0)
    return CollisionProfile(s, np.minimum(total, 1.0))


def _survival(total_p: np.ndarray, params: RiskParams) -> np.ndarray:
    """Left-Riemann survival along the last axis; ``S[..., 0] == 1``."""
    rate = (params.escape_rate + total_p / params.event_duration_dt) * params.interval_ds
    acc = np.cumsum(rate, axis=-1)
    acc = np.concatenate([np.zeros(acc.shape[:-1] + (1,)), acc[..., :-1]], axis=-1)
    return np.exp(-acc)


def survival_profile(total: CollisionProfile, params: RiskParams) -> list[tuple[float, float]]:
    return list(zip(total.s.tolist(), _survival(total.p, params).tolist()))


def object_risk(profile_i: CollisionProfile, survival, params: RiskParams, object_id: int = -1) -> RiskScore:
    s_surv = np.array([x[0] for x in survival], dtype=float)
    surv = np.array([x[1] for x in survival], dtype=float)
    if s_surv.shape != profile_i.s.shape or not np.array_equal(s_surv, profile_i.s):
        raise ValueError("survival and collision profile are sampled on different grids")
    value = float(np.sum(surv * profile_i.p) / params.event_duration_dt * params.interval_ds)
    return RiskScore(object_id, min(max(value, 0.0), 1.0))


def frame_risks(frame: Frame, params: RiskParams) -> dict[int, RiskScore]:
    """Risk of every object in ``frame`` via the per-step reference path."""
    if not frame.objects:
        return {}
    profiles = [object_collision_profile(o, params) for o in frame.objects]
    survival = survival_profile(total_collision_profile(profiles), params)
    return {o.id: object_risk(prof, survival, params, o.id) for o, prof in zip(frame.objects, profiles)}


def risk_warnings(frame: Frame, params: RiskParams) -> dict[int, bool]:
    return {oid: score.value >= params.risk_threshold for oid, score in frame_risks(frame, params).items()}


# -- batched evaluation -----------------------------------------------------


def collision_profiles(states: np.ndarray, params: RiskParams, s: np.ndarray | None = None) -> np.ndarray:
    """Collision probabilities for many objects at once.

    Args:
        states: ``(M, 4)`` rows of ``[px, py, vx, vy]``.
        s: prediction offsets; defaults to ``params.grid()``.

    Returns:
        ``(M, K)`` array matching :func:`object_collision_profile` row by row.
    """
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    s = params.grid() if s is None else np.asarray(s, dtype=float)
    u = params.uncertainty
    pos, vel = states[:, :2], states[:, 2:]
    speed = np.hypot(vel[:, 0], vel[:, 1])
    moving = speed >= 1e-6

    # axis frame per object: longitudinal along velocity, x-axis if ~stationary
    e_long = np.where(moving[:, None], vel / np.where(moving, speed, 1.0)[:, None], [1.0, 0.0])
    e_lat = np.stack([-e_long[:, 1], e_long[:, 0]], axis=1)
    p_long = np.einsum("ij,ij->i", pos, e_long)
    p_lat = np.einsum("ij,ij->i", pos, e_lat)
    v_long = np.einsum("ij,ij->i", vel, e_long)
    v_lat = np.einsum("ij,ij->i", vel, e_lat)

    var_user = user_std(s, u) ** 2
    long_m, lat_m = object_stds(1.0, s, u)
    long_s, _ = object_stds(0.0, s, u)
    var_long = np.where(moving[:, None], long_m**2, long_s**2) + var_user
    var_lat = np.where(moving[:, None], lat_m**2, long_s**2) + var_user

    d_long = p_long[:, None] + v_long[:, None] * s
    d_lat = p_lat[:, None] + v_lat[:, None] * s
    expo = -0.5 * (d_long**2 / var_long + d_lat**2 / var_lat)
    dens = np.exp(expo) / (TWO_PI * np.sqrt(var_long * var_lat))
    return np.minimum(params.cross_section * dens, 1.0)


def batch_risk(states: np.ndarray, frame_of_row: np.ndarray, params: RiskParams, chunk: int = 4096) -> np.ndarray:
    """Risk values for rows spanning many frames.

    Rows belonging to one frame must be contiguous; ``frame_of_row`` labels
    them (any nondecreasing integer labels). Survival is shared within a frame.
    """
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    frame_of_row = np.asarray(frame_of_row)
    m = len(states)
    if m == 0:
        return np.zeros(0)
    if np.any(np.diff(frame_of_row) < 0):
        raise ValueError("rows must be grouped by nondecreasing frame label")
    s = params.grid()
    probs = np.empty((m, len(s)))
    for a in range(0, m, chunk):
        probs[a : a + chunk] = collision_profiles(states[a : a + chunk], params, s)

    starts = np.flatnonzero(np.r_[True, frame_of_row[1:] != frame_of_row[:-1]])
    totals = np.minimum(np.add.reduceat(probs, starts, axis=0), 1.0)
    surv = _survival(totals, params)
    group = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, m]))
    scale = params.interval_ds / params.event_duration_dt
    out = np.empty(m)
    for a in range(0, m, chunk):
        out[a : a + chunk] = np.einsum("ij,ij->i", surv[group[a : a + chunk]], probs[a : a + chunk]) * scale
    return np.clip(out, 0.0, 1.0)
