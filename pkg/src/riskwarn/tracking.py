"""Particle-filter tracker with joint probabilistic data association (JPDAF).

Each track carries a weighted particle cloud over ``(px, py, vx, vy)``.
Detections are bare positions; upstream ids are ignored so that swapped or
split ids do not propagate into the tracks.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_FRAME_RATE, Frame, ObjectState, Scenario

log = logging.getLogger(__name__)

# hard stop for joint-event enumeration inside one cluster
_ENUMERATION_BUDGET = 200_000


@dataclass(frozen=True)
class TrackerParams:
    particle_count: int = 500
    process_noise_pos: float = 0.05
    process_noise_vel: float = 0.1
    measurement_noise: float = 0.15
    gate_radius: float = 1.0
    detection_prob: float = 0.9
    clutter_density: float = 1e-4
    birth_confirm_frames: int = 3
    death_miss_frames: int = 5
    max_joint_events: int = 1000
    birth_velocity_std: float = 1.0

    def __post_init__(self):
        if self.particle_count < 100:
            raise ValueError("particle_count must be >= 100")
        for name in ("process_noise_pos", "process_noise_vel", "measurement_noise", "gate_radius",
                     "clutter_density", "birth_velocity_std"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.detection_prob <= 1:
            raise ValueError("detection_prob must lie in (0, 1]")
        if self.birth_confirm_frames < 1 or self.death_miss_frames < 1:
            raise ValueError("birth/death frame counts must be >= 1")
        if self.max_joint_events < 1:
            raise ValueError("max_joint_events must be >= 1")


@dataclass
class Track:
    id: int
    particles: np.ndarray  # (P, 4)
    weights: np.ndarray  # (P,)
    miss_count: int = 0
    age: int = 0
    confirmed: bool = False
    hits: int = 0  # consecutive associated frames while tentative
    beta: dict = field(default_factory=dict)  # last association probabilities, None = missed

    def mean(self) -> np.ndarray:
        # offset from a reference particle keeps degenerate clouds exact
        ref = self.particles[0]
        return ref + self.weights @ (self.particles - ref)


def spawn_track(track_id: int, position, params: TrackerParams, rng: np.random.Generator) -> Track:
    n = params.particle_count
    parts = np.empty((n, 4))
    parts[:, :2] = np.asarray(position, dtype=float) + rng.normal(0.0, params.measurement_noise, (n, 2))
    parts[:, 2:] = rng.normal(0.0, params.birth_velocity_std, (n, 2))
    return Track(track_id, parts, np.full(n, 1.0 / n), hits=1, age=1)


def estimate_state(track: Track) -> ObjectState:
    if not track.confirmed:
        raise ValueError(f"track {track.id} is not confirmed")
    m = track.mean()
    return ObjectState(track.id, float(m[0]), float(m[1]), float(m[2]), float(m[3]))


# -- association ------------------------------------------------------------


def _clusters(gated: np.ndarray) -> list[tuple[list[int], list[int]]]:
    """Connected components of the track/detection gating graph."""
    n_t, n_d = gated.shape
    seen_t, seen_d = set(), set()
    out = []
    for t0 in range(n_t):
        if t0 in seen_t or not gated[t0].any():
            continue
        ts, ds, stack = {t0}, set(), [("t", t0)]
        seen_t.add(t0)
        while stack:
            kind, k = stack.pop()
            if kind == "t":
                for d in np.flatnonzero(gated[k]).tolist():
                    if d not in ds:
                        ds.add(d)
                        stack.append(("d", d))
            else:
                for t in np.flatnonzero(gated[:, k]).tolist():
                    if t not in ts:
                        ts.add(t)
                        seen_t.add(t)
                        stack.append(("t", t))
        seen_d |= ds
        out.append((sorted(ts), sorted(ds)))
    return out


def joint_events(log_lik: np.ndarray, gated: np.ndarray, params: TrackerParams) -> list[tuple[float, tuple]]:
    """Enumerate feasible joint association events of one cluster.

    Args:
        log_lik: ``(T, D)`` log detection likelihoods.
        gated: ``(T, D)`` feasibility mask.

    Returns:
        ``(log_weight, assignment)`` pairs where ``assignment[t]`` is a
        detection index or -1, truncated to the ``max_joint_events`` heaviest.
    """
    n_t, n_d = gated.shape
    log_pd = math.log(params.detection_prob) if params.detection_prob > 0 else -math.inf
    log_miss = math.log1p(-params.detection_prob) if params.detection_prob < 1 else -math.inf
    log_clutter = math.log(params.clutter_density)
    options = [np.flatnonzero(gated[t]).tolist() for t in range(n_t)]

    heap: list = []
    cap = params.max_joint_events
    count = 0
    assign = [-1] * n_t
    used = [False] * n_d

    def visit(t: int, logw: float, n_assigned: int):
        nonlocal count
        if count >= _ENUMERATION_BUDGET:
            return
        if t == n_t:
            count += 1
            w = logw + (n_d - n_assigned) * log_clutter
            item = (w, count, tuple(assign))
            if len(heap) < cap:
                heapq.heappush(heap, item)
            elif w > heap[0][0]:
                heapq.heapreplace(heap, item)
            return
        if log_miss > -math.inf:
            assign[t] = -1
            visit(t + 1, logw + log_miss, n_assigned)
        for d in options[t]:
            if not used[d]:
                used[d] = True
                assign[t] = d
                visit(t + 1, logw + log_pd + log_lik[t, d], n_assigned + 1)
                used[d] = False
        assign[t] = -1

    visit(0, 0.0, 0)
    if count >= _ENUMERATION_BUDGET:
        log.warning("joint event enumeration stopped after %d events", count)
    return [(w, a) for w, _, a in sorted(heap, key=lambda x: (-x[0], x[1]))]


def association_probabilities(log_lik: np.ndarray, gated: np.ndarray, params: TrackerParams) -> np.ndarray:
    """Marginal association probabilities.

    Returns:
        ``(T, D + 1)`` array; column ``j < D`` is ``beta[t, j]`` and the last
        column is the probability that track ``t`` received no detection.
    """
    n_t, n_d = gated.shape
    beta = np.zeros((n_t, n_d + 1))
    beta[:, n_d] = 1.0
    for ts, ds in _clusters(gated):
        sub_ll = log_lik[np.ix_(ts, ds)]
        sub_g = gated[np.ix_(ts, ds)]
        events = joint_events(sub_ll, sub_g, params)
        logw = np.array([w for w, _ in events])
        w = np.exp(logw - logw.max())
        w /= w.sum()
        local = np.zeros((len(ts), len(ds) + 1))
        for wk, (_, a) in zip(w, events):
            for ti, d in enumerate(a):
                local[ti, d if d >= 0 else len(ds)] += wk
        local /= local.sum(axis=1, keepdims=True)
        for ti, t in enumerate(ts):
            beta[t, :] = 0.0
            beta[t, ds] = local[ti, :-1]
            beta[t, n_d] = local[ti, -1]
    return beta


# -- filter step ------------------------------------------------------------


def _systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="left")


def jpdaf_step(
    tracks: list[Track],
    detections,
    params: TrackerParams,
    rng: np.random.Generator,
    dt: float = 1.0 / DEFAULT_FRAME_RATE,
    next_id: int | None = None,
) -> list[Track]:
    """Advance all tracks by one frame and absorb ``detections``.

    Tracks are updated in place and returned together with any newly spawned
    tentative tracks; deleted tracks are dropped from the returned list.
    """
    dets = np.asarray(detections, dtype=float).reshape(-1, 2)
    n_d = len(dets)
    if next_id is None:
        next_id = max((t.id for t in tracks), default=-1) + 1

    # predict
    for tr in tracks:
        tr.particles[:, :2] += tr.particles[:, 2:] * dt
        tr.particles += rng.normal(0.0, 1.0, tr.particles.shape) * [
            params.process_noise_pos, params.process_noise_pos,
            params.process_noise_vel, params.process_noise_vel,
        ]
        tr.age += 1

    n_t = len(tracks)
    r2 = params.measurement_noise**2
    if n_t and n_d:
        means = np.array([tr.mean()[:2] for tr in tracks])
        gated = np.hypot(means[:, None, 0] - dets[None, :, 0], means[:, None, 1] - dets[None, :, 1]) <= params.gate_radius
        # per-particle likelihoods for gated pairs only
        part_lik = {}
        log_lik = np.full((n_t, n_d), -np.inf)
        for t, d in zip(*np.nonzero(gated)):
            diff = tracks[t].particles[:, :2] - dets[d]
            lik = np.exp(-0.5 * np.einsum("ij,ij->i", diff, diff) / r2) / (2 * math.pi * r2)
            total = float(tracks[t].weights @ lik)
            part_lik[t, d] = (lik, total)
            log_lik[t, d] = math.log(total) if total > 0 else -np.inf
        gated &= np.isfinite(log_lik)
        beta = association_probabilities(log_lik, gated, params)
    else:
        gated = np.zeros((n_t, n_d), dtype=bool)
        part_lik = {}
        beta = np.zeros((n_t, n_d + 1))
        beta[:, n_d] = 1.0

    # update
    for t, tr in enumerate(tracks):
        mix = np.full(params.particle_count, beta[t, n_d])
        for d in np.flatnonzero(gated[t]).tolist():
            lik, total = part_lik[t, d]
            if beta[t, d] > 0:
                mix += beta[t, d] * lik / total
        w = tr.weights * mix
        s = w.sum()
        tr.weights = w / s if s > 0 and np.isfinite(s) else np.full(params.particle_count, 1.0 / params.particle_count)
        ess = 1.0 / float(np.sum(tr.weights**2))
        if ess < params.particle_count / 2:
            idx = _systematic_resample(tr.weights, rng)
            tr.particles = tr.particles[idx]
            tr.weights = np.full(params.particle_count, 1.0 / params.particle_count)
        tr.beta = {d: float(beta[t, d]) for d in np.flatnonzero(gated[t]).tolist()}
        tr.beta[None] = float(beta[t, n_d])

    # lifecycle
    survivors = []
    for t, tr in enumerate(tracks):
        associated = beta[t, n_d] < 0.5
        if associated:
            tr.miss_count = 0
            if not tr.confirmed:
                tr.hits += 1
                if tr.hits >= params.birth_confirm_frames:
                    tr.confirmed = True
        else:
            tr.miss_count += 1
            if not tr.confirmed:
                continue
        if tr.miss_count >= params.death_miss_frames:
            continue
        survivors.append(tr)

    claimed = gated.any(axis=0) if n_t else np.zeros(n_d, dtype=bool)
    for d in np.flatnonzero(~claimed).tolist():
        tr = spawn_track(next_id, dets[d], params, rng)
        if params.birth_confirm_frames <= 1:
            tr.confirmed = True
        survivors.append(tr)
        next_id += 1
    return survivors


class JPDAFTracker:
    """Stateful wrapper running :func:`jpdaf_step` frame by frame."""

    def __init__(self, params: TrackerParams = TrackerParams(), seed: int = 0, frame_rate: float = DEFAULT_FRAME_RATE):
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.dt = 1.0 / frame_rate
        self.tracks: list[Track] = []
        self._next_id = 0

    def step(self, detections) -> list[ObjectState]:
        self.tracks = jpdaf_step(self.tracks, detections, self.params, self.rng, self.dt, self._next_id)
        self._next_id = max(self._next_id, max((t.id for t in self.tracks), default=-1) + 1)
        return [estimate_state(t) for t in sorted(self.tracks, key=lambda t: t.id) if t.confirmed]


def track_scenario(scenario: Scenario, params: TrackerParams = TrackerParams(), seed: int = 0) -> list[Frame]:
    """Run the tracker over the observed channel; returns smoothed frames."""
    tracker = JPDAFTracker(params, seed, scenario.frame_rate)
    out = []
    for fr in scenario.observed:
        states = tracker.step([[o.px, o.py] for o in fr.objects])
        out.append(Frame(fr.index, fr.time, tuple(states)))
    return out
