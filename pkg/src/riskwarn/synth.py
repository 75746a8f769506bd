"""Synthetic pedestrian scenarios and observation noise.

Every trajectory is anchored at a design point ``c`` reached at time ``t_c``
with velocity ``v_c``; optional constant turn rate bends the path around that
point, so collision templates keep their bubble entry regardless of curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import DEFAULT_FRAME_RATE, Frame, ObjectState, Scenario, make_frame

KINDS = ("head_on", "side_collision", "crossing", "crowd_approach", "static_pass", "receding")
CRITICAL_KINDS = ("head_on", "side_collision", "crossing", "crowd_approach")


@dataclass(frozen=True)
class ScenarioTemplate:
    kind: str
    duration: float = 20.0
    speed_range: tuple[float, float] = (0.5, 2.0)
    object_count: int = 5
    seed: int = 0
    speed: float | None = None
    start_distance: float | None = None
    miss_distance: float | None = None
    clearance: float | None = None
    n_colliding: int = 1
    distractors: int = 1
    turn_rate: float = 0.0
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown template kind {self.kind!r}; expected one of {KINDS}")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        lo, hi = self.speed_range
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid speed range {self.speed_range}")
        if self.speed is not None and self.speed < 0:
            raise ValueError("speed must be >= 0")
        if self.miss_distance is not None and self.miss_distance < 0:
            raise ValueError("miss distance must be >= 0")
        if self.clearance is not None and self.clearance < 0:
            raise ValueError("clearance must be >= 0")
        if self.start_distance is not None and self.start_distance <= 0:
            raise ValueError("start distance must be > 0")
        if self.kind == "crowd_approach" and not 0 <= self.n_colliding <= self.object_count:
            raise ValueError("n_colliding must lie in [0, object_count]")
        if self.object_count < 1 or self.distractors < 0:
            raise ValueError("object counts must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    position_sigma: float = 0.0
    id_swap_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.position_sigma < 0:
            raise ValueError("position_sigma must be >= 0")
        if not 0 <= self.id_swap_prob <= 1:
            raise ValueError("id_swap_prob must lie in [0, 1]")


@dataclass(frozen=True)
class _Path:
    anchor: np.ndarray  # position at t_anchor
    velocity: np.ndarray  # velocity at t_anchor
    t_anchor: float
    turn_rate: float = 0.0

    def states(self, t: np.ndarray) -> np.ndarray:
        """``(len(t), 4)`` position/velocity rows."""
        tau = np.asarray(t, dtype=float) - self.t_anchor
        w = self.turn_rate
        vx, vy = self.velocity
        if abs(w) < 1e-12:
            px = self.anchor[0] + vx * tau
            py = self.anchor[1] + vy * tau
            return np.stack([px, py, np.full_like(tau, vx), np.full_like(tau, vy)], axis=1)
        c, s = np.cos(w * tau), np.sin(w * tau)
        a, b = s / w, (1.0 - c) / w
        px = self.anchor[0] + a * vx - b * vy
        py = self.anchor[1] + b * vx + a * vy
        return np.stack([px, py, c * vx - s * vy, s * vx + c * vy], axis=1)


def _unit(angle):
    return np.array([np.cos(angle), np.sin(angle)])


def _speed(t: ScenarioTemplate, rng) -> float:
    return float(t.speed) if t.speed is not None else float(rng.uniform(*t.speed_range))


def _event_time(t: ScenarioTemplate, speed: float, rng, distance_hint=None) -> float:
    """Time of closest approach, leaving room for the lead and exit phases."""
    if distance_hint is not None:
        return distance_hint / max(speed, 1e-9)
    lo = min(4.0 + 1.0 / max(speed, 0.1), 0.6 * t.duration)
    hi = max(lo, t.duration - 2.5 / max(speed, 0.1))
    return float(rng.uniform(lo, hi))


def _collision_path(direction: np.ndarray, miss: float, speed: float, t_c: float, turn_rate: float, side: float = 1.0):
    normal = side * np.array([-direction[1], direction[0]])
    return _Path(miss * normal, speed * direction, t_c, turn_rate)


def _min_distance(path: _Path, times: np.ndarray) -> float:
    st = path.states(times)
    return float(np.hypot(st[:, 0], st[:, 1]).min())


def _distractor(t: ScenarioTemplate, rng, times: np.ndarray) -> _Path:
    """A passer-by that stays clear of the bubble (closest approach 1.3-4 m)."""
    for _ in range(100):
        speed = float(rng.uniform(*t.speed_range))
        heading = rng.uniform(-np.pi, np.pi)
        miss = float(rng.uniform(1.3, 4.0))
        t_c = float(rng.uniform(0.0, t.duration))
        path = _collision_path(_unit(heading), miss, speed, t_c, 0.0, side=rng.choice([-1.0, 1.0]))
        if _min_distance(path, times) >= 1.25:
            return path
    raise RuntimeError("could not place distractor")  # pragma: no cover


def _template_paths(t: ScenarioTemplate, rng, times: np.ndarray) -> list[_Path]:
    speed = _speed(t, rng)
    w = t.turn_rate
    paths: list[_Path] = []
    if t.kind == "head_on":
        offset = 0.0 if t.start_distance is not None else float(rng.uniform(-0.3, 0.3))
        t_c = _event_time(t, speed, rng, t.start_distance)
        paths.append(_collision_path(np.array([0.0, -1.0]), offset, speed, t_c, w))
    elif t.kind == "side_collision":
        side = rng.choice([-1.0, 1.0])
        # mostly lateral approach with some apparent forward component
        heading = np.arctan2(-rng.uniform(0.0, 0.6), -side)
        offset = float(rng.uniform(-0.3, 0.3))
        paths.append(_collision_path(_unit(heading), offset, speed, _event_time(t, speed, rng, t.start_distance), w))
    elif t.kind == "crossing":
        miss = float(rng.uniform(0.0, 0.8)) if t.miss_distance is None else float(t.miss_distance)
        heading = rng.uniform(np.radians(200), np.radians(340))
        side = rng.choice([-1.0, 1.0])
        paths.append(
            _collision_path(_unit(heading), miss, speed, _event_time(t, speed, rng, t.start_distance), w, side)
        )
    elif t.kind == "crowd_approach":
        t_c = _event_time(t, speed, rng, t.start_distance)
        v = np.array([0.0, -speed])
        n_side = t.object_count - t.n_colliding
        for k in range(t.n_colliding):
            x = float(rng.uniform(-0.3, 0.3))
            paths.append(_Path(np.array([x, 1.6 * k]), v, t_c, w))
        for k in range(n_side):
            side = -1.0 if k % 2 == 0 else 1.0
            x = side * float(rng.uniform(1.4, 2.6))
            y = 1.6 * (k // 2) + float(rng.uniform(-0.4, 0.4))
            paths.append(_Path(np.array([x, y]), v, t_c, 0.0))
    elif t.kind == "static_pass":
        clearance = float(rng.uniform(1.3, 1.9)) if t.clearance is None else float(t.clearance)
        side = rng.choice([-1.0, 1.0])
        t_c = _event_time(t, speed, rng, t.start_distance)
        paths.append(_Path(np.array([side * clearance, 0.0]), np.array([0.0, -speed]), t_c))
    elif t.kind == "receding":
        heading = rng.uniform(np.radians(20), np.radians(160))
        start = float(rng.uniform(2.5, 6.0)) if t.start_distance is None else float(t.start_distance)
        d = _unit(heading)
        paths.append(_Path(start * d, speed * d, 0.0))

    if t.kind != "crowd_approach":
        paths.extend(_distractor(t, rng, times) for _ in range(t.distractors))
    return paths


def generate_scenario(t: ScenarioTemplate) -> Scenario:
    """Noise-free scenario for template ``t`` (observed == ground truth)."""
    rng = np.random.default_rng(t.seed)
    n_frames = int(round(t.duration * t.frame_rate)) + 1
    times = np.arange(n_frames) / t.frame_rate
    paths = _template_paths(t, rng, times)
    tracks = np.stack([p.states(times) for p in paths], axis=1)  # (F, N, 4)
    frames = tuple(
        make_frame(k, t.frame_rate, [[i, *tracks[k, i]] for i in range(len(paths))]) for k in range(n_frames)
    )
    meta = {"template": t.kind, "seed": t.seed, "duration": t.duration, "turn_rate": t.turn_rate}
    return Scenario(t.frame_rate, frames, frames, meta)


def standard_suite(seed: int = 1, per_kind: int = 4, duration_range=(10.0, 30.0), speed_range=(0.5, 2.0)) -> list[Scenario]:
    """The evaluation mix: ``per_kind`` scenarios of every template kind.

    Half of the collision templates use a gentle constant turn rate so the
    suite contains non-linear apparent motion.
    """
    rng = np.random.default_rng(seed)
    out = []
    for kind in KINDS:
        for k in range(per_kind):
            turn = 0.0
            if kind in CRITICAL_KINDS and k % 2 == 1:
                turn = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.03, 0.12))
            tmpl = ScenarioTemplate(
                kind=kind,
                duration=float(np.round(rng.uniform(*duration_range), 1)),
                speed_range=tuple(speed_range),
                object_count=int(rng.integers(4, 7)),
                seed=int(rng.integers(0, 2**31 - 1)),
                turn_rate=turn,
            )
            sc = generate_scenario(tmpl)
            out.append(sc.with_observed(sc.observed, name=f"{kind}_{k:02d}", suite_seed=seed))
    return out


# -- observation noise ------------------------------------------------------


def _replace_observed(s: Scenario, rows_per_frame: list[np.ndarray], **meta) -> Scenario:
    frames = tuple(make_frame(k, s.frame_rate, rows) for k, rows in enumerate(rows_per_frame))
    return s.with_observed(frames, **meta)


def _observed_rows(s: Scenario) -> list[np.ndarray]:
    return [fr.as_array() for fr in s.observed]


def _finite_difference(rows: list[np.ndarray], frame_rate: float, only: dict[int, set] | None = None) -> list[np.ndarray]:
    prev: dict[int, np.ndarray] = {}
    out = []
    for k, arr in enumerate(rows):
        arr = arr.copy()
        cur = {}
        for r in arr:
            oid = int(r[0])
            if only is None or oid in only.get(k, ()):
                r[3:5] = (r[1:3] - prev[oid]) * frame_rate if oid in prev else 0.0
            cur[oid] = r[1:3].copy()
        prev = cur
        out.append(arr)
    return out


def recompute_velocities(s: Scenario) -> Scenario:
    """Replace observed velocities by two-frame finite differences of positions.

    Ids are matched across consecutive frames; an id seen for the first time
    gets zero velocity.
    """
    return _replace_observed(s, _finite_difference(_observed_rows(s), s.frame_rate))


def _noisy_rows(rows: list[np.ndarray], sigma: float, seed) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for arr in rows:
        arr = arr.copy()
        arr[:, 1:3] += rng.normal(0.0, sigma, size=(len(arr), 2))
        out.append(arr)
    return out


def _swapped_rows(rows: list[np.ndarray], p: float, seed) -> tuple[list[np.ndarray], dict[int, set]]:
    """Relabelled rows plus, per swap frame, the two labels that jumped."""
    rng = np.random.default_rng(seed)
    label: dict[int, int] = {}
    out, touched = [], {}
    for k, arr in enumerate(rows):
        ids = arr[:, 0].astype(int)
        for oid in ids:
            label.setdefault(int(oid), int(oid))
        if k > 0 and len(ids) >= 2 and rng.random() < p:
            a, b = sorted(rng.choice(np.sort(ids), size=2, replace=False).tolist())
            label[a], label[b] = label[b], label[a]
            touched[k] = {label[a], label[b]}
        arr = arr.copy()
        arr[:, 0] = [label[int(o)] for o in ids]
        out.append(arr[np.argsort(arr[:, 0], kind="stable")])
    return out, touched


def add_position_noise(s: Scenario, spec: NoiseSpec) -> Scenario:
    """Gaussian position noise on the observed channel, then velocity re-derivation."""
    if spec.position_sigma == 0:
        return s
    rows = _noisy_rows(_observed_rows(s), spec.position_sigma, spec.seed)
    return _replace_observed(s, _finite_difference(rows, s.frame_rate), position_sigma=spec.position_sigma)


def add_id_swaps(s: Scenario, spec: NoiseSpec) -> Scenario:
    """Persistently exchange observed ids of random object pairs.

    From frame 1 on, each frame with probability ``p`` picks a uniform pair of
    present objects and exchanges their labels for the rest of the scenario.
    The velocities of the two relabelled tracks at the swap frame become the
    finite difference across the jump, as a frame-to-frame tracker would
    report.
    """
    if spec.id_swap_prob == 0:
        return s
    rows, touched = _swapped_rows(_observed_rows(s), spec.id_swap_prob, spec.seed)
    if not touched:
        return s
    rows = _finite_difference(rows, s.frame_rate, only=touched)
    return _replace_observed(s, rows, id_swap_prob=spec.id_swap_prob)


def noisy_observations(s: Scenario, spec: NoiseSpec) -> list[np.ndarray] | None:
    """Observed rows after :func:`apply_noise`, or None when nothing changes.

    Equivalent to ``add_position_noise(add_id_swaps(s, a), b)`` with child
    seeds ``a`` and ``b`` of ``spec.seed``, computed in one pass without
    building intermediate scenarios.
    """
    swap_seed, noise_seed = np.random.SeedSequence(spec.seed).generate_state(2).tolist()
    rows = _observed_rows(s)
    touched: dict[int, set] = {}
    if spec.id_swap_prob > 0:
        swapped, touched = _swapped_rows(rows, spec.id_swap_prob, swap_seed)
        if touched:
            rows = swapped
    if spec.position_sigma > 0:
        return _finite_difference(_noisy_rows(rows, spec.position_sigma, noise_seed), s.frame_rate)
    if touched:
        return _finite_difference(rows, s.frame_rate, only=touched)
    return None


def apply_noise(s: Scenario, spec: NoiseSpec) -> Scenario:
    """ID swaps followed by position noise (which re-derives all velocities)."""
    rows = noisy_observations(s, spec)
    if rows is None:
        return s
    return _replace_observed(s, rows, position_sigma=spec.position_sigma, id_swap_prob=spec.id_swap_prob)
