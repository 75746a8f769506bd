"""Ideal (ground-truth) warning computed from full ground-truth trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Scenario, WarningStream

_EPS = 1e-9


@dataclass(frozen=True)
class IdealRules:
    lead_time: float = 3.0
    enter_radius: float = 1.0
    exit_radius: float = 2.0

    def __post_init__(self):
        if not 0 < self.enter_radius < self.exit_radius:
            raise ValueError("need 0 < enter_radius < exit_radius")
        if self.lead_time < 0:
            raise ValueError("lead_time must be >= 0")


def warning_intervals(times: np.ndarray, dist: np.ndarray, rules: IdealRules, end_time: float) -> list[tuple[float, float]]:
    """Merged warning intervals for one object sampled at ``times``.

    Each bubble entry at ``t_e`` opens ``[t_e - lead, t_x]`` where ``t_x`` is
    the first later sample outside the exit radius (``end_time`` if none).
    """
    inside = dist <= rules.enter_radius
    entries = np.flatnonzero(inside & ~np.r_[False, inside[:-1]])
    outside = np.flatnonzero(dist > rules.exit_radius)
    intervals = []
    for e in entries:
        later = outside[outside > e]
        t_exit = times[later[0]] if len(later) else end_time
        intervals.append((max(0.0, times[e] - rules.lead_time), min(t_exit, end_time)))
    merged: list[list[float]] = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1] + _EPS:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def ideal_frames(times: np.ndarray, dist: np.ndarray, rules: IdealRules, end_time: float) -> np.ndarray:
    """Boolean warn flag for each of the object's samples."""
    flags = np.zeros(len(times), dtype=bool)
    for a, b in warning_intervals(times, dist, rules, end_time):
        flags |= (times >= a - _EPS) & (times <= b + _EPS)
    return flags


def ideal_warning(scenario: Scenario, rules: IdealRules = IdealRules()) -> WarningStream:
    tracks: dict[int, tuple[list, list]] = {}
    for fr in scenario.ground_truth:
        for o in fr.objects:
            idx, d = tracks.setdefault(o.id, ([], []))
            idx.append(fr.index)
            d.append(float(np.hypot(o.px, o.py)))
    cells = set()
    end = scenario.duration
    for oid, (idx, d) in tracks.items():
        idx = np.array(idx)
        flags = ideal_frames(idx / scenario.frame_rate, np.array(d), rules, end)
        cells.update((int(f), oid) for f in idx[flags])
    return WarningStream(frozenset(cells))
