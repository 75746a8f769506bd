"""Warning IoU, track-to-object association and ID-switch counting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Frame, Scenario, WarningStream

DEFAULT_GATE = 0.75


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be >= 0")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def iou(c: ConfusionCounts) -> float:
    """``tp / (tp + fp + fn)``; 1.0 when nothing was required or raised."""
    denom = c.tp + c.fp + c.fn
    return 1.0 if denom == 0 else c.tp / denom


def confusion(ideal: WarningStream, method: WarningStream) -> ConfusionCounts:
    tp = len(ideal.warn & method.warn)
    return ConfusionCounts(tp, len(method.warn) - tp, len(ideal.warn) - tp)


def unmatched_id(track_id: int) -> int:
    """Pseudo-object id carrying the false positive of an unmatched track."""
    return -1 - int(track_id)


def match_positions(tracks: np.ndarray, truth: np.ndarray, gate: float = DEFAULT_GATE) -> np.ndarray:
    """Greedy nearest-pair matching of track positions to ground-truth positions.

    Pairs are taken in order of increasing distance; each side is used at most
    once and pairs farther apart than ``gate`` are never matched.

    Returns:
        For each track row, the index of its ground-truth row or -1.
    """
    tracks = np.asarray(tracks, dtype=float).reshape(-1, 2)
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    out = np.full(len(tracks), -1, dtype=int)
    if len(tracks) == 0 or len(truth) == 0:
        return out
    d = np.hypot(tracks[:, None, 0] - truth[None, :, 0], tracks[:, None, 1] - truth[None, :, 1])
    if len(tracks) == 1 and len(truth) == 1:
        if d[0, 0] <= gate:
            out[0] = 0
        return out
    ii, jj = np.nonzero(d <= gate)
    order = np.lexsort((jj, ii, d[ii, jj]))
    used_truth = set()
    for k in order:
        i, j = ii[k], jj[k]
        if out[i] < 0 and j not in used_truth:
            out[i] = j
            used_truth.add(j)
    return out


def frame_matches(tracked: Frame, truth: Frame, gate: float = DEFAULT_GATE) -> dict[int, int | None]:
    """Map each track id in ``tracked`` to a ground-truth id (or None)."""
    t_arr, g_arr = tracked.as_array(), truth.as_array()
    idx = match_positions(t_arr[:, 1:3], g_arr[:, 1:3], gate)
    return {int(t_arr[k, 0]): (int(g_arr[j, 0]) if j >= 0 else None) for k, j in enumerate(idx)}


def associate_streams(
    method: WarningStream,
    scenario: Scenario,
    gate: float = DEFAULT_GATE,
    tracked: Sequence[Frame] | None = None,
) -> WarningStream:
    """Re-key a warning stream from track ids to ground-truth object ids.

    ``tracked`` holds the frames whose ids ``method`` refers to (defaults to
    the scenario's observed channel). Every track in a frame takes part in the
    matching; warned tracks left without a partner become false positives on
    a per-track pseudo-object.
    """
    if gate <= 0:
        raise ValueError("gate must be > 0")
    frames = scenario.observed if tracked is None else tracked
    by_frame: dict[int, list[int]] = {}
    for f, oid in method.warn:
        by_frame.setdefault(f, []).append(oid)
    cells = set()
    for f, ids in by_frame.items():
        mapping = frame_matches(frames[f], scenario.ground_truth[f], gate)
        for oid in ids:
            gt = mapping.get(oid)
            cells.add((f, gt if gt is not None else unmatched_id(oid)))
    return WarningStream(frozenset(cells))


def track_assignments(tracked: Sequence[Frame], scenario: Scenario, gate: float = DEFAULT_GATE) -> list[dict[int, int]]:
    """Per frame, ground-truth id -> matched track id (matched objects only)."""
    out = []
    for trk, gt in zip(tracked, scenario.ground_truth):
        out.append({g: t for t, g in frame_matches(trk, gt, gate).items() if g is not None})
    return out


def id_switches(assignments: Sequence[Mapping[int, int]]) -> int:
    """Count frames where an object's matched track id differs from its last one."""
    last: dict[int, int] = {}
    switches = 0
    for frame in assignments:
        for gt, trk in frame.items():
            if gt in last and last[gt] != trk:
                switches += 1
            last[gt] = trk
    return switches
