"""Domain types and scenario file I/O.

Coordinates are ego-relative: the user sits at the origin, +y points in the
walking direction and +x to the right. Velocities are apparent velocities,
i.e. already include the user's own motion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

DEFAULT_FRAME_RATE = 15.0


class ScenarioError(ValueError):
    """Base class for malformed scenario data."""


class ScenarioParseError(ScenarioError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class ScenarioValidationError(ScenarioError):
    pass


@dataclass(frozen=True)
class ObjectState:
    id: int
    px: float
    py: float
    vx: float
    vy: float

    def __post_init__(self):
        if int(self.id) != self.id or self.id < 0:
            raise ScenarioValidationError(f"object id must be a nonnegative integer, got {self.id!r}")
        for name in ("px", "py", "vx", "vy"):
            if not math.isfinite(getattr(self, name)):
                raise ScenarioValidationError(
                    f"object {self.id}: non-finite {name} ({getattr(self, name)!r})"
                )

    @property
    def position(self) -> np.ndarray:
        return np.array([self.px, self.py])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    def as_row(self) -> list:
        return [self.id, self.px, self.py, self.vx, self.vy]


@dataclass(frozen=True)
class Frame:
    index: int
    time: float
    objects: tuple[ObjectState, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.index < 0:
            raise ScenarioValidationError(f"frame index must be >= 0, got {self.index}")
        seen = set()
        for obj in self.objects:
            if obj.id in seen:
                raise ScenarioValidationError(f"duplicate id {obj.id} in frame {self.index}")
            seen.add(obj.id)

    @property
    def ids(self) -> list[int]:
        return [o.id for o in self.objects]

    def get(self, object_id: int) -> ObjectState | None:
        for o in self.objects:
            if o.id == object_id:
                return o
        return None

    def as_array(self) -> np.ndarray:
        """Rows of ``[id, px, py, vx, vy]``; shape ``(n, 5)``."""
        if not self.objects:
            return np.zeros((0, 5))
        return np.array([o.as_row() for o in self.objects], dtype=float)


def make_frame(index: int, frame_rate: float, rows: Iterable) -> Frame:
    """Build a frame from ``[id, px, py, vx, vy]`` rows."""
    objs = [ObjectState(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4])) for r in rows]
    return Frame(index, index / frame_rate, tuple(objs))


@dataclass(frozen=True)
class Scenario:
    frame_rate: float
    ground_truth: tuple[Frame, ...]
    observed: tuple[Frame, ...]
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        object.__setattr__(self, "observed", tuple(self.observed))
        if not (self.frame_rate > 0 and math.isfinite(self.frame_rate)):
            raise ScenarioValidationError(f"frame_rate must be > 0, got {self.frame_rate!r}")
        if len(self.ground_truth) != len(self.observed):
            raise ScenarioValidationError(
                f"ground_truth has {len(self.ground_truth)} frames but observed has {len(self.observed)}"
            )
        for channel, frames in (("ground_truth", self.ground_truth), ("observed", self.observed)):
            for k, fr in enumerate(frames):
                if fr.index != k:
                    raise ScenarioValidationError(f"{channel} frame {k} has index {fr.index}")
                if fr.time != k / self.frame_rate:
                    raise ScenarioValidationError(
                        f"{channel} frame {k}: time {fr.time} != index / frame_rate"
                    )

    def __len__(self) -> int:
        return len(self.ground_truth)

    @property
    def duration(self) -> float:
        """Time stamp of the last frame (0 for empty scenarios)."""
        return (len(self) - 1) / self.frame_rate if len(self) else 0.0

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.frame_rate

    def gt_ids(self) -> list[int]:
        return sorted({o.id for fr in self.ground_truth for o in fr.objects})

    def with_observed(self, observed: Iterable[Frame], **metadata) -> "Scenario":
        meta = dict(self.metadata)
        meta.update(metadata)
        return Scenario(self.frame_rate, self.ground_truth, tuple(observed), meta)


@dataclass(frozen=True)
class WarningStream:
    """Set of warned (frame index, object id) cells.

    Cells absent from ``warn`` are non-warning.
    """

    warn: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "warn", frozenset(self.warn))

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[int, int], bool]) -> "WarningStream":
        return cls(frozenset(k for k, v in mapping.items() if v))

    def __contains__(self, key) -> bool:
        return key in self.warn

    def __len__(self) -> int:
        return len(self.warn)

    def __getitem__(self, key) -> bool:
        return key in self.warn

    def for_object(self, object_id: int) -> list[int]:
        return sorted(f for f, o in self.warn if o == object_id)

    def validate_against(self, scenario: Scenario, channel: str = "ground_truth") -> None:
        frames = getattr(scenario, channel)
        for f, o in self.warn:
            if not 0 <= f < len(frames) or frames[f].get(o) is None:
                raise ScenarioValidationError(f"warning cell (frame {f}, id {o}) not present in {channel}")


# -- file I/O ---------------------------------------------------------------


def _rows(frame: Frame) -> list:
    return [o.as_row() for o in frame.objects]


def save_scenario(s: Scenario, path) -> None:
    """Write ``s`` as line-delimited JSON (header, then gt/obs line pairs)."""
    path = Path(path)
    lines = [json.dumps({"frame_rate": s.frame_rate, "metadata": dict(s.metadata)}, allow_nan=False)]
    for gt, obs in zip(s.ground_truth, s.observed):
        lines.append(json.dumps({"f": gt.index, "gt": _rows(gt)}, allow_nan=False))
        lines.append(json.dumps({"f": obs.index, "obs": _rows(obs)}, allow_nan=False))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write scenario to {path}: {exc.strerror or exc}") from exc


def _parse_rows(rows, path, lineno: int, key: str):
    if not isinstance(rows, list):
        raise ScenarioParseError(path, lineno, f"'{key}' must be a list of records")
    out = []
    for r in rows:
        if not isinstance(r, list) or len(r) != 5:
            raise ScenarioParseError(path, lineno, f"'{key}' record must be [id, px, py, vx, vy], got {r!r}")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in r):
            raise ScenarioParseError(path, lineno, f"non-numeric value in record {r!r}")
        if isinstance(r[0], float) and not r[0].is_integer():
            raise ScenarioParseError(path, lineno, f"object id must be an integer, got {r[0]!r}")
        out.append(r)
    return out


def _check_rows(rows, frame: int, channel: str):
    for r in rows:
        oid = r[0]
        if oid < 0:
            raise ScenarioValidationError(f"{channel} frame {frame}: negative id {oid}")
        for name, v in zip(("px", "py", "vx", "vy"), r[1:]):
            if not math.isfinite(v):
                raise ScenarioValidationError(f"{channel} frame {frame}, id {oid}: non-finite {name}")


def load_scenario(path) -> Scenario:
    """Read a scenario file written by :func:`save_scenario`.

    Raises:
        ScenarioParseError: malformed line (carries the 1-based line number).
        ScenarioValidationError: well-formed records that violate an invariant.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw_lines = fh.read().split("\n")
    if raw_lines and raw_lines[-1] == "":
        raw_lines.pop()

    records = []
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            raise ScenarioParseError(path, lineno, "blank line")
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise ScenarioParseError(path, lineno, "record must be a JSON object")
        records.append((lineno, rec))

    if not records:
        raise ScenarioParseError(path, 1, "missing header line")
    lineno, header = records[0]
    if "frame_rate" not in header:
        raise ScenarioParseError(path, lineno, "header must contain 'frame_rate'")
    rate = header["frame_rate"]
    if not isinstance(rate, (int, float)) or isinstance(rate, bool):
        raise ScenarioParseError(path, lineno, "frame_rate must be a number")
    metadata = header.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ScenarioParseError(path, lineno, "metadata must be an object")
    if not (math.isfinite(rate) and rate > 0):
        raise ScenarioValidationError(f"frame_rate must be > 0, got {rate!r}")
    rate = float(rate)

    body = records[1:]
    if len(body) % 2:
        raise ScenarioParseError(path, body[-1][0], "frame has a 'gt' line without matching 'obs' line")
    gt_frames, obs_frames = [], []
    for k in range(len(body) // 2):
        (l_gt, rec_gt), (l_obs, rec_obs) = body[2 * k], body[2 * k + 1]
        for ln, rec, key in ((l_gt, rec_gt, "gt"), (l_obs, rec_obs, "obs")):
            if key not in rec or "f" not in rec:
                raise ScenarioParseError(path, ln, f"expected record with keys 'f' and '{key}'")
            if rec["f"] != k or isinstance(rec["f"], bool):
                raise ScenarioParseError(path, ln, f"expected frame index {k}, got {rec['f']!r}")
        gt_rows = _parse_rows(rec_gt["gt"], path, l_gt, "gt")
        obs_rows = _parse_rows(rec_obs["obs"], path, l_obs, "obs")
        _check_rows(gt_rows, k, "ground_truth")
        _check_rows(obs_rows, k, "observed")
        gt_frames.append(make_frame(k, rate, gt_rows))
        obs_frames.append(make_frame(k, rate, obs_rows))
    return Scenario(rate, tuple(gt_frames), tuple(obs_frames), metadata)
