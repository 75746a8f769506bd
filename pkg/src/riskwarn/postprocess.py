"""Warning hysteresis: debounce switch-on, bridge short dropouts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class HysteresisParams:
    n_on: int = 3
    n_off: int = 5

    def __post_init__(self):
        if int(self.n_on) != self.n_on or int(self.n_off) != self.n_off:
            raise ValueError("hysteresis frame counts must be integers")
        if self.n_on < 1 or self.n_off < 1:
            raise ValueError("n_on and n_off must be >= 1")


class Hysteresis:
    """Online two-state debouncer for a single object.

    >>> h = Hysteresis(HysteresisParams(n_on=2, n_off=2))
    >>> [h.update(x) for x in [1, 1, 0, 1, 0, 0]]
    [False, True, True, True, True, False]
    """

    def __init__(self, params: HysteresisParams):
        self.params = params
        self.state = False
        self._run = 0

    def update(self, raw: bool) -> bool:
        if bool(raw) != self.state:
            self._run += 1
            needed = self.params.n_off if self.state else self.params.n_on
            if self._run >= needed:
                self.state = not self.state
                self._run = 0
        else:
            self._run = 0
        return self.state


def apply_hysteresis(raw: Iterable[bool], params: HysteresisParams) -> list[bool]:
    h = Hysteresis(params)
    return [h.update(x) for x in raw]


def hysteresis_by_id(raw: np.ndarray, ids: np.ndarray, params: HysteresisParams) -> np.ndarray:
    """Apply hysteresis to flattened per-row warnings, one machine per id.

    Rows must be ordered by frame. An id absent from a frame keeps its machine
    state; the sequence for each id consists of the frames it appears in.
    """
    if params.n_on == 1 and params.n_off == 1:
        return np.asarray(raw, dtype=bool).copy()
    out = np.zeros(len(raw), dtype=bool)
    machines: dict[int, Hysteresis] = {}
    for k, (oid, r) in enumerate(zip(ids.tolist(), np.asarray(raw, dtype=bool).tolist())):
        m = machines.get(oid)
        if m is None:
            m = machines[oid] = Hysteresis(params)
        out[k] = m.update(r)
    return out
