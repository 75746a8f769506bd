"""Evaluation pipeline: states -> method warnings -> hysteresis -> IoU.

An :class:`EvalCase` flattens one scenario (observed or tracked channel) into
row arrays and precomputes the association of every row with a ground-truth
object, so that evaluating a method with new parameters only costs the
method itself plus a few vectorized reductions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .baselines import DistanceParams, TtcParams, distance_warnings, ttc_warnings
from .core import Frame, Scenario, WarningStream
from .metrics import DEFAULT_GATE, ConfusionCounts, match_positions, unmatched_id
from .oracle import IdealRules, ideal_warning
from .postprocess import HysteresisParams, hysteresis_by_id
from .risk import RiskParams, batch_risk
from .tracking import TrackerParams, track_scenario

METHODS = ("risk", "ttc", "distance")
VARIANTS = ("plain", "hysteresis", "hysteresis_jpdaf")
VARIANT_ALIASES = {"hyst": "hysteresis", "hyst-jpdaf": "hysteresis_jpdaf", "hysteresis-jpdaf": "hysteresis_jpdaf"}


def canonical_variant(name: str) -> str:
    name = VARIANT_ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; expected one of {VARIANTS}")
    return name


@dataclass(frozen=True)
class RunConfig:
    method: str = "risk"
    variant: str = "plain"
    risk: RiskParams = field(default_factory=RiskParams)
    ttc: TtcParams = field(default_factory=TtcParams)
    distance: DistanceParams = field(default_factory=DistanceParams)
    hysteresis: HysteresisParams = field(default_factory=HysteresisParams)
    tracker: TrackerParams | None = field(default_factory=TrackerParams)
    ideal: IdealRules = field(default_factory=IdealRules)
    gate: float = DEFAULT_GATE
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.variant == "hysteresis_jpdaf" and self.tracker is None:
            raise ValueError("variant hysteresis_jpdaf requires tracker parameters")
        if not self.gate > 0:
            raise ValueError("metric gate must be > 0")

    def method_params(self):
        return {"risk": self.risk, "ttc": self.ttc, "distance": self.distance}[self.method]


def flatten_frames(frames: Sequence[Frame]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frame index, id and ``(px, py, vx, vy)`` of every row, frame-ordered."""
    counts = [len(fr.objects) for fr in frames]
    n = sum(counts)
    fidx = np.repeat(np.arange(len(frames)), counts)
    ids = np.empty(n, dtype=np.int64)
    states = np.empty((n, 4))
    k = 0
    for fr in frames:
        for o in fr.objects:
            ids[k] = o.id
            states[k] = (o.px, o.py, o.vx, o.vy)
            k += 1
    return fidx, ids, states


@dataclass
class EvalCase:
    """One scenario prepared for repeated evaluation."""

    name: str
    frame: np.ndarray  # (M,) frame index per input row
    ids: np.ndarray  # (M,) track / observed id per input row
    states: np.ndarray  # (M, 4)
    gt_cell: np.ndarray  # (M,) matched ground-truth id, or unmatched pseudo-id
    row_ideal: np.ndarray  # (M,) row is matched to an ideal-warning cell
    n_ideal: int

    @classmethod
    def build(
        cls,
        scenario: Scenario,
        frames: Sequence[Frame] | None = None,
        rules: IdealRules = IdealRules(),
        gate: float = DEFAULT_GATE,
        ideal: WarningStream | None = None,
        name: str = "",
    ) -> "EvalCase":
        """Prepare ``frames`` (default: the observed channel) of ``scenario``."""
        frames = scenario.observed if frames is None else frames
        if len(frames) != len(scenario):
            raise ValueError("frames and scenario differ in length")
        if all(fr is gt or fr.objects == gt.objects for fr, gt in zip(frames, scenario.ground_truth)):
            fidx, ids, states = flatten_frames(frames)
            return cls._assemble(scenario, fidx, ids, states, ids.copy(), rules, ideal, name)
        return cls.from_rows(scenario, [fr.as_array() for fr in frames], rules, gate, ideal, name)

    @classmethod
    def from_rows(
        cls,
        scenario: Scenario,
        rows: Sequence[np.ndarray],
        rules: IdealRules = IdealRules(),
        gate: float = DEFAULT_GATE,
        ideal: WarningStream | None = None,
        name: str = "",
        truth: Sequence[np.ndarray] | None = None,
    ) -> "EvalCase":
        """Like :meth:`build` from per-frame ``[id, px, py, vx, vy]`` arrays.

        ``truth`` optionally supplies the ground-truth arrays, for callers that
        prepare many noisy copies of one scenario.
        """
        if len(rows) != len(scenario):
            raise ValueError("rows and scenario differ in length")
        truth = [fr.as_array() for fr in scenario.ground_truth] if truth is None else truth
        counts = [len(r) for r in rows]
        fidx = np.repeat(np.arange(len(rows)), counts)
        flat = np.concatenate([np.asarray(r, float).reshape(-1, 5) for r in rows]) if rows else np.zeros((0, 5))
        ids = flat[:, 0].astype(np.int64)
        states = flat[:, 1:5].copy()
        gt_cell = np.empty(len(ids), dtype=np.int64)
        k = 0
        for r, g in zip(rows, truth):
            n = len(r)
            if n:
                j = match_positions(states[k : k + n, :2], g[:, 1:3], gate)
                for m in range(n):
                    gt_cell[k + m] = int(g[j[m], 0]) if j[m] >= 0 else unmatched_id(ids[k + m])
            k += n
        return cls._assemble(scenario, fidx, ids, states, gt_cell, rules, ideal, name)

    @classmethod
    def _assemble(cls, scenario, fidx, ids, states, gt_cell, rules, ideal, name) -> "EvalCase":
        ideal = ideal_warning(scenario, rules) if ideal is None else ideal
        row_ideal = np.fromiter(
            ((int(f), int(c)) in ideal.warn for f, c in zip(fidx, gt_cell)), dtype=bool, count=len(ids)
        )
        name = name or str(scenario.metadata.get("name", ""))
        return cls(name, fidx, ids, states, gt_cell, row_ideal, len(ideal))

    def counts(self, warn: np.ndarray) -> ConfusionCounts:
        tp = int(np.count_nonzero(warn & self.row_ideal))
        return ConfusionCounts(tp, int(np.count_nonzero(warn)) - tp, self.n_ideal - tp)

    def stream(self, warn: np.ndarray) -> WarningStream:
        """Warnings re-keyed onto ground-truth ids (as ``associate_streams``)."""
        return WarningStream(frozenset(zip(self.frame[warn].tolist(), self.gt_cell[warn].tolist())))


def raw_warnings(method: str, params, case: EvalCase) -> np.ndarray:
    if method == "risk":
        return batch_risk(case.states, case.frame, params) >= params.risk_threshold
    if method == "ttc":
        return ttc_warnings(case.states, params)
    if method == "distance":
        return distance_warnings(case.states, params)
    raise ValueError(f"unknown method {method!r}")


def method_warnings(method: str, params, case: EvalCase, hysteresis: HysteresisParams | None = None) -> np.ndarray:
    warn = raw_warnings(method, params, case)
    if hysteresis is not None:
        warn = hysteresis_by_id(warn, case.ids, hysteresis)
    return warn


def evaluate_cases(cases: Sequence[EvalCase], method: str, params, hysteresis: HysteresisParams | None = None) -> list[ConfusionCounts]:
    return [case.counts(method_warnings(method, params, case, hysteresis)) for case in cases]


def pooled(counts: Sequence[ConfusionCounts]) -> ConfusionCounts:
    total = ConfusionCounts()
    for c in counts:
        total = total + c
    return total


def build_cases(
    scenarios: Sequence[Scenario],
    variant: str,
    tracker: TrackerParams | None = None,
    rules: IdealRules = IdealRules(),
    gate: float = DEFAULT_GATE,
    seed: int = 0,
) -> list[EvalCase]:
    """Prepare scenarios for a variant; JPDAF variants run the tracker here."""
    variant = canonical_variant(variant)
    cases = []
    for k, sc in enumerate(scenarios):
        frames = None
        if variant == "hysteresis_jpdaf":
            tseed = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
            frames = track_scenario(sc, tracker or TrackerParams(), tseed)
        cases.append(EvalCase.build(sc, frames, rules, gate))
    return cases


def run_config(cases: Sequence[EvalCase], cfg: RunConfig) -> list[ConfusionCounts]:
    hyst = None if cfg.variant == "plain" else cfg.hysteresis
    return evaluate_cases(cases, cfg.method, cfg.method_params(), hyst)


def with_method_params(cfg: RunConfig, method: str, params) -> RunConfig:
    return replace(cfg, method=method, **{method: params})
