"""Experiment drivers behind the command line: evaluate, tune, sweep, correlate.

Work is split into keyed tasks; results are reassembled by key, so output is
identical for any worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .baselines import DistanceParams, TtcParams
from .core import Scenario, make_frame
from .metrics import ConfusionCounts, iou
from .oracle import ideal_warning
from .pipeline import (
    EvalCase,
    RunConfig,
    build_cases,
    canonical_variant,
    evaluate_cases,
    pooled,
    raw_warnings,
    run_config,
)
from .postprocess import HysteresisParams, hysteresis_by_id
from .predict import UncertaintyParams
from .risk import RiskParams
from .synth import NoiseSpec, apply_noise, noisy_observations
from .tracking import track_scenario
from .tune import GaConfig, GaResult, ParamSpace, ParamSpec, ga_optimize, parameter_sweep, spearman_matrix

log = logging.getLogger(__name__)

RISK_CORE = (
    ParamSpec("risk_threshold", 1e-3, 0.5, "log"),
    ParamSpec("horizon_s_max", 3.0, 10.0),
    ParamSpec("interval_ds", 0.02, 0.5, "log"),
    ParamSpec("escape_rate", 0.01, 2.0, "log"),
)
RISK_SHAPE = (
    ParamSpec("cross_section", 0.05, 2.0, "log"),
    ParamSpec("sigma0", 0.05, 1.5, "log"),
    ParamSpec("growth_long", 0.0, 1.0),
    ParamSpec("growth_lat", 0.0, 0.5),
)
HYSTERESIS_GENES = (
    ParamSpec("n_on", 1, 8, integer=True),
    ParamSpec("n_off", 1, 30, integer=True),
)


def method_space(method: str, include_uncertainty: bool = False, include_hysteresis: bool = False) -> ParamSpace:
    if method == "risk":
        specs = RISK_CORE + (RISK_SHAPE if include_uncertainty else ())
    elif method == "ttc":
        specs = (ParamSpec("distance_threshold", 0.2, 3.0), ParamSpec("time_threshold", 0.5, 8.0))
    elif method == "distance":
        specs = (ParamSpec("distance_threshold", 0.2, 3.0),)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ParamSpace(specs + (HYSTERESIS_GENES if include_hysteresis else ()))


def current_values(cfg: RunConfig, space: ParamSpace) -> dict[str, float]:
    """Values of the space's parameters in ``cfg`` (used to seed the GA)."""
    flat = flat_params(cfg)
    return {n: flat[n] for n in space.names}


def flat_params(cfg: RunConfig) -> dict[str, float]:
    p = cfg.method_params()
    out = {k: v for k, v in asdict(p).items() if not isinstance(v, dict)}
    if cfg.method == "risk":
        out.update(asdict(cfg.risk.uncertainty))
    out.update(asdict(cfg.hysteresis))
    return out


def apply_values(cfg: RunConfig, values: Mapping[str, float]) -> RunConfig:
    """Copy of ``cfg`` with method/hysteresis parameters overridden."""
    values = dict(values)
    hyst = {k: int(values.pop(k)) for k in ("n_on", "n_off") if k in values}
    if hyst:
        cfg = replace(cfg, hysteresis=replace(cfg.hysteresis, **hyst))
    if cfg.method == "risk":
        unc = {k: values.pop(k) for k in ("sigma0", "growth_long", "growth_lat") if k in values}
        risk = replace(cfg.risk, uncertainty=replace(cfg.risk.uncertainty, **unc), **values)
        return replace(cfg, risk=risk)
    if cfg.method == "ttc":
        return replace(cfg, ttc=replace(cfg.ttc, **values))
    return replace(cfg, distance=replace(cfg.distance, **values))


# -- worker plumbing ----------------------------------------------------------

_STATE: dict = {}


def _init_worker(state: dict) -> None:
    _STATE.clear()
    _STATE.update(state)


def _map(fn: Callable, tasks: Sequence, workers: int, state: dict) -> list:
    """Order-preserving map, optionally across processes sharing ``state``."""
    if workers <= 1 or len(tasks) <= 1:
        saved = dict(_STATE)
        _init_worker(state)
        try:
            return [fn(t) for t in tasks]
        finally:
            _init_worker(saved)
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(state,)) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _fitness_task(task) -> float:
    cfg, values = task
    cfg = apply_values(cfg, values)
    cases = _STATE["cases"]
    hyst = None if cfg.variant == "plain" else cfg.hysteresis
    return iou(pooled(evaluate_cases(cases, cfg.method, cfg.method_params(), hyst)))


# -- evaluate ---------------------------------------------------------------


@dataclass
class EvaluationResult:
    names: list[str]
    counts: list[ConfusionCounts]

    @property
    def pooled(self) -> ConfusionCounts:
        return pooled(self.counts)

    @property
    def iou(self) -> float:
        return iou(self.pooled)


def prepare(scenarios: Sequence[Scenario], cfg: RunConfig) -> list[EvalCase]:
    if not scenarios:
        raise ValueError("no scenarios to evaluate")
    return build_cases(scenarios, cfg.variant, cfg.tracker, cfg.ideal, cfg.gate, cfg.seed)


def evaluate(scenarios: Sequence[Scenario], cfg: RunConfig, cases: Sequence[EvalCase] | None = None) -> EvaluationResult:
    cases = prepare(scenarios, cfg) if cases is None else cases
    hyst = None if cfg.variant == "plain" else cfg.hysteresis
    counts = evaluate_cases(cases, cfg.method, cfg.method_params(), hyst)
    names = [c.name or f"scenario_{k:03d}" for k, c in enumerate(cases)]
    return EvaluationResult(names, counts)


# -- tune -------------------------------------------------------------------


@dataclass
class TuneReport:
    method: str
    variant: str
    space: ParamSpace
    result: GaResult
    default_fitness: float
    config: RunConfig  # base config with the best parameters applied


def tune(
    scenarios: Sequence[Scenario],
    cfg: RunConfig,
    ga: GaConfig = GaConfig(),
    include_uncertainty: bool = False,
    include_hysteresis: bool = False,
    workers: int = 1,
    cases: Sequence[EvalCase] | None = None,
) -> TuneReport:
    """GA-tune ``cfg.method`` on ``scenarios`` (pooled IoU as fitness).

    The configuration's current parameter values seed the initial population,
    so the result is never worse than the starting point on this suite.
    """
    cases = prepare(scenarios, cfg) if cases is None else cases
    space = method_space(cfg.method, include_uncertainty, include_hysteresis and cfg.variant != "plain")
    state = {"cases": cases}
    start = current_values(cfg, space)

    def batch(values_list):
        return _map(_fitness_task, [(cfg, v) for v in values_list], workers, state)

    result = ga_optimize(space, None, ga, initial=[start], evaluate=batch)
    default_fitness = batch([start])[0]
    log.info("tuned %s/%s: IoU %.4f (start %.4f)", cfg.method, cfg.variant, result.best_fitness, default_fitness)
    return TuneReport(cfg.method, cfg.variant, space, result, default_fitness, apply_values(cfg, result.best_params))


def noisy_copies(scenarios: Sequence[Scenario], sigma: float, p: float, copies: int, seed: int = 0) -> list[Scenario]:
    """``copies`` independently corrupted replicas of every scenario."""
    return [apply_noise(sc, NoiseSpec(sigma, p, _noise_seed(seed, r, k)))
            for r in range(copies) for k, sc in enumerate(scenarios)]


@dataclass
class HysteresisSearch:
    best: HysteresisParams
    best_iou: float
    grid: list[dict]  # one row per (n_on, n_off)


def tune_hysteresis(
    scenarios: Sequence[Scenario],
    cfg: RunConfig,
    n_on: Sequence[int] = range(1, 9),
    n_off: Sequence[int] = range(1, 31),
    cases: Sequence[EvalCase] | None = None,
) -> HysteresisSearch:
    """Exhaustive search of the hysteresis counts with method parameters fixed.

    The grid is small and the warnings before hysteresis do not depend on the
    counts, so they are computed once. Ties keep the first (smallest) setting.
    """
    if cfg.variant == "plain":
        raise ValueError("hysteresis search needs a hysteresis variant")
    cases = prepare(scenarios, cfg) if cases is None else cases
    raw = [raw_warnings(cfg.method, cfg.method_params(), c) for c in cases]
    grid, best = [], None
    for a in n_on:
        for b in n_off:
            h = HysteresisParams(int(a), int(b))
            c = pooled([case.counts(hysteresis_by_id(w, case.ids, h)) for case, w in zip(cases, raw)])
            grid.append({"n_on": h.n_on, "n_off": h.n_off, "tp": c.tp, "fp": c.fp, "fn": c.fn, "iou": iou(c)})
            if best is None or iou(c) > best[1]:
                best = (h, iou(c))
    return HysteresisSearch(best[0], best[1], grid)


# -- noise sweep ------------------------------------------------------------


def _noise_seed(seed: int, repeat: int, scenario: int) -> int:
    # independent of the grid cell: every (sigma, p) cell of one repeat scales
    # the same standard-normal draws and the same swap events
    return int(np.random.SeedSequence([seed, repeat, scenario]).generate_state(1)[0])


def _sweep_cases(noisy_rows, cfg: RunConfig, k: int, sc: Scenario, tracker_seed_base: int) -> EvalCase:
    ideal, truth = _STATE["ideal"][k], _STATE["truth"][k]
    name = str(sc.metadata.get("name", ""))
    if cfg.variant == "hysteresis_jpdaf":
        noisy = sc if noisy_rows is None else sc.with_observed(
            [make_frame(f, sc.frame_rate, r) for f, r in enumerate(noisy_rows)])
        tseed = int(np.random.SeedSequence([tracker_seed_base, k]).generate_state(1)[0])
        tracked = track_scenario(noisy, cfg.tracker, tseed)
        return EvalCase.from_rows(sc, [fr.as_array() for fr in tracked], cfg.ideal, cfg.gate, ideal, name, truth)
    if noisy_rows is None:
        return EvalCase.build(sc, None, cfg.ideal, cfg.gate, ideal, name)
    return EvalCase.from_rows(sc, noisy_rows, cfg.ideal, cfg.gate, ideal, name, truth)


def _sweep_task(task) -> list[dict]:
    sigma, p, repeat = task
    scenarios: Sequence[Scenario] = _STATE["scenarios"]
    configs: Sequence[RunConfig] = _STATE["configs"]
    seed: int = _STATE["seed"]
    noisy = [noisy_observations(sc, NoiseSpec(sigma, p, _noise_seed(seed, repeat, k))) for k, sc in enumerate(scenarios)]
    rows = []
    cases_by_kind: dict[tuple, list[EvalCase]] = {}
    for cfg in configs:
        jpdaf = cfg.variant == "hysteresis_jpdaf"
        kind = (jpdaf, cfg.tracker if jpdaf else None, cfg.seed if jpdaf else None, cfg.ideal, cfg.gate)
        if kind not in cases_by_kind:
            cases_by_kind[kind] = [_sweep_cases(r, cfg, k, sc, cfg.seed) for k, (r, sc) in enumerate(zip(noisy, scenarios))]
        c = pooled(run_config(cases_by_kind[kind], cfg))
        rows.append({"method": cfg.method, "variant": cfg.variant, "sigma": sigma, "p": p, "repeat": repeat,
                     "tp": c.tp, "fp": c.fp, "fn": c.fn, "iou": iou(c)})
    return rows


def sweep_noise(
    scenarios: Sequence[Scenario],
    configs: Sequence[RunConfig],
    sigmas: Sequence[float],
    ps: Sequence[float],
    repeats: int = 30,
    seed: int = 0,
    workers: int = 1,
) -> list[dict]:
    """Long-format rows ``(method, variant, sigma, p, repeat, tp, fp, fn, iou)``.

    Every (sigma, p, repeat) cell draws one noisy copy of the suite shared by
    all configurations, so methods are compared on identical inputs.
    """
    if not sigmas or not ps:
        raise ValueError("noise grids must be non-empty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    tasks = [(float(s), float(p), r) for s in sigmas for p in ps for r in range(repeats)]
    rules = {(c.ideal) for c in configs}
    if len(rules) != 1:
        raise ValueError("all sweep configurations must share the ideal-warning rules")
    (rule,) = rules
    state = {"scenarios": list(scenarios), "configs": list(configs), "seed": seed,
             "ideal": [ideal_warning(sc, rule) for sc in scenarios],
             "truth": [[fr.as_array() for fr in sc.ground_truth] for sc in scenarios]}
    out = []
    for rows in _map(_sweep_task, tasks, workers, state):
        out.extend(rows)
    order = {(c.method, c.variant): k for k, c in enumerate(configs)}
    out.sort(key=lambda r: (order[r["method"], r["variant"]], r["sigma"], r["p"], r["repeat"]))
    return out


def summarize_sweep(rows: Sequence[dict]) -> list[dict]:
    """Mean/std IoU and pooled counts per (method, variant, sigma, p)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["method"], r["variant"], r["sigma"], r["p"]), []).append(r)
    out = []
    for (m, v, s, p), rs in groups.items():
        vals = np.array([r["iou"] for r in rs])
        c = pooled([ConfusionCounts(r["tp"], r["fp"], r["fn"]) for r in rs])
        out.append({"method": m, "variant": v, "sigma": s, "p": p, "repeats": len(rs),
                    "iou_mean": float(vals.mean()), "iou_std": float(vals.std(ddof=0)), "iou_pooled": iou(c)})
    return out


# -- correlation ------------------------------------------------------------


def correlate(
    scenarios: Sequence[Scenario],
    cfg: RunConfig,
    n_samples: int = 500,
    seed: int = 0,
    workers: int = 1,
    cases: Sequence[EvalCase] | None = None,
):
    """LHS sweep over the four core risk parameters and their Spearman matrix."""
    cfg = replace(cfg, method="risk")
    cases = prepare(scenarios, cfg) if cases is None else cases
    space = ParamSpace(RISK_CORE)
    state = {"cases": cases}

    def batch(values_list):
        return _map(_fitness_task, [(cfg, v) for v in values_list], workers, state)

    samples = parameter_sweep(space, None, n_samples, seed, evaluate=batch)
    labels, rho = spearman_matrix(samples)
    return labels, rho, samples


def default_config(method: str = "risk", variant: str = "plain") -> RunConfig:
    return RunConfig(method=method, variant=canonical_variant(variant), risk=RiskParams(uncertainty=UncertaintyParams()),
                     ttc=TtcParams(), distance=DistanceParams(), hysteresis=HysteresisParams())
