"""Parameter tuning: real-coded genetic algorithm, Latin-hypercube sweeps and
Spearman correlation analysis.

Candidates live in a normalized gene space ``[0, 1]^d``; log-scaled
parameters are mapped through their logarithm, integer parameters are
rounded on decode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ParamSpec:
    name: str
    lower: float
    upper: float
    scale: str = "linear"
    integer: bool = False

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound must be < upper bound")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: scale must be 'linear' or 'log'")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError(f"{self.name}: log scale requires a positive lower bound")

    def decode(self, g: float) -> float:
        g = min(max(float(g), 0.0), 1.0)
        if self.scale == "log":
            v = math.exp(math.log(self.lower) + g * (math.log(self.upper) - math.log(self.lower)))
        else:
            v = self.lower + g * (self.upper - self.lower)
        v = min(max(v, self.lower), self.upper)
        return float(round(v)) if self.integer else v

    def encode(self, v: float) -> float:
        v = min(max(float(v), self.lower), self.upper)
        if self.scale == "log":
            return (math.log(v) - math.log(self.lower)) / (math.log(self.upper) - math.log(self.lower))
        return (v - self.lower) / (self.upper - self.lower)


@dataclass(frozen=True)
class ParamSpace:
    params: tuple[ParamSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def __len__(self):
        return len(self.params)

    def decode(self, genes: Sequence[float]) -> dict[str, float]:
        return {p.name: p.decode(g) for p, g in zip(self.params, genes)}

    def encode(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([p.encode(values[p.name]) for p in self.params])


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    generations: int = 40
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_sigma: float = 0.1
    elitism_count: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_rate <= 1):
            raise ValueError("crossover and mutation rates must lie in [0, 1]")
        if self.generations < 0 or self.tournament_size < 1 or self.mutation_sigma < 0:
            raise ValueError("invalid GA settings")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be smaller than the population")


@dataclass
class GaResult:
    best_params: dict[str, float]
    best_fitness: float
    history: list[dict] = field(default_factory=list)


Fitness = Callable[[Mapping[str, float]], float]
# maps a list of parameter dicts to their fitness values, preserving order
BatchEvaluator = Callable[[Sequence[Mapping[str, float]]], Sequence[float]]


def _serial(fitness: Fitness) -> BatchEvaluator:
    return lambda batch: [float(fitness(p)) for p in batch]


def ga_optimize(
    space: ParamSpace,
    fitness: Fitness,
    cfg: GaConfig = GaConfig(),
    initial: Iterable[Mapping[str, float]] = (),
    evaluate: BatchEvaluator | None = None,
) -> GaResult:
    """Maximize ``fitness`` over the box described by ``space``.

    Tournament selection, blend crossover (uniform in the parents' box
    widened by 10% of the range on each side), Gaussian mutation and
    elitism. ``initial`` seeds the first population (e.g. default
    parameters). Results depend only on ``cfg.seed``; ``evaluate`` may fan
    evaluations out concurrently as long as it preserves order.
    """
    rng = np.random.default_rng(cfg.seed)
    evaluate = evaluate or _serial(fitness)
    d = len(space)
    cache: dict[tuple, float] = {}

    def score(pop: np.ndarray) -> np.ndarray:
        decoded = [space.decode(g) for g in pop]
        keys = [tuple(p[n] for n in space.names) for p in decoded]
        pending, seen = [], set()
        for k, p in zip(keys, decoded):
            if k not in cache and k not in seen:
                pending.append((k, p))
                seen.add(k)
        if pending:
            for (k, _), v in zip(pending, evaluate([p for _, p in pending])):
                cache[k] = float(v)
        return np.array([cache[k] for k in keys])

    seeds = [space.encode(p) for p in initial][: cfg.population_size]
    pop = rng.random((cfg.population_size, d))
    if seeds:
        pop[: len(seeds)] = seeds
    fit = score(pop)

    best_idx = int(np.argmax(fit))
    best_genes, best_fit = pop[best_idx].copy(), float(fit[best_idx])
    history = [{"generation": 0, "best_fitness": best_fit, "generation_best": float(fit.max()),
                "mean_fitness": float(fit.mean())}]

    def tournament() -> np.ndarray:
        idx = rng.integers(0, cfg.population_size, cfg.tournament_size)
        return pop[idx[np.argmax(fit[idx])]]

    for gen in range(1, cfg.generations + 1):
        order = np.argsort(-fit, kind="stable")
        children = [pop[i].copy() for i in order[: cfg.elitism_count]]
        while len(children) < cfg.population_size:
            a, b = tournament(), tournament()
            if rng.random() < cfg.crossover_rate:
                lo = np.minimum(a, b) - 0.1
                hi = np.maximum(a, b) + 0.1
                c1, c2 = rng.uniform(lo, hi), rng.uniform(lo, hi)
            else:
                c1, c2 = a.copy(), b.copy()
            for c in (c1, c2):
                mask = rng.random(d) < cfg.mutation_rate
                c[mask] += rng.normal(0.0, cfg.mutation_sigma, int(mask.sum()))
                np.clip(c, 0.0, 1.0, out=c)
                if len(children) < cfg.population_size:
                    children.append(c)
        pop = np.array(children)
        fit = score(pop)
        k = int(np.argmax(fit))
        if fit[k] > best_fit:
            best_genes, best_fit = pop[k].copy(), float(fit[k])
        history.append({"generation": gen, "best_fitness": best_fit, "generation_best": float(fit.max()),
                        "mean_fitness": float(fit.mean())})

    return GaResult(space.decode(best_genes), best_fit, history)


def latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``(n, d)`` unit-cube samples with exactly one point per stratum per axis."""
    u = (rng.random((n, d)) + np.arange(n)[:, None]) / n
    for j in range(d):
        u[:, j] = u[rng.permutation(n), j]
    return u


def parameter_sweep(space: ParamSpace, fitness: Fitness, n_samples: int, seed: int = 0,
                    evaluate: BatchEvaluator | None = None) -> list[tuple[dict[str, float], float]]:
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    rng = np.random.default_rng(seed)
    params = [space.decode(g) for g in latin_hypercube(n_samples, len(space), rng)]
    values = (evaluate or _serial(fitness))(params)
    return [(p, float(v)) for p, v in zip(params, values)]


def spearman_matrix(samples: Sequence[tuple[Mapping[str, float], float]], value_name: str = "IoU"):
    """Pairwise Spearman correlations over parameter columns plus the value.

    Ties receive average ranks. A constant column correlates 0 with others.

    Returns:
        ``(labels, matrix)`` with ``matrix`` symmetric and unit-diagonal.
    """
    if len(samples) < 3:
        raise ValueError("spearman_matrix needs at least 3 samples")
    labels = list(samples[0][0].keys()) + [value_name]
    data = np.array([[p[k] for k in labels[:-1]] + [v] for p, v in samples], dtype=float)
    ranks = np.column_stack([rankdata(col, method="average") for col in data.T])
    centered = ranks - ranks.mean(axis=0)
    norm = np.sqrt((centered**2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = (centered.T @ centered) / np.outer(norm, norm)
    rho = np.where(np.isfinite(rho), rho, 0.0)
    rho = np.clip(0.5 * (rho + rho.T), -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return labels, rho
