"""Grey-box parameter identification against a recorded run.

A genetic algorithm searches the four-parameter box for the Peltier values
whose closed-loop re-simulation best matches the recorded temperature and
control-action traces.  The candidate run re-runs the controller, so the
duty trace responds to the candidate physics: matching both signals is what
pins the parameters, since feedback alone would hide model error in y.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

from .engine import (
    DataError,
    PiecewiseConstant,
    RunLog,
    Scenario,
    SimulationDiverged,
    require_same_grid,
    simulate,
)
from .control import ControllerFault, SetpointProfile
from .physics import PeltierParams, SignConvention
from .sensor import SensorModel

PARAM_NAMES = ("alpha", "r", "k", "c")


@dataclass(frozen=True)
class ParamBounds:
    """Closed search intervals per parameter; defaults are the published box."""

    alpha: tuple[float, float] = (0.010, 0.200)
    r: tuple[float, float] = (1.8, 6.0)
    k: tuple[float, float] = (0.2, 0.833)
    c: tuple[float, float] = (15.0, 30.0)

    def __post_init__(self) -> None:
        for name in PARAM_NAMES:
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise DataError(f"bound for {name} must satisfy lo < hi, got ({lo}, {hi})")

    def contains(self, p: PeltierParams) -> bool:
        return all(
            getattr(self, name)[0] <= getattr(p, name) <= getattr(self, name)[1]
            for name in PARAM_NAMES
        )

    def sample(self, rng: random.Random) -> PeltierParams:
        values = {
            name: rng.uniform(*getattr(self, name)) for name in PARAM_NAMES
        }
        return PeltierParams(**values)


@dataclass(frozen=True)
class GaConfig:
    generations: int = 100
    parent_pool: int = 3
    mutation_probability: float = 0.9
    features_per_mutation: int = 2
    offspring_per_generation: int = 6
    elitism: int = 1
    seed: int = 0
    early_stop_tolerance: float = 0.0  # 0 disables
    weight_y: float = 1.0
    weight_u: float = 1.0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.parent_pool < 2:
            raise DataError("parent_pool must be >= 2")
        if not 0 <= self.features_per_mutation <= len(PARAM_NAMES):
            raise DataError("features_per_mutation must be within 0..4")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise DataError("mutation_probability must lie in [0, 1]")
        if self.generations < 0 or self.offspring_per_generation < 1:
            raise DataError("generations must be >= 0 and offspring >= 1")
        if not 0 <= self.elitism <= self.parent_pool:
            raise DataError("elitism must be within 0..parent_pool")


@dataclass
class GaResult:
    best: PeltierParams
    best_cost: float
    history: list[float]  # best-so-far cost after each generation
    evaluations: int
    seed: int
    config: GaConfig


def cost(
    reference: RunLog,
    candidate: RunLog,
    weight_y: float = 1.0,
    weight_u: float = 1.0,
) -> float:
    """Trapezoidal integral of w_y*(y_r - y_c)^2 + w_u*(u_r - u_c)^2 over time.

    Both logs must share one time grid with at least two samples.
    """
    reference.validate()
    candidate.validate()
    if len(reference.samples) < 2:
        raise DataError("cost needs at least two samples")
    require_same_grid(reference, candidate)

    total = 0.0
    prev_val = None
    prev_t = None
    for ref, cand in zip(reference.samples, candidate.samples):
        dy = ref.y - cand.y
        du = ref.u - cand.u
        val = weight_y * dy * dy + weight_u * du * du
        if prev_val is not None:
            total += 0.5 * (val + prev_val) * (ref.t - prev_t)
        prev_val = val
        prev_t = ref.t
    return total


def _reference_profile(reference: RunLog, t0: float) -> SetpointProfile:
    """Reconstruct the setpoint program actually applied during the run,
    rebased so the reference's first sample sits at time zero."""
    segments: list[tuple[float, float]] = []
    for s in reference.samples:
        if not segments or segments[-1][1] != s.setpoint:
            segments.append((s.t - t0, s.setpoint))
    return SetpointProfile.steps(segments)


def build_candidate_scenario(
    reference: RunLog, params: PeltierParams, convention: SignConvention
) -> tuple[Scenario, Callable[[float], float]]:
    """Scenario for re-running the reference conditions with candidate physics.

    Setpoint program and ambient trace come from the recorded telemetry, not
    from the configured profile, so operator setpoint changes made during the
    reference session are honored.  The candidate runs noise-free, starts from
    the first recorded measurement, and uses a clock rebased to the first
    recorded sample (a shadow session may have joined a running plant
    mid-stream, so the reference need not start at t=0).
    """
    if reference.scenario is None:
        raise DataError("reference run carries no scenario metadata")
    base = reference.scenario
    t0 = reference.samples[0].t
    profile = _reference_profile(reference, t0)
    ambient = PiecewiseConstant([(s.t - t0, s.t_env) for s in reference.samples])
    duration = reference.samples[-1].t - t0
    scenario = Scenario(
        params=params,
        env=base.env,
        pid=base.pid,
        profile=profile,
        drive=base.drive,
        convention=convention,
        sensor=SensorModel(enabled=False),
        dt_physics=base.dt_physics,
        dt_control=base.dt_control,
        duration=duration,
        seed=base.seed,
        t_initial_c=reference.samples[0].y,
    )
    return scenario, ambient


def evaluate_candidate(
    reference: RunLog,
    params: PeltierParams,
    convention: SignConvention,
    weight_y: float = 1.0,
    weight_u: float = 1.0,
) -> float:
    """Closed-loop cost of one parameter set; +inf when the candidate diverges."""
    scenario, ambient = build_candidate_scenario(reference, params, convention)
    try:
        run = simulate(scenario, ambient)
    except (SimulationDiverged, ControllerFault):
        return math.inf
    t0 = reference.samples[0].t
    if t0 != 0.0:
        # stamp the candidate's rebased grid back onto the reference times
        run = RunLog(
            source=run.source,
            samples=[
                replace(s, t=ref.t)
                for s, ref in zip(run.samples, reference.samples)
            ],
            scenario=run.scenario,
        )
    return cost(reference, run, weight_y, weight_u)


def _eval_for_pool(args: tuple) -> float:
    reference, params, convention, wy, wu = args
    return evaluate_candidate(reference, params, convention, wy, wu)


@dataclass
class _Individual:
    params: PeltierParams
    cost: float


def ga_optimize(
    reference: RunLog,
    bounds: ParamBounds = ParamBounds(),
    cfg: GaConfig = GaConfig(),
    convention: SignConvention = SignConvention.ENERGY_CONSERVING,
    progress: Callable[[int, float], None] | None = None,
) -> GaResult:
    """Genetic search for the parameters that reproduce the reference run.

    Each generation: offspring are bred from the survivor pool by uniform
    crossover, mutated with probability ``mutation_probability`` by resampling
    exactly ``features_per_mutation`` randomly chosen parameters uniformly
    within their bounds, scored closed-loop, then the next pool is formed from
    ``elitism`` unconditional bests plus tournament winners.  Evaluation order
    and aggregation are fixed by candidate index, so enabling workers never
    changes the outcome.
    """
    reference.validate()
    rng = random.Random(cfg.seed)
    evaluations = 0

    def score(batch: list[PeltierParams]) -> list[float]:
        nonlocal evaluations
        evaluations += len(batch)
        for p in batch:
            if not bounds.contains(p):
                raise AssertionError(f"candidate escaped bounds: {p}")
        if cfg.workers > 1 and len(batch) > 1:
            payload = [
                (reference, p, convention, cfg.weight_y, cfg.weight_u) for p in batch
            ]
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                return list(pool.map(_eval_for_pool, payload))
        return [
            evaluate_candidate(reference, p, convention, cfg.weight_y, cfg.weight_u)
            for p in batch
        ]

    def crossover(a: PeltierParams, b: PeltierParams) -> PeltierParams:
        values = {
            name: getattr(a if rng.random() < 0.5 else b, name)
            for name in PARAM_NAMES
        }
        return PeltierParams(**values)

    def mutate(p: PeltierParams) -> PeltierParams:
        if rng.random() >= cfg.mutation_probability or cfg.features_per_mutation == 0:
            return p
        chosen = rng.sample(PARAM_NAMES, cfg.features_per_mutation)
        changes = {name: rng.uniform(*getattr(bounds, name)) for name in chosen}
        return p.replace(**changes)

    def tournament(pool: list[_Individual], size: int = 3) -> _Individual:
        contenders = [pool[rng.randrange(len(pool))] for _ in range(min(size, len(pool)))]
        return min(contenders, key=lambda ind: ind.cost)

    initial = [bounds.sample(rng) for _ in range(cfg.parent_pool)]
    pool = [
        _Individual(p, c) for p, c in zip(initial, score(initial))
    ]
    best = min(pool, key=lambda ind: ind.cost)
    history: list[float] = []

    for generation in range(cfg.generations):
        offspring_params = []
        for _ in range(cfg.offspring_per_generation):
            mother = tournament(pool)
            father = tournament(pool)
            offspring_params.append(mutate(crossover(mother.params, father.params)))
        offspring = [
            _Individual(p, c) for p, c in zip(offspring_params, score(offspring_params))
        ]

        combined = pool + offspring
        combined.sort(key=lambda ind: ind.cost)
        if combined[0].cost < best.cost:
            best = combined[0]
        history.append(best.cost)
        if progress is not None:
            progress(generation + 1, best.cost)

        survivors = combined[: cfg.elitism]
        remainder = combined[cfg.elitism :]
        while len(survivors) < cfg.parent_pool and remainder:
            pick = tournament(remainder)
            remainder.remove(pick)
            survivors.append(pick)
        pool = survivors

        if cfg.early_stop_tolerance > 0.0 and best.cost <= cfg.early_stop_tolerance:
            break

    return GaResult(
        best=best.params,
        best_cost=best.cost,
        history=history,
        evaluations=evaluations,
        seed=cfg.seed,
        config=cfg,
    )


PRESETS: dict[str, PeltierParams] = {
    "datasheet": PeltierParams(alpha=0.053, r=1.8, k=0.5555, c=15.0),
    "measurement": PeltierParams(alpha=0.040, r=6.0, k=0.3333, c=15.0),
    "experience": PeltierParams(alpha=0.075, r=2.90, k=0.3808, c=31.4173),
    "paper_bm": PeltierParams(alpha=0.0358, r=3.35, k=0.2882, c=15.0),
}


def preset_params(name: str) -> PeltierParams:
    """Published parameter sets by provenance (datasheet, measurement,
    experience) plus the behavioral-matching result (paper_bm)."""
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None
