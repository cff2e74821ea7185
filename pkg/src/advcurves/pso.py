"""Bounded particle swarm search and the end-to-end attack loop.

Particles move under inertia plus attraction toward personal and global
bests; positions are clamped into bounds (clamped dimensions get their
velocity zeroed) so the swarm size stays constant. The attack loop stops
the moment any evaluation's confidence drops below the success threshold,
which is what keeps query counts low.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .eot import TransformConfig, expected_confidence
from .geometry import (
    PixelSet,
    ShapeFamily,
    curve_search_bounds,
    decode_params,
    decode_shape,
    rasterize_curveset,
    shape_search_bounds,
)
from .imaging import BoundingBox, GrayImage, Mask, fuse, make_mask
from .oracle import DetectorOracle
from .remote import OracleError

Bounds = tuple[np.ndarray, np.ndarray]
FitnessFn = Callable[[np.ndarray, np.random.Generator], float]

DEFAULT_SUCCESS_THRESHOLD = 0.5
DEFAULT_IOU_THRESHOLD = 0.45


@dataclass(frozen=True)
class PsoHyper:
    """Swarm hyperparameters; defaults follow the reference tuning.

    omega_end enables the standard linearly-decreasing inertia schedule
    (omega at generation 1 down to omega_end at the last generation);
    leave it None for a constant inertia factor. Fixed r values make the
    update deterministic, which suits coarse disappearance searches but
    stalls on precision benchmarks; use "uniform" mode for those.
    """

    omega: float = 0.9
    c1: float = 1.6
    c2: float = 1.4
    r1: float | str = 0.5  # fixed value in [0,1], or "uniform" per update
    r2: float | str = 0.5
    alpha: int = 10
    iterations: int = 40
    vmax: float = 0.25  # velocity cap as a fraction of each bound's width
    omega_end: float | None = None

    def __post_init__(self) -> None:
        if self.omega < 0 or self.c1 < 0 or self.c2 < 0:
            raise ValueError("omega, c1, c2 must be non-negative")
        for name, r in (("r1", self.r1), ("r2", self.r2)):
            if isinstance(r, str):
                if r != "uniform":
                    raise ValueError(f"{name} must be a fixed value or 'uniform'")
            elif not 0.0 <= r <= 1.0:
                raise ValueError(f"fixed {name} must be in [0, 1]")
        if self.alpha < 2:
            raise ValueError("population size must be >= 2")
        if self.iterations < 1:
            raise ValueError("iteration count must be >= 1")
        if not 0.0 < self.vmax:
            raise ValueError("vmax must be positive")
        if self.omega_end is not None and self.omega_end < 0:
            raise ValueError("omega_end must be non-negative")

    def omega_at(self, generation: int) -> float:
        """Inertia factor for the step leaving the given generation."""
        if self.omega_end is None or self.iterations <= 1:
            return self.omega
        frac = min(max(generation - 1, 0), self.iterations - 1) / (self.iterations - 1)
        return self.omega + (self.omega_end - self.omega) * frac


@dataclass
class Particle:
    """Read-only snapshot of one swarm member."""

    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float


class Swarm:
    """Positions, velocities, and best-so-far state for all particles."""

    def __init__(
        self,
        positions: np.ndarray,
        velocities: np.ndarray,
        rngs: list[np.random.Generator],
    ):
        self.positions = positions
        self.velocities = velocities
        self.pbest_positions = positions.copy()
        self.pbest_fitness = np.full(positions.shape[0], np.inf)
        self.gbest_position: np.ndarray | None = None
        self.gbest_fitness = float("inf")
        self.generation = 0
        self.rngs = rngs

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def particle(self, i: int) -> Particle:
        return Particle(
            self.positions[i].copy(),
            self.velocities[i].copy(),
            self.pbest_positions[i].copy(),
            float(self.pbest_fitness[i]),
        )


def _vmax_abs(bounds: Bounds, vmax: float) -> np.ndarray:
    lo, hi = bounds
    return vmax * (hi - lo)


def init_swarm(
    alpha: int, bounds: Bounds, vmax: float, seed: int | np.random.SeedSequence
) -> Swarm:
    """Uniform random positions in bounds, velocities in +/-vmax per dim.

    Each particle owns a random stream forked from the run seed, so results
    do not depend on evaluation scheduling.
    """
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    if alpha < 2:
        raise ValueError("population size must be >= 2")
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("bounds must be matching 1-D arrays")
    if (hi < lo).any():
        raise ValueError("every upper bound must be >= its lower bound")
    if (hi == lo).all():
        raise ValueError("degenerate bounds: lo == hi in every dimension")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(child) for child in ss.spawn(alpha)]
    vcap = _vmax_abs((lo, hi), vmax)
    positions = np.stack([rng.uniform(lo, hi) for rng in rngs])
    velocities = np.stack([rng.uniform(-vcap, vcap) for rng in rngs])
    return Swarm(positions, velocities, rngs)


def evaluate_particle(swarm: Swarm, i: int, fitness: FitnessFn) -> float:
    """Evaluate particle i and fold the result into its personal best.

    A raised evaluation leaves the personal best untouched.
    """
    fit = fitness(swarm.positions[i], swarm.rngs[i])
    if fit < swarm.pbest_fitness[i]:
        swarm.pbest_fitness[i] = fit
        swarm.pbest_positions[i] = swarm.positions[i].copy()
    return fit


def update_gbest(swarm: Swarm) -> None:
    """Global best = argmin over personal bests; ties go to the lowest index."""
    idx = int(np.argmin(swarm.pbest_fitness))
    if swarm.pbest_fitness[idx] <= swarm.gbest_fitness:
        swarm.gbest_fitness = float(swarm.pbest_fitness[idx])
        swarm.gbest_position = swarm.pbest_positions[idx].copy()


def step(swarm: Swarm, hyper: PsoHyper, bounds: Bounds) -> None:
    """One velocity/position update for every particle.

    v <- omega*v + c1*r1*(pbest - x) + c2*r2*(gbest - x), capped at +/-vmax;
    x <- x + v, clamped into bounds with clamped dimensions' velocity zeroed.
    """
    if swarm.gbest_position is None:
        raise ValueError("gbest is undefined; evaluate the swarm first")
    lo, hi = bounds
    vcap = _vmax_abs(bounds, hyper.vmax)
    x = swarm.positions
    v = swarm.velocities
    if isinstance(hyper.r1, str) or isinstance(hyper.r2, str):
        r1 = np.empty_like(x)
        r2 = np.empty_like(x)
        for i, rng in enumerate(swarm.rngs):
            r1[i] = hyper.r1 if not isinstance(hyper.r1, str) else rng.uniform(size=swarm.dim)
            r2[i] = hyper.r2 if not isinstance(hyper.r2, str) else rng.uniform(size=swarm.dim)
    else:
        r1 = hyper.r1
        r2 = hyper.r2
    omega = hyper.omega_at(swarm.generation + 1)
    v = omega * v + hyper.c1 * r1 * (swarm.pbest_positions - x) + hyper.c2 * r2 * (
        swarm.gbest_position - x
    )
    np.clip(v, -vcap, vcap, out=v)
    moved = x + v
    clamped = (moved < lo) | (moved > hi)
    np.clip(moved, lo, hi, out=moved)
    v[clamped] = 0.0
    swarm.positions = moved
    swarm.velocities = v
    swarm.generation += 1


@dataclass
class MinimizeResult:
    best_position: np.ndarray
    best_fitness: float
    evaluations: int
    iterations: int
    stopped_early: bool


def minimize(
    fitness: FitnessFn,
    bounds: Bounds,
    hyper: PsoHyper,
    seed: int | np.random.SeedSequence,
    stop_below: float | None = None,
    on_generation: Callable[[Swarm], None] | None = None,
) -> MinimizeResult:
    """Serial reference PSO loop over a plain fitness function."""
    swarm = init_swarm(hyper.alpha, bounds, hyper.vmax, seed)
    evaluations = 0
    stopped = False
    b = 0
    for b in range(1, hyper.iterations + 1):
        for i in range(swarm.size):
            fit = evaluate_particle(swarm, i, fitness)
            evaluations += 1
            update_gbest(swarm)
            if stop_below is not None and fit < stop_below:
                stopped = True
                break
        if on_generation is not None:
            on_generation(swarm)
        if stopped or b == hyper.iterations:
            break
        step(swarm, hyper, bounds)
    assert swarm.gbest_position is not None
    return MinimizeResult(
        swarm.gbest_position, swarm.gbest_fitness, evaluations, b, stopped
    )


@dataclass
class PerturbationProblem:
    """Maps a search vector to a fused adversarial image's fitness."""

    clean: GrayImage
    target: BoundingBox
    target_class: str
    mask: Mask
    oracle: DetectorOracle
    eot: TransformConfig
    family: str
    k: int
    polarity: str
    stroke_width: float
    bounds: Bounds
    iou_threshold: float = DEFAULT_IOU_THRESHOLD

    def raster(self, position: np.ndarray) -> PixelSet:
        canvas = (self.clean.width, self.clean.height)
        if self.family == "bezier":
            curveset = decode_params(
                position, self.k, self.bounds, self.polarity, self.stroke_width
            )
            return rasterize_curveset(curveset, canvas)
        lo, hi = self.bounds
        clamped = np.clip(np.asarray(position, dtype=np.float64), lo, hi)
        shape = ShapeFamily(self.family, tuple(clamped), self.stroke_width)
        return decode_shape(shape, canvas)

    def masked_raster(self, position: np.ndarray) -> PixelSet:
        raster = self.raster(position)
        keep = self.mask.bits[raster.rows, raster.cols]
        coords = np.stack([raster.rows[keep], raster.cols[keep]], axis=1)
        return PixelSet(coords, raster.width, raster.height)

    def adversarial(self, position: np.ndarray) -> GrayImage:
        return fuse(self.clean, self.raster(position), self.polarity, self.mask)

    def fitness(self, position: np.ndarray, rng: np.random.Generator) -> float:
        return expected_confidence(
            self.oracle,
            self.adversarial(position),
            self.target,
            self.eot,
            rng,
            self.iou_threshold,
            self.target_class,
        )


@dataclass
class AttackResult:
    """Outcome of one attack run against one target."""

    success: bool
    final_confidence: float
    queries: int
    best_params: np.ndarray
    adversarial_image: GrayImage
    iterations_used: int
    raster: PixelSet
    target: BoundingBox
    target_class: str
    k: int
    polarity: str
    family: str
    error: str | None = None


def default_stroke_width(target: BoundingBox) -> float:
    """Thin strokes sized to the target: 5% of its width, at least 1 px."""
    return float(max(1, round(0.05 * target.w)))


def attack_bounds(
    family: str, target: BoundingBox, canvas: tuple[int, int], k: int
) -> Bounds:
    """Search bounds confining shape coordinates to target intersect canvas."""
    width, height = canvas
    x0 = max(target.x, 0)
    y0 = max(target.y, 0)
    x1 = min(target.x + target.w - 1, width - 1)
    y1 = min(target.y + target.h - 1, height - 1)
    if x1 < x0 or y1 < y0:
        raise ValueError(f"target box {target} lies outside the canvas")
    box_w = x1 - x0 + 1
    box_h = y1 - y0 + 1
    if family == "bezier":
        return curve_search_bounds(x0, y0, box_w, box_h, k)
    return shape_search_bounds(family, x0, y0, box_w, box_h, k)


def run_attack(
    clean_image: GrayImage,
    target: BoundingBox,
    oracle: DetectorOracle,
    k: int = 2,
    polarity: str = "black",
    hyper: PsoHyper = PsoHyper(),
    eot_config: TransformConfig = TransformConfig(),
    seed: int | np.random.SeedSequence = 0,
    *,
    stroke_width: float | None = None,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD,
    target_class: str = "person",
    family: str = "bezier",
    eval_workers: int = 1,
) -> AttackResult:
    """Optimize a perturbation until the target's confidence collapses.

    Serial mode (eval_workers=1) is the deterministic reference: particles
    evaluate in index order and the run stops at the first evaluation below
    the success threshold. With eval_workers > 1 (requires a
    concurrent-safe oracle) evaluations within a generation run in
    parallel and bests merge at the generation boundary.
    """
    canvas = (clean_image.width, clean_image.height)
    mask = make_mask(target, canvas)
    width = stroke_width if stroke_width is not None else default_stroke_width(target)
    bounds = attack_bounds(family, target, canvas, k)
    problem = PerturbationProblem(
        clean=clean_image,
        target=target,
        target_class=target_class,
        mask=mask,
        oracle=oracle,
        eot=eot_config,
        family=family,
        k=k,
        polarity=polarity,
        stroke_width=width,
        bounds=bounds,
        iou_threshold=iou_threshold,
    )
    if eval_workers > 1 and not oracle.concurrent_safe:
        raise ValueError("oracle is serial-only; eval_workers must be 1")

    queries_before = oracle.ledger.count
    swarm = init_swarm(hyper.alpha, bounds, hyper.vmax, seed)
    stopped = False
    error: str | None = None
    b = 0
    for b in range(1, hyper.iterations + 1):
        try:
            if eval_workers > 1:
                with ThreadPoolExecutor(max_workers=eval_workers) as pool:
                    fits = list(
                        pool.map(
                            lambda i: problem.fitness(swarm.positions[i], swarm.rngs[i]),
                            range(swarm.size),
                        )
                    )
                for i, fit in enumerate(fits):
                    if fit < swarm.pbest_fitness[i]:
                        swarm.pbest_fitness[i] = fit
                        swarm.pbest_positions[i] = swarm.positions[i].copy()
                update_gbest(swarm)
                stopped = any(f < success_threshold for f in fits)
            else:
                for i in range(swarm.size):
                    fit = evaluate_particle(swarm, i, problem.fitness)
                    update_gbest(swarm)
                    if fit < success_threshold:
                        stopped = True
                        break
        except OracleError as exc:
            error = str(exc)
            break
        if stopped or b == hyper.iterations:
            break
        step(swarm, hyper, bounds)
    queries = oracle.ledger.count - queries_before

    if swarm.gbest_position is None:
        # Errored before any evaluation completed; report the initial state.
        best = swarm.positions[0].copy()
        final = float("inf")
    else:
        best = swarm.gbest_position
        final = swarm.gbest_fitness
    adversarial = problem.adversarial(best)
    return AttackResult(
        success=error is None and final < success_threshold,
        final_confidence=final,
        queries=queries,
        best_params=best,
        adversarial_image=adversarial,
        iterations_used=b,
        raster=problem.masked_raster(best),
        target=target,
        target_class=target_class,
        k=k,
        polarity=polarity,
        family=family,
        error=error,
    )
