"""
Modified particle swarm optimizer maximizing the secure key rate over the
8 free source parameters (vacuum intensities are 0 and the vacuum
probabilities close each party's simplex).
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from models import KeyRateBreakdown
from schemas import ChannelConfig, ParameterVector, ProtocolConfig, PsoConfig, Strategy
from services.security_service import secure_key_rate
from utils.logging_config import get_logger, log_operation, log_progress

logger = get_logger(__name__)

FREE_DIMS = 8
INTENSITY_FLOOR = 1e-6
INTENSITY_CEIL = 1.0 - 1e-6
PROBABILITY_FLOOR = 1e-6
ORDER_GAP = 1e-3
SIMPLEX_SHRINK = 1.0 - 1e-6
# A forced decoy mu * (1 - gap) stays above the intensity floor
SIGNAL_FLOOR = INTENSITY_FLOOR / (1.0 - ORDER_GAP)

INTENSITY_DIMS = (0, 1, 4, 5)
LOWER = np.array([INTENSITY_FLOOR, INTENSITY_FLOOR, PROBABILITY_FLOOR, PROBABILITY_FLOOR] * 2)
UPPER = np.array([INTENSITY_CEIL, INTENSITY_CEIL, 1.0, 1.0] * 2)

Fitness = Callable[[np.ndarray], float]


@dataclass
class OptimizationResult:
    """Outcome of one swarm run"""
    position: np.ndarray
    fitness: float
    iterations: int
    reason: str
    history: List[float] = field(default_factory=list)
    breakdown: Optional[KeyRateBreakdown] = None

    @property
    def parameters(self) -> ParameterVector:
        return ParameterVector.from_free(self.position)


def schedule_w(t: int, cfg: PsoConfig) -> float:
    """Inertia weight, descending linearly from w_init (t=0) to w_final (t=T)"""
    return cfg.w_init - (cfg.w_init - cfg.w_final) / cfg.max_iters * t


def schedule_c(t: int, cmin: float, cmax: float, T: int) -> float:
    """Learning factor, descending from cmax at t=1"""
    return cmin + (cmax - cmin) * (1.0 - (t - 1) / T)


def repair_raw(raw) -> np.ndarray:
    """Project 8 arbitrary reals onto the feasible source-parameter region"""
    g = np.array(raw, dtype=float).copy()
    for base in (0, 4):
        mu = min(max(g[base], SIGNAL_FLOOR), INTENSITY_CEIL)
        nu = min(max(g[base + 1], INTENSITY_FLOOR), INTENSITY_CEIL)
        if nu >= mu:
            nu = mu * (1.0 - ORDER_GAP)

        p_mu = min(max(g[base + 2], PROBABILITY_FLOOR), 1.0)
        p_nu = min(max(g[base + 3], PROBABILITY_FLOOR), 1.0)
        total = p_mu + p_nu
        if total >= 1.0:
            scale = SIMPLEX_SHRINK / total
            p_mu, p_nu = p_mu * scale, p_nu * scale
        p_mu = max(p_mu, PROBABILITY_FLOOR)
        p_nu = max(p_nu, PROBABILITY_FLOOR)
        g[base:base + 4] = (mu, nu, p_mu, p_nu)
    return g


def repair(raw) -> ParameterVector:
    """Feasible ParameterVector closest in spirit to the raw free coordinates"""
    return ParameterVector.from_free(repair_raw(raw))


def random_position(rng: np.random.Generator) -> np.ndarray:
    """Uniform draw inside the feasible region"""
    g = np.empty(FREE_DIMS)
    for base in (0, 4):
        mu = rng.uniform(SIGNAL_FLOOR, INTENSITY_CEIL)
        nu = rng.uniform(INTENSITY_FLOOR, mu)
        p_mu, p_nu, _ = rng.dirichlet((1.0, 1.0, 1.0))
        g[base:base + 4] = (mu, nu, p_mu, p_nu)
    return repair_raw(g)


def shares_source_settings(cfg: ChannelConfig) -> bool:
    """Only the asymmetric-intensity strategy lets the two senders differ"""
    return cfg.strategy != Strategy.ASYMMETRIC_INTENSITY


def tie_parties(position) -> np.ndarray:
    """Copy Alice's four free coordinates onto Bob's"""
    tied = np.array(position, dtype=float).copy()
    tied[4:] = tied[:4]
    return tied


def key_rate_fitness(cfg: ChannelConfig, proto: ProtocolConfig) -> Fitness:
    """Fitness = secure key rate; physicality violations score zero"""
    tied = shares_source_settings(cfg)

    def fitness(position: np.ndarray) -> float:
        if tied:
            position = tie_parties(position)
        return secure_key_rate(ParameterVector.from_free(position), cfg, proto).R
    return fitness


class SwarmOptimizer:
    """Swarm state and the iteration loop"""

    def __init__(self, pso: PsoConfig, fitness: Fitness, workers: int = 1,
                 warm_start: Optional[ParameterVector] = None):
        self.pso = pso
        self.fitness = fitness
        self.workers = max(1, workers)
        seeds = np.random.SeedSequence(pso.seed).spawn(pso.n_particles)
        # One stream per particle: results do not depend on evaluation order
        self.rngs = [np.random.default_rng(s) for s in seeds]
        self.v_max = pso.v_max_frac * (UPPER - LOWER)
        self.n_explore = int(math.floor(pso.n_particles * pso.h))

        self.positions = np.array([random_position(rng) for rng in self.rngs])
        self.velocities = np.array([rng.uniform(-self.v_max, self.v_max) for rng in self.rngs])
        if warm_start is not None:
            self.positions[-1] = repair_raw(warm_start.free_vector())

        self.scores = self._evaluate(self.positions)
        self.best_positions = self.positions.copy()
        self.best_scores = self.scores.copy()
        leader = int(np.argmax(self.best_scores))
        self.global_position = self.best_positions[leader].copy()
        self.global_score = float(self.best_scores[leader])

    def _evaluate(self, positions: np.ndarray) -> np.ndarray:
        if self.workers == 1:
            return np.array([self.fitness(p) for p in positions])
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return np.array(list(executor.map(self.fitness, positions)))

    def step(self, t: int) -> None:
        """One iteration: move every particle, then refresh personal and global bests"""
        pso = self.pso
        w = schedule_w(t, pso)
        c1 = schedule_c(t, pso.c1_min, pso.c1_max, pso.max_iters)
        c2 = schedule_c(t, pso.c2_min, pso.c2_max, pso.max_iters)

        for i, rng in enumerate(self.rngs):
            if i < self.n_explore:
                self.positions[i] = random_position(rng)
                self.velocities[i] = rng.uniform(-self.v_max, self.v_max)
                continue
            r1 = rng.random(FREE_DIMS)
            r2 = rng.random(FREE_DIMS)
            velocity = (w * self.velocities[i]
                        + c1 * r1 * (self.best_positions[i] - self.positions[i])
                        + c2 * r2 * (self.global_position - self.positions[i]))
            self.velocities[i] = np.clip(velocity, -self.v_max, self.v_max)
            moved = self.positions[i] + self.velocities[i]
            self.positions[i] = repair_raw(moved)
            # Coordinates pushed back by the repair bounce off the boundary
            clipped = self.positions[i] != moved
            self.velocities[i][clipped] = -self.velocities[i][clipped]

        self.scores = self._evaluate(self.positions)
        improved = self.scores > self.best_scores
        self.best_positions[improved] = self.positions[improved]
        self.best_scores[improved] = self.scores[improved]

        leader = int(np.argmax(self.best_scores))
        if self.best_scores[leader] > self.global_score:
            self.global_score = float(self.best_scores[leader])
            self.global_position = self.best_positions[leader].copy()

    def run(self) -> OptimizationResult:
        pso = self.pso
        history = [self.global_score]
        reason = "max_iters"
        iterations = 0
        for t in range(1, pso.max_iters + 1):
            self.step(t)
            iterations = t
            history.append(self.global_score)

            if t % pso.log_every == 0:
                log_progress(logger, t, self.global_score)

            if t >= pso.patience:
                before = history[-pso.patience - 1]
                if before > 0 and self.global_score - before < pso.zeta * abs(before):
                    reason = "converged"
                    break

        return OptimizationResult(
            position=self.global_position.copy(),
            fitness=self.global_score,
            iterations=iterations,
            reason=reason,
            history=history,
        )


def optimize(cfg: ChannelConfig, proto: ProtocolConfig, pso: PsoConfig,
             fitness: Optional[Fitness] = None, workers: int = 1,
             warm_start: Optional[ParameterVector] = None) -> OptimizationResult:
    """
    Maximize the secure key rate over the feasible source parameters

    Args:
        cfg: Channel description
        proto: Protocol settings
        pso: Swarm settings (seed included; runs are deterministic per seed)
        fitness: Replacement objective on the 8 free coordinates (testing)
        workers: Threads evaluating fitness within an iteration
        warm_start: Optional initial position for one particle

    Returns:
        OptimizationResult; ``breakdown`` is filled when optimizing the key rate
    """
    started = time.perf_counter()
    objective = fitness or key_rate_fitness(cfg, proto)
    result = SwarmOptimizer(pso, objective, workers=workers, warm_start=warm_start).run()
    if fitness is None:
        if shares_source_settings(cfg):
            result.position = tie_parties(result.position)
        result.breakdown = secure_key_rate(result.parameters, cfg, proto)
        if result.fitness <= 0:
            result.reason = "no_feasible_point"

    log_operation(
        logger, "optimize", (time.perf_counter() - started) * 1000.0,
        iteration=result.iterations, best_rate=result.fitness,
    )
    logger.info(f"Optimizer stopped after {result.iterations} iterations: {result.reason}")
    return result
