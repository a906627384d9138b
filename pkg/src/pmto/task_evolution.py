"""Evolutionary selection of the next task parameter.

New tasks maximize a DPP-style determinant objective over the task-model
kernels, so the pool spreads into regions the model represents poorly.
Variation uses standard bounded SBX and polynomial mutation with a
(mu + lambda) truncation survival scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .gp import kernel_matrix
from .task_model import TaskModel

__all__ = [
    "EaConfig",
    "TaskPool",
    "diversity_objective",
    "sbx_crossover",
    "polynomial_mutation",
    "evolve_task",
]

DET_JITTER = 1e-8


@dataclass
class EaConfig:
    population_size: int = 100
    generations: int = 50
    eta_c: float = 15.0
    eta_m: float = 20.0
    p_c: float = 0.9
    p_m: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not (0 <= self.p_c <= 1 and 0 <= self.p_m <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.eta_c <= 0 or self.eta_m <= 0:
            raise ValueError("distribution indices must be positive")


@dataclass
class TaskPool:
    """The evolving set of task parameters."""

    thetas: list = field(default_factory=list)

    def add(self, theta):
        self.thetas.append(np.atleast_1d(np.asarray(theta, dtype=float)))

    def __len__(self):
        return len(self.thetas)

    def __iter__(self):
        return iter(self.thetas)

    def as_array(self) -> np.ndarray:
        return np.array(self.thetas)


def diversity_objective(theta, pool: TaskPool, model: TaskModel) -> float:
    """Sum over solution dimensions of det of the pool+candidate kernel matrix.

    Kernel values are noiseless (prior) covariances of the per-dimension
    task-model GPs, evaluated on normalized task parameters, with a fixed
    1e-8 diagonal jitter added before taking the determinant.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lo = np.asarray(model.theta_bounds[0], dtype=float)
    hi = np.asarray(model.theta_bounds[1], dtype=float)
    if len(pool):
        pts = np.vstack([pool.as_array(), theta[None, :]])
    else:
        pts = theta[None, :]
    pts_norm = (pts - lo) / (hi - lo)
    total = 0.0
    for gp in model.per_dim_gps:
        Q = kernel_matrix(pts_norm, pts_norm, gp.hyperparams)
        Q[np.diag_indices_from(Q)] += DET_JITTER
        total += float(np.linalg.det(Q))
    return total


def _diversity_scorer(pool: TaskPool, model: TaskModel):
    """Batch version of :func:`diversity_objective` with the pool fixed.

    Factors each per-dimension pool kernel once, then scores candidates
    through the block-determinant identity
    det([[K, k], [k^T, kappa]]) = det(K) * (kappa - k^T K^{-1} k),
    which agrees with the direct determinant up to round-off.
    """
    lo = np.asarray(model.theta_bounds[0], dtype=float)
    hi = np.asarray(model.theta_bounds[1], dtype=float)
    if not len(pool):
        const = sum(gp.hyperparams.signal_variance + DET_JITTER
                    for gp in model.per_dim_gps)

        def score_empty(cands):
            return np.full(np.atleast_2d(cands).shape[0], const)

        return score_empty
    pool_norm = (pool.as_array() - lo) / (hi - lo)
    factors = []
    for gp in model.per_dim_gps:
        K = kernel_matrix(pool_norm, pool_norm, gp.hyperparams)
        K[np.diag_indices_from(K)] += DET_JITTER
        L = np.linalg.cholesky(K)
        det_k = float(np.exp(2.0 * np.sum(np.log(np.diag(L)))))
        factors.append((L, det_k, gp.hyperparams))

    def score(cands):
        cands = np.atleast_2d(np.asarray(cands, dtype=float))
        cands_norm = (cands - lo) / (hi - lo)
        total = np.zeros(cands.shape[0])
        for L, det_k, hp in factors:
            cross = kernel_matrix(pool_norm, cands_norm, hp)
            w = solve_triangular(L, cross, lower=True, check_finite=False)
            schur = hp.signal_variance + DET_JITTER - np.sum(w * w, axis=0)
            total += det_k * schur
        return total

    return score


def sbx_crossover(parent_a, parent_b, bounds, eta_c, p_c, rng):
    """Simulated binary crossover with per-variable swap probability 0.5."""
    a = np.array(parent_a, dtype=float)
    b = np.array(parent_b, dtype=float)
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    c1, c2 = a.copy(), b.copy()
    if rng.random() < p_c:
        for i in range(a.size):
            if rng.random() >= 0.5:
                continue
            if abs(a[i] - b[i]) < 1e-14:
                continue
            u = rng.random()
            if u <= 0.5:
                beta_q = (2.0 * u) ** (1.0 / (eta_c + 1.0))
            else:
                beta_q = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta_c + 1.0))
            c1[i] = 0.5 * ((1 + beta_q) * a[i] + (1 - beta_q) * b[i])
            c2[i] = 0.5 * ((1 - beta_q) * a[i] + (1 + beta_q) * b[i])
    return np.clip(c1, lo, hi), np.clip(c2, lo, hi)


def polynomial_mutation(individual, bounds, eta_m, p_m, rng):
    """Bounded polynomial mutation applied per variable with probability p_m."""
    x = np.array(individual, dtype=float)
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    mut_pow = 1.0 / (eta_m + 1.0)
    for i in range(x.size):
        if rng.random() >= p_m:
            continue
        span = hi[i] - lo[i]
        delta1 = (x[i] - lo[i]) / span
        delta2 = (hi[i] - x[i]) / span
        u = rng.random()
        if u < 0.5:
            xy = 1.0 - delta1
            val = 2.0 * u + (1.0 - 2.0 * u) * xy ** (eta_m + 1.0)
            delta_q = val ** mut_pow - 1.0
        else:
            xy = 1.0 - delta2
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta_m + 1.0)
            delta_q = 1.0 - val ** mut_pow
        x[i] += delta_q * span
    return np.clip(x, lo, hi)


def _tournament(rng, scores):
    i, j = rng.integers(len(scores)), rng.integers(len(scores))
    return int(i) if scores[i] >= scores[j] else int(j)


def evolve_task(pool: TaskPool, model: TaskModel, theta_bounds,
                cfg: EaConfig) -> np.ndarray:
    """Return the task parameter maximizing the diversity objective.

    Uniform random initialization, binary tournament selection, SBX + PM
    variation and (mu + lambda) truncation; elitist, so the best score is
    non-decreasing across generations.
    """
    rng = np.random.default_rng(cfg.seed)
    lo = np.asarray(theta_bounds[0], dtype=float)
    hi = np.asarray(theta_bounds[1], dtype=float)
    P = cfg.population_size
    scorer = _diversity_scorer(pool, model)
    popn = lo + rng.random((P, lo.size)) * (hi - lo)
    pop = [popn[i] for i in range(P)]
    scores = scorer(np.array(pop))
    for _ in range(cfg.generations):
        offspring = []
        while len(offspring) < P:
            pa = pop[_tournament(rng, scores)]
            pb = pop[_tournament(rng, scores)]
            c1, c2 = sbx_crossover(pa, pb, (lo, hi), cfg.eta_c, cfg.p_c, rng)
            offspring.append(polynomial_mutation(c1, (lo, hi), cfg.eta_m,
                                                 cfg.p_m, rng))
            if len(offspring) < P:
                offspring.append(polynomial_mutation(c2, (lo, hi), cfg.eta_m,
                                                     cfg.p_m, rng))
        off_scores = scorer(np.array(offspring))
        combined = pop + offspring
        combined_scores = np.concatenate([scores, off_scores])
        order = np.argsort(-combined_scores, kind="stable")[:P]
        pop = [combined[i] for i in order]
        scores = combined_scores[order]
    return pop[int(np.argmax(scores))].copy()


def random_task(theta_bounds, rng) -> np.ndarray:
    """Uniform random task draw (the RT ablation's task source)."""
    lo = np.asarray(theta_bounds[0], dtype=float)
    hi = np.asarray(theta_bounds[1], dtype=float)
    return lo + rng.random(lo.size) * (hi - lo)
