"""UCB acquisition scoring and its maximization over the solution box.

The maximizer scores a Sobol quasi-random candidate pool, keeps the best
candidate (ties broken by enumeration order) and polishes it with a
shrinking coordinate-wise grid search, scored in batches so the GP
posterior is queried once per refinement step.  Everything is
deterministic given the configured seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .gp import GpModel, predict_batch

__all__ = ["AcquisitionConfig", "ucb_score", "maximize_ucb"]

REFINE_GRID = 16


@dataclass
class AcquisitionConfig:
    beta: float = 1.0
    candidate_count: int = 1024
    refine_steps: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if self.refine_steps < 0:
            raise ValueError("refine_steps must be non-negative")


def _scores(model: GpModel, X: np.ndarray, theta, beta: float) -> np.ndarray:
    """-mean + beta*std at each row of X (theta appended when given)."""
    X = np.atleast_2d(X)
    if theta is not None:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        X = np.hstack([X, np.tile(theta, (X.shape[0], 1))])
    mu, var = predict_batch(model, X)
    return -mu + beta * np.sqrt(var)


def ucb_score(model: GpModel, x, theta=None, beta: float = 1.0) -> float:
    """UCB score -mu + beta*sigma under the minimization convention."""
    return float(_scores(model, np.atleast_2d(x), theta, beta)[0])


def _sobol_candidates(dim: int, count: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    n = 1 << max(int(count - 1).bit_length(), 0) if count > 1 else 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = sampler.random(n)
    return pts[:count]


def maximize_ucb(model: GpModel, theta, bounds, cfg: AcquisitionConfig) -> np.ndarray:
    """Maximize the UCB score over the solution box for a fixed task.

    ``bounds`` is a (lo, hi) pair of vectors.  Returns the refined best
    candidate, always inside the box.
    """
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if np.any(hi <= lo):
        raise ValueError("bounds must be non-degenerate")
    dim = lo.size
    unit = _sobol_candidates(dim, cfg.candidate_count, cfg.seed)
    cands = lo + unit * (hi - lo)
    scores = _scores(model, cands, theta, cfg.beta)
    best_idx = int(np.argmax(scores))  # argmax keeps the first maximum on ties
    best_x = cands[best_idx].copy()
    best_score = scores[best_idx]

    radius = 0.1 * (hi - lo)
    for _ in range(cfg.refine_steps):
        probes = _coordinate_probes(best_x, lo, hi, radius)
        probe_scores = _scores(model, probes, theta, cfg.beta)
        idx = int(np.argmax(probe_scores))
        if probe_scores[idx] > best_score:
            best_score = probe_scores[idx]
            best_x = probes[idx]
        radius *= 0.7
    return np.clip(best_x, lo, hi)


def _coordinate_probes(x0, lo, hi, radius) -> np.ndarray:
    """Axis-aligned probe points around x0, one grid per coordinate."""
    dim = x0.size
    probes = np.tile(x0, (dim * REFINE_GRID, 1))
    for i in range(dim):
        a = max(lo[i], x0[i] - radius[i])
        b = min(hi[i], x0[i] + radius[i])
        line = np.linspace(a, b, REFINE_GRID)
        probes[i * REFINE_GRID:(i + 1) * REFINE_GRID, i] = line
    return probes
