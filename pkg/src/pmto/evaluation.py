"""Online evaluation of task models and the minimax robust-design pipeline.

The quantile protocol scores a task model by evaluating its predicted
solutions on a quasi-random grid of task parameters and recording
quantiles of the resulting objective values; means and standard
deviations aggregate across independent trials.  These evaluation calls
are protocol bookkeeping and are never charged to an optimization budget.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .algorithms import ConfigError, RunConfig, run_pmto
from .problems import ProblemSpec
from .task_evolution import EaConfig, polynomial_mutation, sbx_crossover
from .task_model import TaskModel, predict_solution_batch

__all__ = [
    "DEFAULT_ALPHAS",
    "EvalGrid",
    "QuantileReport",
    "sobol_grid",
    "evaluate_task_model",
    "quantiles",
    "aggregate_trials",
    "solve_minimax",
    "nominal_optimal_design",
    "assess_robustness",
]

DEFAULT_ALPHAS = (0.05, 0.25, 0.50, 0.75, 0.95)


@dataclass
class EvalGrid:
    thetas: np.ndarray
    scheme: str
    seed: int

    def __len__(self):
        return len(self.thetas)


def sobol_grid(problem: ProblemSpec, k: int, seed: int = 0) -> EvalGrid:
    """K quasi-random task parameters spanning the task box."""
    lo, hi = (np.asarray(b, dtype=float) for b in problem.task_bounds)
    sampler = qmc.Sobol(d=problem.task_dim, scramble=True, seed=seed)
    n = 1 << max(int(k - 1).bit_length(), 0) if k > 1 else 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        unit = sampler.random(n)[:k]
    return EvalGrid(thetas=lo + unit * (hi - lo), scheme="sobol", seed=seed)


def evaluate_task_model(model: TaskModel, problem: ProblemSpec,
                        grid: EvalGrid) -> np.ndarray:
    """F(theta_k) = f(M(theta_k), theta_k) over the whole grid."""
    xs = predict_solution_batch(model, grid.thetas)
    return np.array([problem.evaluate(x, theta)
                     for x, theta in zip(xs, grid.thetas)])


def quantiles(values, alphas=DEFAULT_ALPHAS) -> np.ndarray:
    """Linear-interpolation quantiles of the value vector."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot take quantiles of an empty vector")
    return np.quantile(values, list(alphas), method="linear")


@dataclass
class QuantileReport:
    alphas: tuple = DEFAULT_ALPHAS
    per_trial: list = field(default_factory=list)  # one quantile vector per trial

    @property
    def trial_count(self) -> int:
        return len(self.per_trial)

    def means(self) -> np.ndarray:
        return np.mean(np.asarray(self.per_trial), axis=0)

    def stds(self) -> np.ndarray:
        arr = np.asarray(self.per_trial)
        if arr.shape[0] < 2:
            return np.zeros(arr.shape[1])
        return np.std(arr, axis=0, ddof=1)


def aggregate_trials(per_trial_quantiles, alphas=DEFAULT_ALPHAS) -> QuantileReport:
    """Mean and sample standard deviation per quantile level across trials."""
    per_trial = [np.asarray(q, dtype=float) for q in per_trial_quantiles]
    if not per_trial:
        raise ValueError("need at least one trial")
    return QuantileReport(alphas=tuple(alphas), per_trial=per_trial)


# ---------------------------------------------------------------------------
# Minimax robust design
# ---------------------------------------------------------------------------

# Objective value standing in for (solution, design) pairs whose operating
# parameters are physically invalid; worst-case analysis treats them as
# catastrophic but finite so surrogates and statistics stay well defined.
PENALTY_VALUE = 1e8


def _safe_evaluate(problem: ProblemSpec, x, theta) -> float:
    try:
        return problem.evaluate(x, theta)
    except (ValueError, ArithmeticError):
        return PENALTY_VALUE


def _ea_minimize(fn, bounds, cfg: EaConfig, budget: int, rng):
    """Generic bounded EA minimization charging one budget unit per call."""
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    P = cfg.population_size
    if budget < 2 * P:
        raise ConfigError(
            f"budget {budget} cannot cover initialization plus one "
            f"generation with population {P}")
    generations = min(cfg.generations, (budget - P) // P)
    pop = [lo + rng.random(lo.size) * (hi - lo) for _ in range(P)]
    scores = np.array([fn(t) for t in pop])
    used = P
    for _ in range(generations):
        offspring = []
        while len(offspring) < P:
            i, j = rng.integers(P), rng.integers(P)
            pa = pop[i] if scores[i] <= scores[j] else pop[j]
            i, j = rng.integers(P), rng.integers(P)
            pb = pop[i] if scores[i] <= scores[j] else pop[j]
            c1, c2 = sbx_crossover(pa, pb, bounds, cfg.eta_c, cfg.p_c, rng)
            offspring.append(polynomial_mutation(c1, bounds, cfg.eta_m,
                                                 cfg.p_m, rng))
            if len(offspring) < P:
                offspring.append(polynomial_mutation(c2, bounds, cfg.eta_m,
                                                     cfg.p_m, rng))
        off_scores = np.array([fn(t) for t in offspring])
        used += P
        combined = pop + offspring
        combined_scores = np.concatenate([scores, off_scores])
        order = np.argsort(combined_scores, kind="stable")[:P]
        pop = [combined[i] for i in order]
        scores = combined_scores[order]
        if used + P > budget:
            break
    best = int(np.argmin(scores))
    return pop[best].copy(), float(scores[best]), used


def solve_minimax(problem: ProblemSpec, pmto_cfg: RunConfig,
                  outer_cfg: EaConfig, outer_budget: int):
    """Robust design via the minimax reformulation.

    The inner phase runs the full loop on the sign-flipped reformulated
    problem (perturbations as solutions, designs as tasks) so the learned
    task model predicts worst-case perturbations; the outer phase
    minimizes h(theta) = f(M(theta), theta) over the design box with the
    same EA operators, charging true-objective evaluations against
    ``outer_budget``.  Invalid operating parameters score the penalty
    value.  Returns (theta_hat, task_model, h(theta_hat)).
    """
    inner = ProblemSpec(
        name=f"{problem.name}-worst-case",
        solution_dim=problem.solution_dim,
        task_dim=problem.task_dim,
        solution_bounds=problem.solution_bounds,
        task_bounds=problem.task_bounds,
        evaluate=lambda x, theta: -_safe_evaluate(problem, x, theta))
    _, _, model = run_pmto(inner, pmto_cfg, task_source="evolved")

    def h(theta):
        xs = predict_solution_batch(model, theta[None, :])
        return _safe_evaluate(problem, xs[0], theta)

    rng = np.random.default_rng(np.random.SeedSequence(pmto_cfg.seed).spawn(5)[4])
    theta_hat, h_best, _ = _ea_minimize(h, problem.task_bounds, outer_cfg,
                                        outer_budget, rng)
    return theta_hat, model, h_best


def nominal_optimal_design(problem: ProblemSpec, outer_cfg: EaConfig,
                           budget: int, seed: int = 0):
    """Comparison design: EA minimization of f(0, theta), ignoring errors."""
    zero = np.zeros(problem.solution_dim)

    def nominal(theta):
        return _safe_evaluate(problem, zero, theta)

    rng = np.random.default_rng(seed)
    theta, value, _ = _ea_minimize(nominal, problem.task_bounds, outer_cfg,
                                   budget, rng)
    return theta, value


def assess_robustness(theta, problem: ProblemSpec, n_errors: int = 800,
                      seed: int = 0) -> dict:
    """Objective distribution at ``theta`` under random error vectors."""
    if n_errors < 1:
        raise ValueError("n_errors must be >= 1")
    theta = np.asarray(theta, dtype=float)
    lo, hi = (np.asarray(b, dtype=float) for b in problem.solution_bounds)
    rng = np.random.default_rng(seed)
    errors = lo + rng.random((n_errors, lo.size)) * (hi - lo)
    values = np.array([_safe_evaluate(problem, x, theta) for x in errors])
    return {
        "values": values,
        "min": float(values.min()),
        "mean": float(values.mean()),
        "max": float(values.max()),
        "quantiles": quantiles(values),
    }
