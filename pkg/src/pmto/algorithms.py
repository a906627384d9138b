"""Optimization procedures with budget accounting and convergence logging.

Three loops share the machinery: a single-task GP/UCB baseline that solves
each task independently, a fixed-task variant that pools all evaluations
into one unified (solution, task) GP, and the full loop that additionally
grows the task pool each outer iteration via determinant-driven task
evolution (or uniform random draws for the ablation).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .acquisition import AcquisitionConfig, maximize_ucb
from .dataset import UnifiedDataset
from .gp import GpHyperparams, TrainingSet, fit_hyperparams, fit_posterior
from .problems import ProblemSpec
from .task_evolution import EaConfig, TaskPool, evolve_task, random_task
from .task_model import (TaskModel, build_elite_set, filter_top_p,
                         fit_task_model)

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunTrace",
    "run_single_task_baseline",
    "run_pmto_ft",
    "run_pmto",
    "compute_regret",
    "sample_tasks_lhs",
]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n_init: int = 200
    n_tot: int = 2000
    m_tasks: int = 20
    beta: float = 1.0
    ea: EaConfig = field(default_factory=EaConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    seed: int = 0
    refit_epochs_initial: int = 500
    refit_epochs_warm: int = 100
    top_p: float = 70.0

    def validate(self, per_task: bool = False):
        if self.m_tasks < 1:
            raise ConfigError("m_tasks must be >= 1")
        if self.n_init > self.n_tot:
            raise ConfigError("n_init cannot exceed n_tot")
        if self.n_init % self.m_tasks:
            raise ConfigError("n_init must be divisible by m_tasks")
        if self.n_init < self.m_tasks:
            raise ConfigError("need at least one initial point per task")
        if per_task and self.n_tot % self.m_tasks:
            raise ConfigError(
                "n_tot must be divisible by m_tasks for fixed-task runs")


@dataclass
class RunTrace:
    """Per-evaluation log: one row per true-objective call."""

    iters: list = field(default_factory=list)
    task_ids: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    best_so_far: list = field(default_factory=list)
    cum_evals: list = field(default_factory=list)
    _best: dict = field(default_factory=dict)

    def log(self, iteration, task_id, theta, x, y):
        best = min(self._best.get(task_id, np.inf), y)
        self._best[task_id] = best
        self.iters.append(iteration)
        self.task_ids.append(task_id)
        self.thetas.append(np.asarray(theta, dtype=float).copy())
        self.xs.append(np.asarray(x, dtype=float).copy())
        self.ys.append(float(y))
        self.best_so_far.append(best)
        self.cum_evals.append(len(self.ys))

    def __len__(self):
        return len(self.ys)

    def final_best_per_task(self) -> dict:
        return dict(self._best)

    def rows_for_task(self, task_id):
        return [i for i, t in enumerate(self.task_ids) if t == task_id]

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            d = self.thetas[0].size if self.thetas else 0
            v = self.xs[0].size if self.xs else 0
            header = (["iter", "task_id"]
                      + [f"theta{i}" for i in range(d)]
                      + [f"x{i}" for i in range(v)]
                      + ["y", "best_so_far", "cum_evals"])
            writer.writerow(header)
            for i in range(len(self.ys)):
                row = ([self.iters[i], self.task_ids[i]]
                       + [repr(t) for t in self.thetas[i]]
                       + [repr(x) for x in self.xs[i]]
                       + [repr(self.ys[i]), repr(self.best_so_far[i]),
                          self.cum_evals[i]])
                writer.writerow(row)


def _lhs(dim, n, seed_seq) -> np.ndarray:
    sampler = qmc.LatinHypercube(d=dim, seed=np.random.default_rng(seed_seq))
    return sampler.random(n)


def sample_tasks_lhs(problem: ProblemSpec, m: int, seed) -> list:
    """M task parameters via Latin hypercube sampling of the task box."""
    lo, hi = (np.asarray(b, dtype=float) for b in problem.task_bounds)
    unit = _lhs(problem.task_dim, m, np.random.SeedSequence(seed))
    return [lo + row * (hi - lo) for row in unit]


def _acq_cfg(cfg: RunConfig, seed: int) -> AcquisitionConfig:
    return replace(cfg.acquisition, beta=cfg.beta, seed=seed)


def _next_seed(rng) -> int:
    return int(rng.integers(2 ** 31))


def run_single_task_baseline(problem: ProblemSpec, tasks, cfg: RunConfig):
    """Solve each task independently with a plain solution-space GP."""
    cfg = replace(cfg, m_tasks=len(tasks))
    cfg.validate(per_task=True)
    ss = np.random.SeedSequence(cfg.seed)
    init_ss, acq_ss = ss.spawn(2)
    acq_rng = np.random.default_rng(acq_ss)
    per_task_init = cfg.n_init // cfg.m_tasks
    per_task_budget = cfg.n_tot // cfg.m_tasks
    lo, hi = (np.asarray(b, dtype=float) for b in problem.solution_bounds)
    trace = RunTrace()
    dataset = UnifiedDataset()

    for m, (theta, sub_ss) in enumerate(zip(tasks, init_ss.spawn(len(tasks)))):
        unit = _lhs(problem.solution_dim, per_task_init, sub_ss)
        xs = [lo + row * (hi - lo) for row in unit]
        ys = []
        for x in xs:
            y = problem.evaluate(x, theta)
            dataset.add(x, theta, y)
            trace.log(0, m, theta, x, y)
            ys.append(y)
        h = GpHyperparams.default(problem.solution_dim)
        training = TrainingSet(np.array(xs), np.array(ys),
                               input_bounds=problem.solution_bounds)
        h = fit_hyperparams(training, h, epochs=cfg.refit_epochs_initial)
        model = fit_posterior(training, h)
        for t in range(per_task_budget - per_task_init):
            x = maximize_ucb(model, None, problem.solution_bounds,
                             _acq_cfg(cfg, _next_seed(acq_rng)))
            y = problem.evaluate(x, theta)
            dataset.add(x, theta, y)
            trace.log(t + 1, m, theta, x, y)
            xs.append(x)
            ys.append(y)
            training = TrainingSet(np.array(xs), np.array(ys),
                                   input_bounds=problem.solution_bounds)
            h = fit_hyperparams(training, h, epochs=cfg.refit_epochs_warm)
            model = fit_posterior(training, h)

    pool = TaskPool([np.asarray(t, dtype=float) for t in tasks])
    elites = build_elite_set(dataset, pool)
    return trace, elites


def _joint_bounds(problem: ProblemSpec):
    lo = np.concatenate([np.asarray(problem.solution_bounds[0], dtype=float),
                         np.asarray(problem.task_bounds[0], dtype=float)])
    hi = np.concatenate([np.asarray(problem.solution_bounds[1], dtype=float),
                         np.asarray(problem.task_bounds[1], dtype=float)])
    return lo, hi


def _fit_unified(dataset: UnifiedDataset, bounds, h, epochs):
    training = TrainingSet(dataset.joint_inputs(), dataset.targets(),
                           input_bounds=bounds)
    h = fit_hyperparams(training, h, epochs=epochs)
    return fit_posterior(training, h), h


def _refactorize(dataset: UnifiedDataset, bounds, h):
    training = TrainingSet(dataset.joint_inputs(), dataset.targets(),
                           input_bounds=bounds)
    return fit_posterior(training, h)


def _init_tasks(problem, tasks, cfg, init_ss, dataset, trace):
    lo, hi = (np.asarray(b, dtype=float) for b in problem.solution_bounds)
    per_task_init = cfg.n_init // len(tasks)
    for m, (theta, sub_ss) in enumerate(zip(tasks, init_ss.spawn(len(tasks)))):
        unit = _lhs(problem.solution_dim, per_task_init, sub_ss)
        for row in unit:
            x = lo + row * (hi - lo)
            y = problem.evaluate(x, theta)
            dataset.add(x, theta, y)
            trace.log(0, m, theta, x, y)


def run_pmto_ft(problem: ProblemSpec, tasks, cfg: RunConfig):
    """Fixed-task optimization against a shared unified (x, theta) GP."""
    cfg = replace(cfg, m_tasks=len(tasks))
    cfg.validate(per_task=True)
    ss = np.random.SeedSequence(cfg.seed)
    init_ss, acq_ss = ss.spawn(2)
    acq_rng = np.random.default_rng(acq_ss)
    bounds = _joint_bounds(problem)
    trace = RunTrace()
    dataset = UnifiedDataset()
    _init_tasks(problem, tasks, cfg, init_ss, dataset, trace)

    h = GpHyperparams.default(problem.solution_dim + problem.task_dim)
    model, h = _fit_unified(dataset, bounds, h, cfg.refit_epochs_initial)
    iteration = 0
    while len(dataset) < cfg.n_tot:
        iteration += 1
        for m, theta in enumerate(tasks):
            if len(dataset) >= cfg.n_tot:
                break
            x = maximize_ucb(model, theta, problem.solution_bounds,
                             _acq_cfg(cfg, _next_seed(acq_rng)))
            y = problem.evaluate(x, theta)
            dataset.add(x, theta, y)
            trace.log(iteration, m, theta, x, y)
            model = _refactorize(dataset, bounds, h)
        model, h = _fit_unified(dataset, bounds, h, cfg.refit_epochs_warm)

    pool = TaskPool([np.asarray(t, dtype=float) for t in tasks])
    elites = build_elite_set(dataset, pool)
    return trace, elites


def run_pmto(problem: ProblemSpec, cfg: RunConfig, task_source: str = "evolved"):
    """The full loop: growing task pool, unified GP and online task model.

    ``task_source`` selects determinant-driven task evolution ("evolved")
    or uniform random task draws ("random", the RT ablation).  Returns the
    trace, the final elite set and the top-p%-filtered online task model.
    """
    if task_source not in ("evolved", "random"):
        raise ConfigError(f"unknown task_source: {task_source!r}")
    cfg.validate()
    ss = np.random.SeedSequence(cfg.seed)
    task_ss, init_ss, acq_ss, ea_ss = ss.spawn(4)
    acq_rng = np.random.default_rng(acq_ss)
    ea_rng = np.random.default_rng(ea_ss)

    theta_lo, theta_hi = (np.asarray(b, dtype=float) for b in problem.task_bounds)
    unit = _lhs(problem.task_dim, cfg.m_tasks, task_ss)
    pool = TaskPool([theta_lo + row * (theta_hi - theta_lo) for row in unit])

    bounds = _joint_bounds(problem)
    trace = RunTrace()
    dataset = UnifiedDataset()
    _init_tasks(problem, list(pool), cfg, init_ss, dataset, trace)

    h = GpHyperparams.default(problem.solution_dim + problem.task_dim)
    model, h = _fit_unified(dataset, bounds, h, cfg.refit_epochs_initial)
    elites = build_elite_set(dataset, pool)
    task_model = fit_task_model(elites, problem.solution_bounds,
                                problem.task_bounds,
                                epochs=cfg.refit_epochs_initial)

    iteration = 0
    while len(dataset) < cfg.n_tot:
        iteration += 1
        if task_source == "evolved":
            ea_cfg = replace(cfg.ea, seed=_next_seed(ea_rng))
            theta_new = evolve_task(pool, task_model, problem.task_bounds,
                                    ea_cfg)
        else:
            theta_new = random_task(problem.task_bounds, ea_rng)
        pool.add(theta_new)
        for m, theta in enumerate(pool):
            if len(dataset) >= cfg.n_tot:
                break
            x = maximize_ucb(model, theta, problem.solution_bounds,
                             _acq_cfg(cfg, _next_seed(acq_rng)))
            y = problem.evaluate(x, theta)
            dataset.add(x, theta, y)
            trace.log(iteration, m, theta, x, y)
            model = _refactorize(dataset, bounds, h)
        if len(dataset) >= cfg.n_tot:
            break
        model, h = _fit_unified(dataset, bounds, h, cfg.refit_epochs_warm)
        elites = build_elite_set(dataset, pool)
        task_model = fit_task_model(elites, problem.solution_bounds,
                                    problem.task_bounds,
                                    epochs=cfg.refit_epochs_warm,
                                    warm_start=task_model)

    evaluated = TaskPool([t for t in pool if dataset.for_task(t)])
    elites = build_elite_set(dataset, evaluated)
    online_model = fit_task_model(filter_top_p(elites, cfg.top_p),
                                  problem.solution_bounds, problem.task_bounds,
                                  epochs=cfg.refit_epochs_initial)
    return trace, elites, online_model


def compute_regret(trace: RunTrace, optima) -> dict:
    """Instantaneous and cumulative regret per task.

    ``optima`` maps task_id to the true optimal value.  Raises if any
    instantaneous regret dips below -1e-9, which signals a wrong optimum.
    """
    out = {}
    for task_id in sorted(set(trace.task_ids)):
        f_star = optima[task_id]
        rows = trace.rows_for_task(task_id)
        r = np.array([trace.ys[i] - f_star for i in rows])
        if np.any(r < -1e-9):
            raise ValueError(
                f"negative instantaneous regret for task {task_id}: "
                f"min {r.min():.3e}")
        out[task_id] = {"instantaneous": r, "cumulative": np.cumsum(r)}
    return out
