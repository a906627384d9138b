"""The task-to-solution model: V independent GPs, one per solution dimension.

Trained on elite (task parameter, best solution) pairs; the online
prediction is the concatenation of per-dimension posterior means, clamped
to the solution box.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import UnifiedDataset
from .gp import GpHyperparams, GpModel, TrainingSet, fit_hyperparams, fit_posterior, predict_batch

__all__ = [
    "EliteRecord",
    "TaskModel",
    "InsufficientDataError",
    "build_elite_set",
    "filter_top_p",
    "fit_task_model",
    "predict_solution",
    "task_model_to_dict",
    "task_model_from_dict",
    "save_task_model",
    "load_task_model",
]


class InsufficientDataError(ValueError):
    pass


@dataclass
class EliteRecord:
    """Per-task best evaluated sample: theta, its best solution and objective."""

    theta: np.ndarray
    best_x: np.ndarray
    best_y: float

    def __post_init__(self):
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        self.best_x = np.atleast_1d(np.asarray(self.best_x, dtype=float))
        self.best_y = float(self.best_y)


@dataclass
class TaskModel:
    """V per-dimension GPs over the task space plus the solution box."""

    per_dim_gps: list
    solution_bounds: tuple
    theta_bounds: tuple
    trained_on: list = field(default_factory=list)

    @property
    def solution_dim(self) -> int:
        return len(self.per_dim_gps)

    @property
    def task_dim(self) -> int:
        return np.asarray(self.theta_bounds[0]).size


def build_elite_set(dataset: UnifiedDataset, pool) -> list:
    """One elite record per pool task; earliest evaluation wins ties."""
    records = []
    for theta in pool:
        samples = dataset.for_task(theta)
        if not samples:
            raise ValueError(f"task {np.asarray(theta)} has no evaluated samples")
        best = min(samples, key=lambda s: s.y)  # min is stable: first minimum wins
        records.append(EliteRecord(theta=theta, best_x=best.x, best_y=best.y))
    return records


def filter_top_p(records: list, p: float) -> list:
    """Keep the ceil(p% * M) records with lowest best_y, in stable order."""
    if not 0 < p <= 100:
        raise ValueError("p must be in (0, 100]")
    if not records:
        return []
    keep = math.ceil(p / 100.0 * len(records))
    order = sorted(range(len(records)), key=lambda i: records[i].best_y)
    kept = sorted(order[:keep])
    return [records[i] for i in kept]


def fit_task_model(records: list, bounds, theta_bounds, epochs: int = 500,
                   lr: float = 0.01, warm_start: "TaskModel | None" = None,
                   ) -> TaskModel:
    """Fit one GP per solution dimension on the elite records.

    ``bounds``/``theta_bounds`` are (lo, hi) pairs for the solution and
    task boxes.  ``warm_start`` reuses hyperparameters from a previous fit
    as the optimization starting point.
    """
    if len(records) < 2:
        raise InsufficientDataError("need at least 2 elite records")
    thetas = np.array([r.theta for r in records])
    xs = np.array([r.best_x for r in records])
    V = xs.shape[1]
    D = thetas.shape[1]
    gps = []
    for v in range(V):
        training = TrainingSet(inputs=thetas, targets=xs[:, v],
                               input_bounds=theta_bounds)
        if warm_start is not None and v < len(warm_start.per_dim_gps):
            init = warm_start.per_dim_gps[v].hyperparams
        else:
            init = GpHyperparams.default(D)
        h = fit_hyperparams(training, init, epochs=epochs, lr=lr)
        gps.append(fit_posterior(training, h))
    return TaskModel(per_dim_gps=gps, solution_bounds=tuple(bounds),
                     theta_bounds=tuple(theta_bounds), trained_on=list(records))


def predict_solution(model: TaskModel, theta) -> np.ndarray:
    """Concatenated per-dimension posterior means, clamped to the box."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != model.task_dim:
        raise ValueError(
            f"task dimension mismatch: {theta.size} != {model.task_dim}")
    x = np.array([predict_batch(gp, theta[None, :])[0][0]
                  for gp in model.per_dim_gps])
    lo = np.asarray(model.solution_bounds[0], dtype=float)
    hi = np.asarray(model.solution_bounds[1], dtype=float)
    return np.clip(x, lo, hi)


def predict_solution_batch(model: TaskModel, thetas: np.ndarray) -> np.ndarray:
    """Vectorized ``predict_solution`` over rows of ``thetas``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    cols = [predict_batch(gp, thetas)[0] for gp in model.per_dim_gps]
    X = np.column_stack(cols)
    lo = np.asarray(model.solution_bounds[0], dtype=float)
    hi = np.asarray(model.solution_bounds[1], dtype=float)
    return np.clip(X, lo, hi)


def task_model_to_dict(model: TaskModel) -> dict:
    """JSON-serializable document with enough state to rebuild the model."""
    return {
        "solution_bounds": [np.asarray(b).tolist() for b in model.solution_bounds],
        "theta_bounds": [np.asarray(b).tolist() for b in model.theta_bounds],
        "records": [
            {"theta": r.theta.tolist(), "best_x": r.best_x.tolist(),
             "best_y": r.best_y}
            for r in model.trained_on
        ],
        "hyperparams": [
            {"lengthscales": gp.hyperparams.lengthscales.tolist(),
             "signal_variance": gp.hyperparams.signal_variance,
             "noise_variance": gp.hyperparams.noise_variance}
            for gp in model.per_dim_gps
        ],
    }


def task_model_from_dict(doc: dict) -> TaskModel:
    """Rebuild a task model (re-factorizing the GPs) from its JSON document."""
    records = [EliteRecord(r["theta"], r["best_x"], r["best_y"])
               for r in doc["records"]]
    if not records or not doc["hyperparams"]:
        raise ValueError("document holds no records or hyperparameters")
    theta_bounds = tuple(np.asarray(b, dtype=float) for b in doc["theta_bounds"])
    bounds = tuple(np.asarray(b, dtype=float) for b in doc["solution_bounds"])
    if len(theta_bounds) != 2 or len(bounds) != 2:
        raise ValueError("bounds must be (lo, hi) pairs")
    thetas = np.array([r.theta for r in records])
    xs = np.array([r.best_x for r in records])
    gps = []
    for v, hp in enumerate(doc["hyperparams"]):
        h = GpHyperparams(lengthscales=np.asarray(hp["lengthscales"]),
                          signal_variance=hp["signal_variance"],
                          noise_variance=hp["noise_variance"])
        training = TrainingSet(inputs=thetas, targets=xs[:, v],
                               input_bounds=theta_bounds)
        gps.append(fit_posterior(training, h))
    return TaskModel(per_dim_gps=gps, solution_bounds=bounds,
                     theta_bounds=theta_bounds, trained_on=records)


def save_task_model(model: TaskModel, path):
    with open(path, "w") as f:
        json.dump(task_model_to_dict(model), f, indent=2, sort_keys=True)


def load_task_model(path) -> TaskModel:
    with open(path) as f:
        return task_model_from_dict(json.load(f))
