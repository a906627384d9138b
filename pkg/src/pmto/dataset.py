"""The unified evaluated-sample dataset shared by all optimization loops."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["EvaluatedSample", "UnifiedDataset"]


@dataclass
class EvaluatedSample:
    """One (solution, task-parameter, objective) triple."""

    x: np.ndarray
    theta: np.ndarray
    y: float

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        self.y = float(self.y)


@dataclass
class UnifiedDataset:
    """Append-only collection of evaluated samples with array views."""

    samples: list = field(default_factory=list)

    def add(self, x, theta, y) -> EvaluatedSample:
        s = EvaluatedSample(x, theta, y)
        self.samples.append(s)
        return s

    def __len__(self):
        return len(self.samples)

    def joint_inputs(self) -> np.ndarray:
        """(n, V+D) matrix of concatenated (x, theta) rows."""
        return np.array([np.concatenate([s.x, s.theta]) for s in self.samples])

    def targets(self) -> np.ndarray:
        return np.array([s.y for s in self.samples])

    def for_task(self, theta) -> list:
        """Samples whose task parameter matches ``theta`` exactly."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return [s for s in self.samples if np.array_equal(s.theta, theta)]
