"""Joint search over solution and continuous task spaces.

Offline, the library optimizes a growing pool of parameterized tasks
against a unified (solution, task) Gaussian process while fitting a
task-to-solution model; online, that model predicts near-optimal
solutions for any task parameter inside the bounds without further
objective evaluations.
"""

__version__ = "0.1.0"
