"""Benchmark problems behind one uniform pure-function interface.

Eight parameterized synthetic problems (shifted Sphere/Ackley/Rastrigin/
Griewank with a nonlinear task-to-shift map), a planar three-joint robot
arm, two crane-load control variants and the plane-truss robust design
objective.  All evaluations are pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ProblemSpec",
    "make_synthetic",
    "make_robot_arm",
    "make_crane",
    "make_truss",
    "get_problem",
    "list_problems",
    "PROBLEM_NAMES",
]

GRAVITY = 9.81


@dataclass
class ProblemSpec:
    name: str
    solution_dim: int
    task_dim: int
    solution_bounds: tuple
    task_bounds: tuple
    evaluate: Callable[[np.ndarray, np.ndarray], float]
    known_optimum: Optional[Callable[[np.ndarray], tuple]] = None


# ---------------------------------------------------------------------------
# Synthetic suite: f(x, theta) = g(lambda * (x - sigma(L theta)))
# ---------------------------------------------------------------------------

SYNTHETIC_V = 4
SYNTHETIC_D = 5

L_MATRIX = np.array([
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0],
    [0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
])


def sigma1(x):
    return (np.sin(5.0 * (x + 0.5)) + 1.0) / 2.0


def sigma2(x):
    return 0.3 * (1.0 + np.sin(5.0 * np.pi * x - np.pi / 2.0)) \
        + 0.3 * (x - 0.2) ** 2


def sphere(z):
    return float(np.sum(z * z))


def ackley(z):
    n = z.size
    return float(
        20.0 + math.e
        - 20.0 * math.exp(-0.2 * math.sqrt(np.sum(z * z) / n))
        - math.exp(np.sum(np.cos(2.0 * np.pi * z)) / n)
    )


def rastrigin(z):
    return float(np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0))


def griewank(z):
    i = np.arange(1, z.size + 1)
    return float(np.sum(z * z) / 4000.0 - np.prod(np.cos(z / np.sqrt(i))) + 1.0)


_BASES = {"sphere": sphere, "ackley": ackley, "rastrigin": rastrigin,
          "griewank": griewank}
_LAMBDAS = {"sphere": 4.0, "ackley": 4.0, "rastrigin": 20.0, "griewank": 600.0}
_SIGMAS = {"i": sigma1, "ii": sigma2}


def make_synthetic(base: str, variant: str) -> ProblemSpec:
    """Synthetic problem from a base function and sigma variant ('i' or 'ii')."""
    base = base.lower()
    variant = variant.lower()
    g = _BASES[base]
    lam = _LAMBDAS[base]
    sig = _SIGMAS[variant]

    def shift(theta):
        return sig(L_MATRIX @ np.asarray(theta, dtype=float))

    def evaluate(x, theta):
        x = np.asarray(x, dtype=float)
        return g(lam * (x - shift(theta)))

    def known_optimum(theta):
        return shift(theta), 0.0

    unit = (np.zeros(SYNTHETIC_V), np.ones(SYNTHETIC_V))
    unit_t = (np.zeros(SYNTHETIC_D), np.ones(SYNTHETIC_D))
    return ProblemSpec(
        name=f"{base}-{variant}",
        solution_dim=SYNTHETIC_V,
        task_dim=SYNTHETIC_D,
        solution_bounds=unit,
        task_bounds=unit_t,
        evaluate=evaluate,
        known_optimum=known_optimum,
    )


# ---------------------------------------------------------------------------
# Planar robot arm
# ---------------------------------------------------------------------------

ARM_JOINTS = 3
ARM_TARGET = np.array([0.5, 0.5])


def robot_arm_evaluate(x, theta) -> float:
    """Distance of the arm's end effector to the fixed target.

    Joint controls in [0,1] map to angles alpha_i = alpha_max*(2*x_i - 1);
    forward kinematics uses cumulative angles and uniform link length L
    from the base at the origin.
    """
    x = np.asarray(x, dtype=float)
    L, alpha_max = float(theta[0]), float(theta[1])
    angles = alpha_max * (2.0 * x - 1.0)
    phi = np.cumsum(angles)
    end = np.array([np.sum(L * np.cos(phi)), np.sum(L * np.sin(phi))])
    return float(np.linalg.norm(end - ARM_TARGET))


def make_robot_arm() -> ProblemSpec:
    n = ARM_JOINTS
    return ProblemSpec(
        name="robot-arm",
        solution_dim=n,
        task_dim=2,
        solution_bounds=(np.zeros(n), np.ones(n)),
        task_bounds=(np.array([0.5 / n, 0.5 * np.pi / n]),
                     np.array([1.0 / n, np.pi / n])),
        evaluate=robot_arm_evaluate,
    )


# ---------------------------------------------------------------------------
# Crane-load control
# ---------------------------------------------------------------------------

CRANE_I = {
    "m1": 4.2e4, "m2": 1.0e4, "v": 0.7, "l": 6.5,
    "w": 1.0e6, "delta": 0.01, "f_min": 0.0, "f_max": 2.41e4,
}
CRANE_I["W"] = 0.01 * GRAVITY * (CRANE_I["m1"] + CRANE_I["m2"])

CRANE_II_FIXED = {"m1": 4.2e4, "v": 0.7, "w": 1.0e6, "delta": 0.01,
                  "f_min": 0.0, "f_max": 2.41e4}


def _terminal_energy(t1, t2, t3, m1, m2, v, l, W, f_min, f_max):
    """Terminal oscillation energy of the bang-bang crane-load control.

    The oscillatory residual splits into in-phase/quadrature force
    components A, B at the coupled frequency plus a velocity-error term;
    the energy combines their squared amplitudes.
    """
    omega = math.sqrt(GRAVITY * (m1 + m2) / (m1 * l))
    omega0 = math.sqrt(GRAVITY / l)
    ts = t1 + t2 + t3
    A = (f_max - W
         - (f_max - f_min) * (math.cos(t3 * omega) - math.cos((t2 + t3) * omega))
         + (W - f_max) * math.cos(ts * omega))
    B = ((f_max - f_min) * (math.sin(t3 * omega) - math.sin((t2 + t3) * omega))
         + (f_max - W) * math.sin(ts * omega))
    te2 = (m1 * v * omega ** 3
           - omega * omega0 ** 2 * (f_min * t2 + f_max * (t1 + t3) - ts * W)
           + omega0 ** 2 * B)
    te = m2 / (2.0 * m1 ** 2 * omega ** 6) * (
        omega ** 2 * omega0 ** 4 * (A ** 2 + B ** 2) + te2 ** 2)
    return te, omega


def _crane_objective(t1, t2, t3, m1, m2, v, l, W, w, delta, f_min, f_max):
    te, omega = _terminal_energy(t1, t2, t3, m1, m2, v, l, W, f_min, f_max)
    if not math.isfinite(te):
        raise ArithmeticError(
            f"non-finite terminal energy for t=({t1}, {t2}, {t3})")
    E = w * te if te >= delta else 0.0
    return 2.0 * E / (m2 * v ** 2) + (t1 + t2 + t3) * omega / (2.0 * math.pi)


def crane_evaluate(t, theta, variant: str) -> float:
    """Crane control objective: scaled terminal energy plus control time.

    Variant I: theta holds time delays, effective times are t_i + dt_i and
    the Table-fixed constants apply.  Variant II: theta = (l, m2,
    resistance fraction c) with W = c*g*(m1+m2).
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if variant.lower() == "i":
        eff = t + theta
        p = CRANE_I
        return _crane_objective(eff[0], eff[1], eff[2], p["m1"], p["m2"],
                                p["v"], p["l"], p["W"], p["w"], p["delta"],
                                p["f_min"], p["f_max"])
    if variant.lower() == "ii":
        l, m2, frac = theta
        p = CRANE_II_FIXED
        W = frac * GRAVITY * (p["m1"] + m2)
        return _crane_objective(t[0], t[1], t[2], p["m1"], m2, p["v"], l, W,
                                p["w"], p["delta"], p["f_min"], p["f_max"])
    raise ValueError(f"unknown crane variant: {variant!r}")


def make_crane(variant: str) -> ProblemSpec:
    variant = variant.lower()
    if variant == "i":
        sol = (np.zeros(3), np.full(3, 2.0))
        task = (np.zeros(3), np.ones(3))
    elif variant == "ii":
        sol = (np.zeros(3), np.full(3, 3.0))
        task = (np.array([5.0, 800.0, 0.005]),
                np.array([8.0, 12000.0, 0.015]))
    else:
        raise ValueError(f"unknown crane variant: {variant!r}")
    return ProblemSpec(
        name=f"crane-{variant}",
        solution_dim=3,
        task_dim=3,
        solution_bounds=sol,
        task_bounds=task,
        evaluate=lambda x, th, _v=variant: crane_evaluate(x, th, _v),
    )


# ---------------------------------------------------------------------------
# Plane truss robust design
# ---------------------------------------------------------------------------

TRUSS_ALPHA1 = 10.0
TRUSS_ALPHA2 = 1e-5
TRUSS_THETA_LO = np.array([2.0, 2.0, 1.0])
TRUSS_THETA_HI = np.array([100.0, 100.0, 3.0])
TRUSS_ERROR_FRAC = 0.05


def truss_evaluate(x_frac, theta) -> float:
    """Aggregated truss weight + displacement at the perturbed design.

    ``x_frac`` holds fractional processing errors; operating parameters
    are theta + x_frac * (per-coordinate design range).
    """
    x_frac = np.asarray(x_frac, dtype=float)
    theta = np.asarray(theta, dtype=float)
    p = theta + x_frac * (TRUSS_THETA_HI - TRUSS_THETA_LO)
    if p[0] * p[2] <= 0:
        raise ValueError(f"operating p1*p3 must be positive, got {p}")
    root16 = math.sqrt(16.0 + p[2] ** 2)
    root1 = math.sqrt(1.0 + p[2] ** 2)
    f1 = p[0] * root16 + p[1] * root1
    f2 = 20.0 * root16 / (p[0] * p[2])
    return TRUSS_ALPHA1 * f1 + TRUSS_ALPHA2 * f2


def make_truss() -> ProblemSpec:
    return ProblemSpec(
        name="truss",
        solution_dim=3,
        task_dim=3,
        solution_bounds=(np.full(3, -TRUSS_ERROR_FRAC),
                         np.full(3, TRUSS_ERROR_FRAC)),
        task_bounds=(TRUSS_THETA_LO.copy(), TRUSS_THETA_HI.copy()),
        evaluate=truss_evaluate,
    )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def _registry():
    reg = {}
    for base in _BASES:
        for variant in ("i", "ii"):
            reg[f"{base}-{variant}"] = lambda b=base, v=variant: make_synthetic(b, v)
    reg["robot-arm"] = make_robot_arm
    reg["crane-i"] = lambda: make_crane("i")
    reg["crane-ii"] = lambda: make_crane("ii")
    reg["truss"] = make_truss
    return reg


_REGISTRY = _registry()
PROBLEM_NAMES = sorted(_REGISTRY)


def get_problem(name: str) -> ProblemSpec:
    key = name.lower()
    if key not in _REGISTRY:
        raise KeyError(
            f"unknown problem {name!r}; available: {', '.join(PROBLEM_NAMES)}")
    return _REGISTRY[key]()


def list_problems() -> list:
    return list(PROBLEM_NAMES)
