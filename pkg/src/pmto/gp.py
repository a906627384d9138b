"""Exact Gaussian-process regression with ARD-RBF kernels.

Supports plain solution-space inputs as well as concatenated
(solution, task-parameter) inputs for the unified surrogate.  Inputs are
affinely normalized to the unit box using known bounds, targets are
standardized per fit, and the Cholesky factor of the regularized kernel
matrix is cached so repeated prediction is cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

__all__ = [
    "GpHyperparams",
    "TrainingSet",
    "GpModel",
    "Posterior",
    "CholeskyError",
    "rbf_kernel",
    "kernel_matrix",
    "fit_posterior",
    "predict",
    "predict_batch",
    "log_marginal_likelihood",
    "fit_hyperparams",
    "conditional_information_gain",
]

JITTER_START_FRACTION = 1e-6
JITTER_MAX_FRACTION = 1e-2
NOISE_FLOOR = 1e-8
STD_FLOOR = 1e-8
VARIANCE_CLAMP = -1e-9


class CholeskyError(RuntimeError):
    """Kernel matrix factorization failed even at the maximum jitter."""

    def __init__(self, final_jitter):
        super().__init__(
            f"Cholesky factorization failed at maximum jitter {final_jitter:g}"
        )
        self.final_jitter = final_jitter


@dataclass
class GpHyperparams:
    """ARD-RBF kernel hyperparameters, one lengthscale per input dimension.

    Lengthscales refer to normalized ([0,1]-mapped) inputs.  The Adam
    fitting routine works on the logs of these values so positivity is
    preserved; ``noise_variance`` may be exactly zero for interpolating
    models, in which case it is floored before entering log space.
    """

    lengthscales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 1e-2

    def __post_init__(self):
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if np.any(self.lengthscales <= 0):
            raise ValueError("lengthscales must be positive")
        if self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")

    @classmethod
    def default(cls, dim: int) -> "GpHyperparams":
        return cls(lengthscales=np.full(dim, 0.5), signal_variance=1.0,
                   noise_variance=1e-2)

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    def to_log_vector(self) -> np.ndarray:
        noise = max(self.noise_variance, NOISE_FLOOR)
        return np.concatenate([
            np.log(self.lengthscales),
            [math.log(self.signal_variance), math.log(noise)],
        ])

    @classmethod
    def from_log_vector(cls, eta: np.ndarray) -> "GpHyperparams":
        eta = np.asarray(eta, dtype=float)
        d = eta.size - 2
        return cls(lengthscales=np.exp(eta[:d]),
                   signal_variance=float(np.exp(eta[d])),
                   noise_variance=float(np.exp(eta[d + 1])))


@dataclass
class TrainingSet:
    """Inputs/targets plus the exact affine maps used to normalize them.

    ``input_bounds`` is a (lo, hi) pair of d-vectors; when omitted the
    identity map is used.  Target standardization is always recorded so
    predictions can be de-standardized exactly.
    """

    inputs: np.ndarray
    targets: np.ndarray
    input_bounds: tuple | None = None

    # Filled in __post_init__.
    inputs_norm: np.ndarray = field(init=False)
    y_mean: float = field(init=False)
    y_std: float = field(init=False)
    targets_std: np.ndarray = field(init=False)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_1d(np.asarray(self.targets, dtype=float))
        if self.inputs.size == 0:
            self.inputs = self.inputs.reshape(0, self.dim_hint())
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have the same length")
        if self.targets.size and not np.all(np.isfinite(self.targets)):
            raise ValueError("targets must be finite")
        self.inputs_norm = self.normalize(self.inputs)
        if self.targets.size:
            self.y_mean = float(np.mean(self.targets))
            self.y_std = float(max(np.std(self.targets), STD_FLOOR))
        else:
            self.y_mean, self.y_std = 0.0, 1.0
        self.targets_std = (self.targets - self.y_mean) / self.y_std

    def dim_hint(self) -> int:
        if self.input_bounds is not None:
            return np.asarray(self.input_bounds[0]).size
        return self.inputs.shape[1] if self.inputs.ndim == 2 else 0

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def __len__(self) -> int:
        return len(self.targets)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.input_bounds is None:
            return x
        lo = np.asarray(self.input_bounds[0], dtype=float)
        hi = np.asarray(self.input_bounds[1], dtype=float)
        return (x - lo) / (hi - lo)

    def destandardize_mean(self, mu_std):
        return self.y_mean + self.y_std * mu_std

    def destandardize_var(self, var_std):
        return self.y_std ** 2 * var_std


@dataclass
class Posterior:
    mean: float
    variance: float


@dataclass
class GpModel:
    """A fitted GP: hyperparameters plus cached Cholesky factor and alpha.

    Immutable after fitting; safe for concurrent read-only prediction.
    """

    hyperparams: GpHyperparams
    training: TrainingSet
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    @property
    def dim(self) -> int:
        return self.hyperparams.dim


def _check_dim(a, b, what="input"):
    if a != b:
        raise ValueError(f"{what} dimension mismatch: {a} != {b}")


def rbf_kernel(a, b, h: GpHyperparams) -> float:
    """ARD-RBF covariance sv * exp(-0.5 * sum(((a-b)/l)^2)) between two points."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    _check_dim(a.size, b.size)
    _check_dim(a.size, h.dim, "lengthscale")
    z = (a - b) / h.lengthscales
    return float(h.signal_variance * np.exp(-0.5 * np.dot(z, z)))


def kernel_matrix(a: np.ndarray, b: np.ndarray, h: GpHyperparams) -> np.ndarray:
    """Cross-covariance matrix between row sets ``a`` (n,d) and ``b`` (m,d)."""
    a = np.atleast_2d(a) / h.lengthscales
    b = np.atleast_2d(b) / h.lengthscales
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    np.maximum(sq, 0.0, out=sq)
    return h.signal_variance * np.exp(-0.5 * sq)


def _factorize(K: np.ndarray, noise: float, sv: float):
    """Cholesky of K + noise*I + jitter*I with escalating jitter."""
    n = K.shape[0]
    jitter = JITTER_START_FRACTION * sv
    max_jitter = JITTER_MAX_FRACTION * sv
    while True:
        try:
            L = cholesky(K + (noise + jitter) * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            pass
        if jitter >= max_jitter:
            raise CholeskyError(jitter)
        jitter = min(jitter * 10.0, max_jitter)


def fit_posterior(training: TrainingSet, h: GpHyperparams) -> GpModel:
    """Cache the Cholesky factor and alpha = (K + noise*I)^-1 y_std.

    An empty training set yields a prior-only model (mean 0, variance sv
    in standardized units).
    """
    _check_dim(training.dim_hint() or h.dim, h.dim)
    n = len(training)
    if n == 0:
        return GpModel(hyperparams=h, training=training,
                       chol=np.zeros((0, 0)), alpha=np.zeros(0), jitter=0.0)
    K = kernel_matrix(training.inputs_norm, training.inputs_norm, h)
    L, jitter = _factorize(K, h.noise_variance, h.signal_variance)
    alpha = cho_solve((L, True), training.targets_std)
    return GpModel(hyperparams=h, training=training, chol=L, alpha=alpha,
                   jitter=jitter)


def _posterior_std_space(model: GpModel, queries_norm: np.ndarray):
    """Posterior mean/variance on standardized targets at normalized queries."""
    h = model.hyperparams
    if len(model.training) == 0:
        m = queries_norm.shape[0]
        return np.zeros(m), np.full(m, h.signal_variance)
    k = kernel_matrix(model.training.inputs_norm, queries_norm, h)
    mu = k.T @ model.alpha
    v = solve_triangular(model.chol, k, lower=True)
    var = h.signal_variance - np.sum(v * v, axis=0)
    if np.any(var < VARIANCE_CLAMP):
        raise CholeskyError(model.jitter)
    return mu, np.maximum(var, 0.0)


def predict_batch(model: GpModel, queries: np.ndarray):
    """De-standardized posterior means and variances for a batch of queries."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    _check_dim(queries.shape[1], model.dim)
    qn = model.training.normalize(queries)
    mu, var = _posterior_std_space(model, qn)
    return model.training.destandardize_mean(mu), model.training.destandardize_var(var)


def predict(model: GpModel, query) -> Posterior:
    """Posterior distribution at a single query point."""
    mu, var = predict_batch(model, np.atleast_2d(query))
    return Posterior(mean=float(mu[0]), variance=float(var[0]))


def _lml_and_grad(training: TrainingSet, eta: np.ndarray):
    """Log marginal likelihood and gradient w.r.t. log-hyperparameters.

    Parameter order: log lengthscales, log signal variance, log noise.
    The jitter term scales with the signal variance and is included in the
    signal-variance derivative so the gradient matches finite differences.
    """
    h = GpHyperparams.from_log_vector(eta)
    X, y = training.inputs_norm, training.targets_std
    n, d = X.shape
    K = kernel_matrix(X, X, h)
    L, jitter = _factorize(K, h.noise_variance, h.signal_variance)
    alpha = cho_solve((L, True), y)
    lml = (
        -0.5 * float(y @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * n * math.log(2.0 * math.pi)
    )
    Kinv = cho_solve((L, True), np.eye(n))
    M = np.outer(alpha, alpha) - Kinv
    grad = np.empty(d + 2)
    Xl = X / h.lengthscales
    for i in range(d):
        diff = Xl[:, i][:, None] - Xl[:, i][None, :]
        grad[i] = 0.5 * np.sum(M * K * diff * diff)
    grad[d] = 0.5 * (np.sum(M * K) + jitter * np.trace(M))
    grad[d + 1] = 0.5 * h.noise_variance * np.trace(M)
    return lml, grad


def log_marginal_likelihood(model: GpModel):
    """LML of the fitted model plus its gradient w.r.t. log-hyperparameters."""
    if len(model.training) == 0:
        raise ValueError("model has no training data")
    return _lml_and_grad(model.training, model.hyperparams.to_log_vector())


def fit_hyperparams(training: TrainingSet, init: GpHyperparams, epochs: int = 500,
                    lr: float = 0.01) -> GpHyperparams:
    """Adam ascent on the LML over log-hyperparameters; returns the best iterate.

    Non-finite evaluations revert to the last finite iterate with a halved
    step; two consecutive failures terminate with the best found so far.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if lr <= 0:
        raise ValueError("lr must be positive")
    eta = init.to_log_vector()
    best_eta, best_lml = eta.copy(), -np.inf
    m = np.zeros_like(eta)
    v = np.zeros_like(eta)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = lr
    failures = 0
    prev_eta = eta.copy()
    for t in range(1, epochs + 1):
        try:
            lml, grad = _lml_and_grad(training, eta)
            ok = np.isfinite(lml) and np.all(np.isfinite(grad))
        except CholeskyError:
            ok = False
        if not ok:
            failures += 1
            if failures >= 2:
                break
            eta = prev_eta.copy()
            step *= 0.5
            continue
        failures = 0
        if lml > best_lml:
            best_lml, best_eta = lml, eta.copy()
        prev_eta = eta.copy()
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        eta = eta + step * m_hat / (np.sqrt(v_hat) + eps)
    # Evaluate the final iterate too.
    try:
        lml, _ = _lml_and_grad(training, eta)
        if np.isfinite(lml) and lml > best_lml:
            best_lml, best_eta = lml, eta.copy()
    except CholeskyError:
        pass
    return GpHyperparams.from_log_vector(best_eta)


def conditional_information_gain(full: TrainingSet, target_task,
                                 h: GpHyperparams) -> float:
    """Information gain about the target task's latents given other-task data.

    The training set holds concatenated (x, theta) rows; the trailing
    columns matching ``target_task`` exactly select the target block.  The
    conditional covariance is the Schur complement of the other-task block
    in the joint kernel matrix, and the gain is
    0.5 * log det(I + K_cond / noise).
    """
    if h.noise_variance <= 0:
        raise ValueError("conditional information gain requires positive noise")
    target_task = np.atleast_1d(np.asarray(target_task, dtype=float))
    D = target_task.size
    if full.dim <= D:
        raise ValueError("training inputs must include solution columns")
    thetas = full.inputs[:, -D:]
    mask = np.all(thetas == target_task, axis=1)
    if not np.any(mask):
        raise ValueError("no samples found for the target task")
    Xn = full.inputs_norm
    K = kernel_matrix(Xn, Xn, h)
    K_mm = K[np.ix_(mask, mask)]
    if np.all(mask):
        K_cond = K_mm
    else:
        other = ~mask
        K_oo = K[np.ix_(other, other)] + h.noise_variance * np.eye(int(other.sum()))
        B = K[np.ix_(other, mask)]
        K_cond = K_mm - B.T @ np.linalg.solve(K_oo, B)
    n = K_cond.shape[0]
    sign, logdet = np.linalg.slogdet(np.eye(n) + K_cond / h.noise_variance)
    if sign <= 0:
        return 0.0
    return max(0.5 * logdet, 0.0)
