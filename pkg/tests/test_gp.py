"""Gaussian-process core: kernels, posteriors, LML and information gain."""

import numpy as np
import pytest

from pmto.gp import (
    GpHyperparams,
    TrainingSet,
    _posterior_std_space,
    conditional_information_gain,
    fit_hyperparams,
    fit_posterior,
    kernel_matrix,
    log_marginal_likelihood,
    predict,
    predict_batch,
    rbf_kernel,
)

JITTER = 1e-6  # fraction of signal variance added by the factorization


def unit_hyper(dim, noise=1e-2):
    return GpHyperparams(lengthscales=np.ones(dim), signal_variance=1.0,
                         noise_variance=noise)


class TestRbfKernel:
    def test_zero_distance_identity(self):
        h = GpHyperparams(lengthscales=[0.3, 2.0], signal_variance=1.0)
        a = np.array([0.7, -1.2])
        assert rbf_kernel(a, a, h) == 1.0

    def test_unit_points_closed_form(self):
        h = unit_hyper(1)
        assert rbf_kernel([0.0], [1.0], h) == pytest.approx(np.exp(-0.5),
                                                            rel=1e-12)

    def test_ard_scaled_distance(self):
        h = GpHyperparams(lengthscales=[3.0, 4.0], signal_variance=2.0)
        val = rbf_kernel([0.0, 0.0], [3.0, 4.0], h)
        assert val == pytest.approx(2.0 * np.exp(-1.0), rel=1e-12)

    def test_matrix_matches_pairwise(self):
        rng = np.random.default_rng(0)
        h = GpHyperparams(lengthscales=rng.uniform(0.2, 2.0, 3),
                          signal_variance=1.7)
        A = rng.random((5, 3))
        B = rng.random((4, 3))
        K = kernel_matrix(A, B, h)
        for i in range(5):
            for j in range(4):
                assert K[i, j] == pytest.approx(rbf_kernel(A[i], B[j], h),
                                                abs=1e-12)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            rbf_kernel([0.0, 1.0], [0.0], unit_hyper(2))


class TestHyperparams:
    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            GpHyperparams(lengthscales=[0.0])
        with pytest.raises(ValueError):
            GpHyperparams(lengthscales=[1.0], signal_variance=-1.0)
        with pytest.raises(ValueError):
            GpHyperparams(lengthscales=[1.0], noise_variance=-1e-3)

    def test_log_vector_round_trip(self):
        h = GpHyperparams(lengthscales=[0.3, 1.5], signal_variance=2.0,
                          noise_variance=0.05)
        back = GpHyperparams.from_log_vector(h.to_log_vector())
        np.testing.assert_allclose(back.lengthscales, h.lengthscales)
        assert back.signal_variance == pytest.approx(2.0)
        assert back.noise_variance == pytest.approx(0.05)


class TestPosterior:
    def test_noiseless_interpolation_single_point(self):
        training = TrainingSet(inputs=[[0.4]], targets=[3.7])
        model = fit_posterior(training, unit_hyper(1, noise=0.0))
        post = predict(model, [0.4])
        assert post.mean == pytest.approx(3.7, abs=1e-9)
        assert post.variance <= 1e-8

    def test_two_point_direct_inversion_oracle(self):
        training = TrainingSet(inputs=[[0.0], [1.0]], targets=[0.0, 1.0])
        h = unit_hyper(1, noise=0.01)
        model = fit_posterior(training, h)
        post = predict(model, [0.5])

        # Direct 2x2 inversion with identical standardization and jitter.
        y = np.array([0.0, 1.0])
        y_mean, y_std = y.mean(), max(y.std(), 1e-8)
        ys = (y - y_mean) / y_std
        k01 = np.exp(-0.5)
        K = np.array([[1.0, k01], [k01, 1.0]]) + (0.01 + JITTER) * np.eye(2)
        kq = np.exp(-0.5 * np.array([0.5, 0.5]) ** 2)
        Kinv = np.linalg.inv(K)
        mu = y_mean + y_std * (kq @ Kinv @ ys)
        var = y_std ** 2 * (1.0 - kq @ Kinv @ kq)
        assert post.mean == pytest.approx(mu, abs=1e-8)
        assert post.variance == pytest.approx(var, abs=1e-8)

    def test_prior_recovery_far_from_data(self):
        rng = np.random.default_rng(1)
        training = TrainingSet(inputs=rng.random((8, 2)),
                               targets=rng.normal(5.0, 2.0, 8))
        h = GpHyperparams(lengthscales=[0.2, 0.2], signal_variance=1.3,
                          noise_variance=0.01)
        model = fit_posterior(training, h)
        post = predict(model, [50.0, -50.0])
        assert post.mean == pytest.approx(training.y_mean, abs=1e-9)
        assert post.variance == pytest.approx(training.y_std ** 2 * 1.3,
                                              rel=1e-9)

    def test_variance_monotone_under_data_addition(self):
        # Posterior variance is target-independent; compare in the
        # standardized space where both models share the same kernel.
        rng = np.random.default_rng(2)
        for _ in range(10):
            X = rng.random((6, 2))
            X_more = np.vstack([X, rng.random((1, 2))])
            h = GpHyperparams(lengthscales=rng.uniform(0.2, 1.0, 2),
                              signal_variance=1.0, noise_variance=0.05)
            small = fit_posterior(TrainingSet(X, np.zeros(6)), h)
            big = fit_posterior(TrainingSet(X_more, np.zeros(7)), h)
            q = rng.random((20, 2))
            _, v_small = _posterior_std_space(small, q)
            _, v_big = _posterior_std_space(big, q)
            assert np.all(v_big <= v_small + 1e-8)

    def test_empty_training_set_prior_model(self):
        training = TrainingSet(inputs=np.zeros((0, 2)), targets=[])
        h = GpHyperparams(lengthscales=[1.0, 1.0], signal_variance=2.5)
        model = fit_posterior(training, h)
        mu, var = predict_batch(model, [[0.3, 0.7], [5.0, 5.0]])
        np.testing.assert_allclose(mu, 0.0)
        np.testing.assert_allclose(var, 2.5)

    def test_input_normalization_by_bounds(self):
        # Identical geometry in normalized space gives identical posteriors.
        bounds = (np.array([0.0]), np.array([10.0]))
        t1 = TrainingSet(inputs=[[0.0], [10.0]], targets=[0.0, 1.0],
                         input_bounds=bounds)
        t2 = TrainingSet(inputs=[[0.0], [1.0]], targets=[0.0, 1.0])
        h = unit_hyper(1, noise=0.01)
        p1 = predict(fit_posterior(t1, h), [5.0])
        p2 = predict(fit_posterior(t2, h), [0.5])
        assert p1.mean == pytest.approx(p2.mean, abs=1e-12)
        assert p1.variance == pytest.approx(p2.variance, abs=1e-12)

    def test_query_dimension_mismatch(self):
        training = TrainingSet(inputs=[[0.0, 0.0]], targets=[1.0])
        model = fit_posterior(training, unit_hyper(2))
        with pytest.raises(ValueError):
            predict(model, [0.0])


class TestMarginalLikelihood:
    def test_single_point_closed_form(self):
        training = TrainingSet(inputs=[[0.0]], targets=[0.0])
        model = fit_posterior(training, unit_hyper(1, noise=0.0))
        lml, _ = log_marginal_likelihood(model)
        expected = -0.5 * np.log(2.0 * np.pi * (1.0 + JITTER))
        assert lml == pytest.approx(expected, abs=1e-8)

    def test_gradient_matches_finite_differences(self):
        from pmto.gp import _lml_and_grad
        rng = np.random.default_rng(3)
        training = TrainingSet(inputs=rng.random((8, 2)),
                               targets=rng.normal(size=8))
        eta = GpHyperparams(lengthscales=[0.4, 0.8], signal_variance=1.2,
                            noise_variance=0.05).to_log_vector()
        _, grad = _lml_and_grad(training, eta)
        step = 1e-5
        for i in range(eta.size):
            up, dn = eta.copy(), eta.copy()
            up[i] += step
            dn[i] -= step
            fd = (_lml_and_grad(training, up)[0]
                  - _lml_and_grad(training, dn)[0]) / (2 * step)
            assert abs(grad[i] - fd) / max(abs(fd), 1e-10) < 1e-4

    def test_noise_maximizes_lml_at_sample_variance(self):
        # On pure-noise data with a near-diagonal kernel the LML over
        # noise peaks near the (standardized) sample variance of 1.
        from pmto.gp import _lml_and_grad
        rng = np.random.default_rng(4)
        X = np.linspace(0, 1, 40)[:, None]
        training = TrainingSet(inputs=X, targets=rng.normal(size=40))
        grid = np.linspace(np.log(0.05), np.log(20.0), 121)
        lmls = []
        for log_noise in grid:
            h = GpHyperparams(lengthscales=[1e-3], signal_variance=1e-4,
                              noise_variance=float(np.exp(log_noise)))
            lmls.append(_lml_and_grad(training, h.to_log_vector())[0])
        best_noise = float(np.exp(grid[int(np.argmax(lmls))]))
        assert 0.6 <= best_noise <= 1.6


class TestFitHyperparams:
    def test_lengthscale_recovery_band(self):
        true = GpHyperparams(lengthscales=[0.3], signal_variance=1.0,
                             noise_variance=1e-4)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X = rng.random((30, 1))
            K = kernel_matrix(X, X, true) + 1e-4 * np.eye(30)
            y = np.linalg.cholesky(K) @ rng.normal(size=30)
            training = TrainingSet(inputs=X, targets=y)
            fitted = fit_hyperparams(training, GpHyperparams.default(1),
                                     epochs=300)
            assert 0.15 <= fitted.lengthscales[0] <= 0.6

    def test_constant_targets_drive_noise_down(self):
        X = np.linspace(0, 1, 12)[:, None]
        training = TrainingSet(inputs=X, targets=np.full(12, 4.2))
        fitted = fit_hyperparams(training, GpHyperparams.default(1),
                                 epochs=1000)
        assert fitted.noise_variance <= 1e-4

    def test_zero_epochs_rejected(self):
        training = TrainingSet(inputs=[[0.0]], targets=[1.0])
        with pytest.raises(ValueError):
            fit_hyperparams(training, GpHyperparams.default(1), epochs=0)

    def test_fit_never_worse_than_init(self):
        rng = np.random.default_rng(5)
        training = TrainingSet(inputs=rng.random((15, 2)),
                               targets=rng.normal(size=15))
        init = GpHyperparams.default(2)
        fitted = fit_hyperparams(training, init, epochs=100)
        lml_init, _ = log_marginal_likelihood(fit_posterior(training, init))
        lml_fit, _ = log_marginal_likelihood(fit_posterior(training, fitted))
        assert lml_fit >= lml_init - 1e-9


class TestConditionalInformationGain:
    def test_single_sample_closed_form(self):
        # One target-task sample, no other-task data, k = sv = noise = 1:
        # gain is 0.5 * log(1 + 1) = 0.5 * log 2.
        training = TrainingSet(inputs=[[0.3, 0.7]], targets=[1.0])
        h = GpHyperparams(lengthscales=[1.0, 1.0], signal_variance=1.0,
                          noise_variance=1.0)
        ig = conditional_information_gain(training, [0.7], h)
        assert ig == pytest.approx(0.5 * np.log(2.0), abs=1e-12)

    def test_far_tasks_reduce_to_independent(self):
        rng = np.random.default_rng(6)
        xs = rng.random((3, 1))
        near = np.hstack([xs, np.zeros((3, 1))])
        far = np.hstack([rng.random((4, 1)), np.full((4, 1), 1e6)])
        joint = TrainingSet(inputs=np.vstack([near, far]),
                            targets=np.zeros(7))
        h = GpHyperparams(lengthscales=[0.5, 0.5], signal_variance=1.0,
                          noise_variance=0.1)
        unified = conditional_information_gain(joint, [0.0], h)
        alone = conditional_information_gain(
            TrainingSet(inputs=near, targets=np.zeros(3)), [0.0], h)
        assert unified == pytest.approx(alone, abs=1e-9)

    def test_unified_never_exceeds_independent(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n_tasks = int(rng.integers(2, 5))
            thetas = rng.random(n_tasks)
            rows, target = [], None
            for t, theta in enumerate(thetas):
                n = int(rng.integers(3, 7))
                block = np.hstack([rng.random((n, 2)),
                                   np.full((n, 1), theta)])
                rows.append(block)
                if t == 0:
                    target = theta
            X = np.vstack(rows)
            training = TrainingSet(inputs=X, targets=np.zeros(len(X)))
            h = GpHyperparams(lengthscales=rng.uniform(0.2, 1.0, 3),
                              signal_variance=float(rng.uniform(0.5, 2.0)),
                              noise_variance=float(rng.uniform(0.05, 0.5)))
            unified = conditional_information_gain(training, [target], h)
            mask = X[:, -1] == target
            block = TrainingSet(inputs=X[mask], targets=np.zeros(mask.sum()))
            independent = conditional_information_gain(block, [target], h)
            assert unified <= independent + 1e-9

    def test_requires_positive_noise(self):
        training = TrainingSet(inputs=[[0.0, 0.0]], targets=[1.0])
        h = GpHyperparams(lengthscales=[1.0, 1.0], noise_variance=0.0)
        with pytest.raises(ValueError):
            conditional_information_gain(training, [0.0], h)

    def test_unknown_task_rejected(self):
        training = TrainingSet(inputs=[[0.0, 0.0]], targets=[1.0])
        with pytest.raises(ValueError):
            conditional_information_gain(training, [0.5], unit_hyper(2))
