"""UCB scoring and its Sobol-plus-refinement maximizer."""

import numpy as np
import pytest

from pmto.acquisition import AcquisitionConfig, maximize_ucb, ucb_score
from pmto.gp import GpHyperparams, TrainingSet, fit_posterior, predict


def dense_quadratic_model(noise=1e-6):
    X = np.linspace(0, 1, 60)[:, None]
    y = (X[:, 0] - 0.3) ** 2
    h = GpHyperparams(lengthscales=[0.15], signal_variance=1.0,
                      noise_variance=noise)
    return fit_posterior(TrainingSet(X, y), h)


class TestScore:
    def test_matches_posterior_arithmetic(self):
        model = dense_quadratic_model()
        for x in ([0.1], [0.45], [0.9]):
            post = predict(model, x)
            for beta in (0.0, 1.0, 2.5):
                expected = -post.mean + beta * np.sqrt(post.variance)
                assert ucb_score(model, x, beta=beta) == pytest.approx(
                    expected, abs=1e-12)

    def test_prior_model_constant_score(self):
        training = TrainingSet(inputs=np.zeros((0, 1)), targets=[])
        h = GpHyperparams(lengthscales=[1.0], signal_variance=4.0)
        model = fit_posterior(training, h)
        scores = [ucb_score(model, [x], beta=1.0) for x in (0.0, 0.3, 0.9)]
        np.testing.assert_allclose(scores, 2.0)  # 0 + 1 * sqrt(4)

    def test_beta_zero_prefers_lowest_mean(self):
        model = dense_quadratic_model()
        assert ucb_score(model, [0.3], beta=0.0) > ucb_score(model, [0.9],
                                                             beta=0.0)

    def test_negative_beta_rejected(self):
        with pytest.raises(ValueError):
            AcquisitionConfig(beta=-0.5)


class TestMaximize:
    def test_quadratic_minimum_found(self):
        model = dense_quadratic_model()
        cfg = AcquisitionConfig(beta=0.0, candidate_count=512, seed=0)
        x = maximize_ucb(model, None, (np.zeros(1), np.ones(1)), cfg)
        assert abs(x[0] - 0.3) < 0.05

    def test_constant_score_keeps_first_candidate(self):
        training = TrainingSet(inputs=np.zeros((0, 2)), targets=[])
        model = fit_posterior(training, GpHyperparams.default(2))
        cfg = AcquisitionConfig(candidate_count=64, refine_steps=0, seed=3)
        x = maximize_ucb(model, None, (np.zeros(2), np.ones(2)), cfg)
        from pmto.acquisition import _sobol_candidates
        first = _sobol_candidates(2, 64, 3)[0]
        np.testing.assert_allclose(x, first)

    def test_result_inside_bounds_many_seeds(self):
        model = dense_quadratic_model()
        lo, hi = np.array([0.2]), np.array([0.8])
        for seed in range(100):
            cfg = AcquisitionConfig(candidate_count=16, refine_steps=4,
                                    seed=seed)
            x = maximize_ucb(model, None, (lo, hi), cfg)
            assert lo[0] <= x[0] <= hi[0]

    def test_theta_is_appended_for_unified_models(self):
        rng = np.random.default_rng(0)
        X = np.hstack([rng.random((20, 1)), rng.random((20, 1))])
        y = (X[:, 0] - X[:, 1]) ** 2
        model = fit_posterior(TrainingSet(X, y),
                              GpHyperparams.default(2))
        # Scoring x with task theta equals scoring the concatenated point.
        s1 = ucb_score(model, [0.4], theta=[0.6], beta=1.0)
        s2 = ucb_score(model, [0.4, 0.6], beta=1.0)
        assert s1 == pytest.approx(s2, abs=1e-12)

    def test_degenerate_bounds_rejected(self):
        model = dense_quadratic_model()
        with pytest.raises(ValueError):
            maximize_ucb(model, None, (np.ones(1), np.ones(1)),
                         AcquisitionConfig())

    def test_deterministic_given_seed(self):
        model = dense_quadratic_model()
        cfg = AcquisitionConfig(candidate_count=128, refine_steps=4, seed=11)
        a = maximize_ucb(model, None, (np.zeros(1), np.ones(1)), cfg)
        b = maximize_ucb(model, None, (np.zeros(1), np.ones(1)), cfg)
        np.testing.assert_array_equal(a, b)

    def test_refinement_never_hurts(self):
        model = dense_quadratic_model()
        bounds = (np.zeros(1), np.ones(1))
        for seed in range(10):
            coarse = AcquisitionConfig(beta=0.0, candidate_count=32,
                                       refine_steps=0, seed=seed)
            fine = AcquisitionConfig(beta=0.0, candidate_count=32,
                                     refine_steps=8, seed=seed)
            s0 = ucb_score(model, maximize_ucb(model, None, bounds, coarse),
                           beta=0.0)
            s1 = ucb_score(model, maximize_ucb(model, None, bounds, fine),
                           beta=0.0)
            assert s1 >= s0 - 1e-12
