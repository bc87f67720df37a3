"""Focal loss and cross-entropy against closed forms and finite differences."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from flownids.loss import (FocalConfig, categorical_ce, categorical_ce_grad_logits,
                           focal_loss, focal_loss_grad_logits)
from flownids.network import softmax


def probs_row(p_true, c, true_idx=0):
    """One distribution with the stated true-class probability, rest uniform."""
    row = np.full(c, (1.0 - p_true) / (c - 1))
    row[true_idx] = p_true
    return row


class TestFocalConfig:
    def test_uniform(self):
        cfg = FocalConfig.uniform(4)
        npt.assert_array_equal(cfg.alpha, np.ones(4))
        assert cfg.gamma == 2.0

    def test_inverse_frequency_normalized_to_mean_one(self):
        cfg = FocalConfig.inverse_frequency(np.array([900, 90, 10]))
        assert cfg.alpha.mean() == pytest.approx(1.0, abs=1e-12)
        # rarer class -> strictly larger weight
        assert cfg.alpha[2] > cfg.alpha[1] > cfg.alpha[0]
        # proportional to 1/count
        npt.assert_allclose(cfg.alpha[0] * 900, cfg.alpha[2] * 10, rtol=1e-12)

    def test_inverse_frequency_balanced_is_uniform(self):
        cfg = FocalConfig.inverse_frequency(np.array([500, 500, 500]))
        npt.assert_allclose(cfg.alpha, np.ones(3), atol=1e-15)

    def test_inverse_frequency_empty_class_gets_weight_one(self):
        cfg = FocalConfig.inverse_frequency(np.array([100, 0, 100]))
        assert cfg.alpha[1] == 1.0
        assert np.all(cfg.alpha > 0)

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            FocalConfig(gamma=-1.0, alpha=np.ones(3))
        with pytest.raises(ValueError):
            FocalConfig(gamma=2.0, alpha=np.array([1.0, 0.0, 1.0]))
        with pytest.raises(ValueError):
            FocalConfig(gamma=2.0, alpha=np.array([[1.0, 1.0]]))


class TestFocalLossValues:
    def test_gamma_zero_is_cross_entropy(self):
        probs = probs_row(0.5, 3)[None, :]
        targets = np.eye(3)[[0]]
        loss = focal_loss(probs, targets, FocalConfig.uniform(3, gamma=0.0))
        assert loss == pytest.approx(-math.log(0.5), abs=1e-12)
        assert loss == pytest.approx(0.69315, abs=5e-6)

    def test_perfect_prediction_zero_loss(self):
        targets = np.eye(3)[[1]]
        for gamma in (0.0, 1.0, 2.0, 5.0):
            loss = focal_loss(targets.astype(float), targets,
                              FocalConfig.uniform(3, gamma=gamma))
            assert loss == 0.0

    def test_gamma_two_half_confidence(self):
        # (1 - 0.5)^2 * (-ln 0.5) = 0.25 * 0.693147...
        probs = probs_row(0.5, 3)[None, :]
        targets = np.eye(3)[[0]]
        loss = focal_loss(probs, targets, FocalConfig.uniform(3, gamma=2.0))
        assert loss == pytest.approx(0.25 * -math.log(0.5), abs=1e-12)
        assert loss == pytest.approx(0.17329, abs=5e-6)

    def test_two_sample_batch_mean(self):
        probs = np.stack([probs_row(0.5, 4), probs_row(0.25, 4)])
        targets = np.eye(4)[[0, 0]]
        expect = (-math.log(0.5) - math.log(0.25)) / 2.0
        assert categorical_ce(probs, targets) == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(1.03972, abs=5e-6)

    def test_uniform_probs_ln4(self):
        probs = np.full((3, 4), 0.25)
        targets = np.eye(4)[[0, 1, 3]]
        assert categorical_ce(probs, targets) == pytest.approx(math.log(4.0),
                                                               abs=1e-12)

    def test_alpha_weighting_scales_linearly(self):
        probs = np.stack([probs_row(0.3, 3), probs_row(0.6, 3, true_idx=1)])
        targets = np.eye(3)[[0, 1]]
        base = FocalConfig(gamma=1.5, alpha=np.array([1.0, 2.0, 0.5]))
        scaled = FocalConfig(gamma=1.5, alpha=base.alpha * 7.0)
        l_base = focal_loss(probs, targets, base)
        g_base = focal_loss_grad_logits(probs, targets, base)
        assert focal_loss(probs, targets, scaled) == pytest.approx(7 * l_base,
                                                                   rel=1e-14)
        npt.assert_allclose(focal_loss_grad_logits(probs, targets, scaled),
                            7 * g_base, rtol=1e-14)

    def test_monotone_decreasing_in_confidence(self):
        targets = np.eye(3)[[0]]
        cfg = FocalConfig.uniform(3, gamma=2.0)
        grid = np.linspace(0.01, 0.99, 50)
        losses = [focal_loss(probs_row(p, 3)[None], targets, cfg) for p in grid]
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_gamma_ordering(self):
        targets = np.eye(3)[[0]]
        for p in (0.1, 0.5, 0.9):
            probs = probs_row(p, 3)[None]
            l2 = focal_loss(probs, targets, FocalConfig.uniform(3, gamma=2.0))
            l0 = focal_loss(probs, targets, FocalConfig.uniform(3, gamma=0.0))
            assert l2 < l0

    def test_floor_keeps_loss_finite(self):
        probs = np.array([[1.0, 0.0, 0.0]])
        targets = np.eye(3)[[1]]
        loss = focal_loss(probs, targets, FocalConfig.uniform(3, gamma=0.0))
        assert math.isfinite(loss)
        assert loss == pytest.approx(-math.log(1e-12), rel=1e-12)

    def test_shape_mismatch_fatal(self):
        with pytest.raises(ValueError):
            focal_loss(np.ones((2, 3)) / 3, np.eye(4)[[0, 1]],
                       FocalConfig.uniform(3))
        with pytest.raises(ValueError):
            focal_loss(np.ones((2, 3)) / 3, np.eye(3)[[0, 1]],
                       FocalConfig.uniform(4))


class TestCrossEntropyEquivalence:
    def test_cfcl_gamma0_equals_ce_on_1000_batches(self):
        rng = np.random.default_rng(404)
        for _ in range(1000):
            b = int(rng.integers(1, 9))
            c = int(rng.integers(2, 7))
            probs = softmax(rng.normal(size=(b, c)) * 3)
            targets = np.eye(c)[rng.integers(0, c, size=b)]
            ce = categorical_ce(probs, targets)
            fl = focal_loss(probs, targets, FocalConfig.uniform(c, gamma=0.0))
            assert abs(ce - fl) <= 1e-12

    def test_ce_grad_closed_form(self):
        rng = np.random.default_rng(17)
        probs = softmax(rng.normal(size=(8, 5)))
        targets = np.eye(5)[rng.integers(0, 5, size=8)]
        npt.assert_allclose(categorical_ce_grad_logits(probs, targets),
                            (probs - targets) / 8.0, rtol=0, atol=1e-15)
        npt.assert_allclose(
            focal_loss_grad_logits(probs, targets, FocalConfig.uniform(5, 0.0)),
            (probs - targets) / 8.0, rtol=0, atol=1e-14)


def fd_grad_logits(logits, targets, cfg, step=1e-6):
    """Central differences of focal_loss(softmax(z)) w.r.t. the logits."""
    g = np.zeros_like(logits)
    flat = logits.ravel()
    gflat = g.ravel()
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        up = focal_loss(softmax(logits), targets, cfg)
        flat[j] = orig - step
        down = focal_loss(softmax(logits), targets, cfg)
        flat[j] = orig
        gflat[j] = (up - down) / (2.0 * step)
    return g


class TestGradientFiniteDifferences:
    def test_grid_of_gamma_and_alpha(self):
        # (gamma, alpha) grid {0, 1, 2, 5} x {uniform, random positive}
        rng = np.random.default_rng(2048)
        b, c = 4, 5
        logits = rng.normal(size=(b, c)) * 2
        targets = np.eye(c)[rng.integers(0, c, size=b)]
        alphas = [np.ones(c), rng.uniform(0.25, 3.0, size=c)]
        for gamma in (0.0, 1.0, 2.0, 5.0):
            for alpha in alphas:
                cfg = FocalConfig(gamma=gamma, alpha=alpha)
                analytic = focal_loss_grad_logits(softmax(logits), targets, cfg)
                numeric = fd_grad_logits(logits.copy(), targets, cfg)
                npt.assert_allclose(analytic, numeric, atol=1e-6,
                                    err_msg=f"gamma={gamma}")

    def test_near_perfect_prediction_small_gradient(self):
        # true-class probability 1 - 1e-9: gradient at the minimum
        eps = 1e-9
        probs = np.array([[1.0 - eps, eps / 2, eps / 2]])
        targets = np.eye(3)[[0]]
        for gamma in (0.0, 2.0):
            g = focal_loss_grad_logits(probs, targets,
                                       FocalConfig.uniform(3, gamma=gamma))
            assert np.linalg.norm(g) < 1e-6

    def test_gradient_batch_scaling(self):
        # duplicating the batch leaves the mean gradient unchanged
        rng = np.random.default_rng(31)
        probs = softmax(rng.normal(size=(3, 4)))
        targets = np.eye(4)[[0, 2, 1]]
        cfg = FocalConfig.uniform(4, gamma=2.0)
        single = focal_loss_grad_logits(probs, targets, cfg)
        doubled = focal_loss_grad_logits(np.vstack([probs, probs]),
                                         np.vstack([targets, targets]), cfg)
        npt.assert_allclose(doubled[:3] * 2, single, rtol=1e-13)
