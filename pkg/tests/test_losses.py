import math

import numpy as np
import pytest

from spmlbias.errors import ConfigError
from spmlbias.losses import (
    CLAMP,
    LossSpec,
    loss_an,
    loss_an_ls,
    loss_em,
    loss_role,
    sigmoid,
)


def fd_gradient(fun, z, h=1e-5):
    """Central finite differences of a scalar function of a logit vector."""
    g = np.zeros_like(z)
    for i in range(z.shape[0]):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (fun(zp) - fun(zm)) / (2 * h)
    return g


def rel_err(analytic, numeric):
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)


class TestSigmoid:
    def test_symmetry_and_range(self):
        z = np.linspace(-60, 60, 2001)
        s = sigmoid(z)
        assert np.allclose(s + sigmoid(-z), 1.0, atol=1e-12)
        assert (s >= 0).all() and (s <= 1).all()

    def test_scalar(self):
        assert sigmoid(0.0) == 0.5


class TestAssumeNegative:
    def test_symmetric_point(self):
        loss, _ = loss_an(np.array([0.5, 0.5]), 0)
        assert abs(loss - math.log(2)) < 1e-12

    def test_perfect_prediction_limit(self):
        loss, _ = loss_an(np.array([1 - 1e-7, 1e-7]), 0)
        assert 0 < loss < 3e-7

    def test_frozen_scalar_value(self):
        # independent evaluation: -(ln .8 + ln .7 + ln .4) / 3
        loss, _ = loss_an(np.array([0.8, 0.3, 0.6]), 0)
        assert abs(loss - 0.4987030757090324) < 1e-12

    def test_gradient_form(self):
        f = np.array([0.8, 0.3, 0.6])
        _, grad = loss_an(f, 0)
        assert np.allclose(grad, (f - np.array([1.0, 0, 0])) / 3, atol=1e-12)

    def test_minimized_at_one_hot(self):
        f = np.array([1 - CLAMP, CLAMP, CLAMP])
        _, grad = loss_an(f, 0)
        assert np.abs(grad).max() <= CLAMP / 3 + 1e-16

    def test_bad_observed_index(self):
        with pytest.raises(ValueError):
            loss_an(np.array([0.5, 0.5]), 2)


class TestLabelSmoothing:
    def test_zero_epsilon_is_exactly_an(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            f = rng.uniform(0.01, 0.99, size=7)
            p = int(rng.integers(0, 7))
            la, ga = loss_an(f, p)
            lb, gb = loss_an_ls(f, p, 0.0)
            assert la == lb
            assert np.array_equal(ga, gb)

    def test_frozen_scalar_value(self):
        # -(0.9 ln 0.9 + 0.1 ln 0.1), both coordinates contribute equally
        loss, _ = loss_an_ls(np.array([0.9, 0.1]), 0, 0.1)
        assert abs(loss - 0.3250829733914482) < 1e-12

    def test_zero_gradient_at_targets(self):
        eps = 0.1
        f = np.array([1 - eps, eps, eps])
        _, grad = loss_an_ls(f, 0, eps)
        assert np.abs(grad).max() < 1e-15

    def test_epsilon_range_enforced(self):
        with pytest.raises(ConfigError):
            loss_an_ls(np.array([0.5, 0.5]), 0, 0.5)


class TestEntropyMaximization:
    def test_frozen_scalar_value(self):
        loss, _ = loss_em(np.array([0.8, 0.3]), 0, 0.1)
        assert abs(loss - 0.0810285605543602) < 1e-12

    def test_max_entropy_contribution(self):
        # an unobserved label at 1/2 contributes exactly -alpha ln2 / L
        alpha = 0.3
        l_half, _ = loss_em(np.array([0.6, 0.5]), 0, alpha)
        base = -math.log(0.6) / 2
        assert abs(l_half - (base - alpha * math.log(2) / 2)) < 1e-12

    def test_alpha_limit_recovers_positive_logloss(self):
        f = np.array([0.7, 0.2, 0.9])
        loss, _ = loss_em(f, 1, 1e-12)
        assert abs(loss - (-math.log(0.2) / 3)) < 1e-9

    def test_unobserved_gradient_pushes_toward_half(self):
        _, grad = loss_em(np.array([0.5, 0.8, 0.2]), 0, 0.1)
        assert grad[1] > 0  # above 1/2: descent lowers it
        assert grad[2] < 0  # below 1/2: descent raises it

    def test_alpha_validated(self):
        with pytest.raises(ConfigError):
            loss_em(np.array([0.5, 0.5]), 0, 0.0)


def independent_role_value(f, est, observed, k, lam):
    """The stated formula, evaluated directly (pin, clamp, two legs, prior)."""
    fc = np.clip(np.asarray(f, dtype=float), CLAMP, 1 - CLAMP)
    ec = np.asarray(est, dtype=float).copy()
    ec[observed] = 1.0
    ec = np.clip(ec, CLAMP, 1 - CLAMP)
    n = fc.shape[0]
    bce = lambda a, b: -float(np.mean(b * np.log(a) + (1 - b) * np.log(1 - a)))
    return 0.5 * (bce(fc, ec) + bce(ec, fc)) + lam * (ec.sum() - k) ** 2 / n**2


class TestRole:
    def test_frozen_scalar_value(self):
        loss, _, _ = loss_role(np.array([0.8, 0.4]), np.array([1.0, 0.3]), 0, 1.3, 1.0)
        assert abs(loss - 1.1937055361331619) < 1e-12
        assert abs(loss - independent_role_value([0.8, 0.4], [1.0, 0.3], 0, 1.3, 1.0)) < 1e-15

    def test_one_hot_estimate_zeroes_regularizer(self):
        f = np.array([0.7, 0.4])
        for lam in (0.0, 5.0):
            loss, _, _ = loss_role(f, np.array([1.0, 0.0]), 0, 1.0, lam)
            base = loss_role(f, np.array([1.0, 0.0]), 0, 1.0, 0.0)[0]
            # at L=2 the clamped one-hot sums to exactly 1, so lambda is inert
            assert loss == base

    def test_symmetric_legs_when_equal(self):
        f = np.array([0.7, 0.2, 0.6])
        loss, _, _ = loss_role(f, f.copy(), 0, 1.0, 0.0)
        fc = np.clip(f, CLAMP, 1 - CLAMP)
        ec = fc.copy()
        ec[0] = 1 - CLAMP
        bce = lambda a, b: -float(np.mean(b * np.log(a) + (1 - b) * np.log(1 - a)))
        assert abs(loss - bce(fc, ec) / 2 - bce(ec, fc) / 2) < 1e-15

    def test_pinned_coordinate_gradient_zero(self):
        _, _, grad_e = loss_role(np.array([0.8, 0.4]), np.array([0.2, 0.3]), 0, 1.0)
        assert grad_e[0] == 0.0

    def test_k_validated(self):
        with pytest.raises(ConfigError):
            loss_role(np.array([0.5, 0.5]), np.array([0.5, 0.5]), 0, 0.0)


class TestGradients:
    """Finite-difference spot checks; the full sweep runs in acceptance."""

    @pytest.mark.parametrize("n_cats", [2, 5])
    def test_an_family_and_em(self, n_cats):
        rng = np.random.default_rng(n_cats)
        for _ in range(20):
            z = rng.uniform(-3, 3, size=n_cats)
            p = int(rng.integers(0, n_cats))
            for fun, grad_fun in [
                (lambda q: loss_an(sigmoid(q), p)[0], lambda q: loss_an(sigmoid(q), p)[1]),
                (
                    lambda q: loss_an_ls(sigmoid(q), p, 0.2)[0],
                    lambda q: loss_an_ls(sigmoid(q), p, 0.2)[1],
                ),
                (
                    lambda q: loss_em(sigmoid(q), p, 0.3)[0],
                    lambda q: loss_em(sigmoid(q), p, 0.3)[1],
                ),
            ]:
                assert rel_err(grad_fun(z), fd_gradient(fun, z)) < 1e-4

    @pytest.mark.parametrize("n_cats", [2, 5])
    def test_role_both_logit_sets(self, n_cats):
        rng = np.random.default_rng(100 + n_cats)
        k, lam = 1.7, 0.8
        for _ in range(20):
            zf = rng.uniform(-3, 3, size=n_cats)
            ze = rng.uniform(-3, 3, size=n_cats)
            p = int(rng.integers(0, n_cats))
            f0, e0 = sigmoid(zf), sigmoid(ze)
            _, grad_f, grad_e = loss_role(f0, e0, p, k, lam)
            # each leg treats the other side as constant, so the finite
            # difference must hold the frozen copy fixed
            fd_f = fd_gradient(lambda q: stop_f_side(sigmoid(q), e0, p), zf)
            assert rel_err(grad_f, fd_f) < 1e-4
            fd_e = fd_gradient(
                lambda q: stop_e_side(f0, sigmoid(q), p, k, lam), ze
            )
            assert rel_err(grad_e, fd_e) < 1e-4


def stop_f_side(f, est, observed):
    """Value seen by classifier logits: BCE(f, stop(est)) / 2; the rest is constant."""
    fc = np.clip(np.asarray(f, dtype=float), CLAMP, 1 - CLAMP)
    ec = np.asarray(est, dtype=float).copy()
    ec[observed] = 1.0
    ec = np.clip(ec, CLAMP, 1 - CLAMP)
    bce = lambda a, b: -float(np.mean(b * np.log(a) + (1 - b) * np.log(1 - a)))
    return 0.5 * bce(fc, ec)


def stop_e_side(f, est, observed, k, lam):
    """Value seen by estimator logits: BCE(est, stop(f)) / 2 plus the prior."""
    fc = np.clip(np.asarray(f, dtype=float), CLAMP, 1 - CLAMP)
    ec = np.asarray(est, dtype=float).copy()
    ec[observed] = 1.0
    ec = np.clip(ec, CLAMP, 1 - CLAMP)
    n = fc.shape[0]
    bce = lambda a, b: -float(np.mean(b * np.log(a) + (1 - b) * np.log(1 - a)))
    return 0.5 * bce(ec, fc) + lam * (ec.sum() - k) ** 2 / n**2


class TestFiniteness:
    def test_all_losses_finite_over_clamped_range(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            f = rng.uniform(0.0, 1.0, size=4)  # includes exact 0/1 before clamping
            p = int(rng.integers(0, 4))
            est = rng.uniform(0.0, 1.0, size=4)
            values = [
                loss_an(f, p)[0],
                loss_an_ls(f, p, 0.1)[0],
                loss_em(f, p, 0.1)[0],
                loss_role(f, est, p, 2.0, 1.0)[0],
            ]
            assert all(math.isfinite(v) for v in values)


class TestLossSpec:
    def test_kind_checked(self):
        with pytest.raises(ConfigError):
            LossSpec(kind="HINGE")

    def test_parameter_validation_per_kind(self):
        with pytest.raises(ConfigError):
            LossSpec(kind="AN-LS", ls_epsilon=0.7)
        with pytest.raises(ConfigError):
            LossSpec(kind="EM", em_alpha=-1)
        with pytest.raises(ConfigError):
            LossSpec(kind="ROLE", role_k=0)
        # inactive parameters are not validated
        LossSpec(kind="AN", ls_epsilon=0.7, em_alpha=-1)
