"""Hand-derived update algebra for every policy, plus dense-solve equivalence.

Each expected value is computed independently inside the test (closed form or
brute-force solve), never copied from the implementation.
"""
import math

import numpy as np
import pytest

from rewritelab.bandits import make_policy
from rewritelab.bandits.base import gumbel_from_uniform
from rewritelab.bandits.linear import (
    EpsilonGreedyFTRL,
    FTRLProximal,
    KLLinUCB,
    LinUCB,
    LinearExp3,
    LinearFTPL,
    LinearThompson,
    ftrl_weights,
    klucb_exploration_bound,
)
from rewritelab.bandits.noncontextual import (
    Exp3,
    FollowPerturbedLeader,
    GaussianThompson,
    exp3_multiplier,
    exp3_probabilities,
)

TOL = 1e-9
RIDGE_TOL = 1e-8


class TestExp3:
    def test_fresh_probabilities_uniform(self):
        policy = Exp3(5, gamma=0.1)
        assert np.allclose(policy.probabilities(), 0.2, atol=TOL)

    def test_weighted_probabilities_no_mixing(self):
        probs = exp3_probabilities(np.array([2.0, 1.0, 1.0, 1.0, 1.0]), gamma=0.0)
        expected = np.array([1 / 3, 1 / 6, 1 / 6, 1 / 6, 1 / 6])
        assert np.allclose(probs, expected, atol=TOL)

    def test_full_mixing_is_uniform(self):
        probs = exp3_probabilities(np.array([9.0, 1.0, 5.0]), gamma=1.0)
        assert np.allclose(probs, 1 / 3, atol=TOL)

    def test_multiplier_hand_value(self):
        mult = exp3_multiplier(gamma=0.1, n_arms=5, prob=0.5, reward=1.0)
        assert mult == pytest.approx(math.exp(0.04), abs=TOL)
        assert mult == pytest.approx(1.040811, abs=5e-7)

    def test_zero_reward_keeps_weights(self):
        policy = Exp3(5, gamma=0.1)
        policy.update(2, None, 0.0)
        policy.update(4, None, 0.0)
        assert np.allclose(policy.weights, 1.0, atol=TOL)
        assert np.allclose(policy.probabilities(), 0.2, atol=TOL)

    def test_update_applies_multiplier(self):
        policy = Exp3(5, gamma=0.1)
        policy.update(1, None, 1.0)
        # fresh probs are 0.2, so the multiplier is exp(0.1/(5*0.2)) = exp(0.1)
        assert policy.weights[1] == pytest.approx(math.exp(0.1), abs=TOL)
        assert np.allclose(np.delete(policy.weights, 1), 1.0, atol=TOL)

    def test_renormalization_preserves_distribution(self):
        policy = Exp3(3, gamma=0.1)
        policy.weights = np.array([1e120, 1e119, 1.0])
        before = policy.probabilities().copy()
        policy.update(2, None, 0.0)
        assert policy.weights.max() <= 1.0 + TOL
        assert np.allclose(policy.probabilities(), before, atol=TOL)


class TestFollowPerturbedLeader:
    def test_huge_eta_is_greedy(self):
        policy = FollowPerturbedLeader(3, eta=1e6, seed=0)
        policy.totals = np.array([10.0, 0.0, 0.0])
        for _ in range(50):
            assert policy.select().arm == 0

    def test_seeded_draws_replayed_by_hand(self):
        policy = FollowPerturbedLeader(2, eta=1.0, seed=42)
        rng = np.random.default_rng(42)
        u = rng.random(2)
        expected_scores = -np.log(-np.log(u))
        trace = policy.select()
        assert trace.arm == int(np.argmax(expected_scores))
        assert np.allclose(trace.scores, expected_scores, atol=TOL)
        assert np.allclose(trace.draws, u, atol=TOL)

    def test_gumbel_transform_scale(self):
        u = np.array([0.3, 0.7])
        assert np.allclose(
            gumbel_from_uniform(u, 2.0), -np.log(-np.log(u)) / 2.0, atol=TOL
        )


class TestGaussianThompson:
    def test_conjugate_update_hand_value(self):
        policy = GaussianThompson(2, sigma_noise=1.0)
        policy.update(0, None, 1.0)
        mean, var = policy.posterior(0)
        assert mean == pytest.approx(0.5, abs=TOL)
        assert var == pytest.approx(0.5, abs=TOL)

    def test_untouched_arm_keeps_prior(self):
        policy = GaussianThompson(2, sigma_noise=1.0)
        policy.update(0, None, 1.0)
        mean, var = policy.posterior(1)
        assert mean == pytest.approx(0.0, abs=TOL)
        assert var == pytest.approx(1.0, abs=TOL)

    def test_repeated_updates_match_batch_posterior(self):
        # precision 1 + m/sigma^2; mean = (sum r / sigma^2) / precision
        sigma = 0.5
        rewards = [1.0, 0.0, 0.5, 1.0]
        policy = GaussianThompson(2, sigma_noise=sigma)
        for r in rewards:
            policy.update(1, None, r)
        mean, var = policy.posterior(1)
        precision = 1.0 + len(rewards) / sigma**2
        assert var == pytest.approx(1.0 / precision, abs=TOL)
        assert mean == pytest.approx(sum(rewards) / sigma**2 / precision, abs=TOL)


class TestLinUCB:
    def test_fresh_scores_equal_norm(self):
        policy = LinUCB(5, dim=3, alpha=1.0)
        x = np.ones(3)
        trace = policy.select(x)
        assert np.allclose(trace.scores, math.sqrt(3.0), atol=TOL)
        assert trace.arm == 0

    def test_one_update_hand_value(self):
        policy = LinUCB(2, dim=4, alpha=1.0)
        e1 = np.eye(4)[0]
        policy.update(0, e1, 1.0)
        theta = policy.theta_matrix()
        assert theta[0, 0] == pytest.approx(0.5, abs=TOL)
        assert np.allclose(theta[0, 1:], 0.0, atol=TOL)
        score = policy.scores(e1)[0]
        assert score == pytest.approx(0.5 + math.sqrt(0.5), abs=TOL)

    def test_gram_and_target_accumulate(self):
        policy = LinUCB(2, dim=2, alpha=1.0)
        policy.update(1, np.array([1.0, 1.0]), 0.5)
        assert np.allclose(policy.arms.gram[1], [[2.0, 1.0], [1.0, 2.0]], atol=TOL)
        assert np.allclose(policy.arms.target[1], [0.5, 0.5], atol=TOL)

    def test_rank_one_closed_form(self):
        policy = LinUCB(2, dim=3, alpha=1.0)
        e1 = np.eye(3)[0]
        for n in range(1, 8):
            policy.update(0, e1, 1.0)
            assert policy.theta_matrix()[0, 0] == pytest.approx(n / (1.0 + n), abs=TOL)

    def test_zero_context_is_noop(self):
        policy = LinUCB(2, dim=3, alpha=1.0)
        policy.update(0, np.zeros(3), 0.7)
        assert np.allclose(policy.arms.gram[0], np.eye(3), atol=TOL)
        assert np.allclose(policy.arms.target[0], 0.0, atol=TOL)

    def test_alpha_zero_is_greedy(self):
        policy = LinUCB(3, dim=2, alpha=0.0, seed=1)
        rng = np.random.default_rng(7)
        for _ in range(30):
            x = rng.random(2)
            policy.update(int(rng.integers(3)), x, float(rng.random()))
        x = rng.random(2)
        assert policy.select(x).arm == int(np.argmax(policy.theta_matrix() @ x))


class TestKLBound:
    def test_t1_clamped_to_zero(self):
        raw = (math.log(1) + 1.0 * math.log(math.log(2))) / 1
        assert raw < 0
        assert klucb_exploration_bound(1, 1, 1.0) == 0.0

    def test_hand_value_t10(self):
        expected = math.log(10) + 3.0 * math.log(math.log(11))
        bound = klucb_exploration_bound(10, 1, 3.0)
        assert bound == pytest.approx(expected, abs=TOL)
        assert bound == pytest.approx(4.9264, abs=5e-4)
        bonus = math.sqrt(2.0 * 1.0 * bound)
        assert bonus == pytest.approx(3.1389, abs=5e-4)

    def test_zero_variance_zero_bonus(self):
        policy = KLLinUCB(2, dim=2, c=3.0)
        # drive one arm's variance along e1 near zero with many pulls
        e1 = np.eye(2)[0]
        for _ in range(500):
            policy.update(0, e1, 1.0)
        scores = policy.scores(e1, t=501)
        mean = policy.theta_matrix()[0] @ e1
        var = e1 @ policy.arms.gram_inv[0] @ e1
        assert scores[0] == pytest.approx(
            mean + math.sqrt(2.0 * var * klucb_exploration_bound(501, 500, 3.0)),
            abs=TOL,
        )

    def test_unpulled_arm_uses_full_budget(self):
        policy = KLLinUCB(2, dim=2, c=3.0)
        policy.update(0, np.eye(2)[0], 1.0)
        x = np.array([1.0, 0.0])
        scores = policy.scores(x, t=2)
        expected_bonus = math.sqrt(2.0 * 1.0 * klucb_exploration_bound(2, 0, 3.0))
        assert scores[1] == pytest.approx(expected_bonus, abs=TOL)


class TestFTRL:
    def test_dead_zone(self):
        w = ftrl_weights(np.zeros(3), np.zeros(3), 1.0, 1.0, 1.0, 0.0)
        assert np.allclose(w, 0.0, atol=TOL)

    def test_hand_weight(self):
        w = ftrl_weights(
            np.array([2.0]), np.array([4.0]), alpha=1.0, beta=1.0, l1=1.0, l2=0.0
        )
        assert w[0] == pytest.approx(-1.0 / 3.0, abs=TOL)

    def test_sign_symmetry(self):
        w = ftrl_weights(
            np.array([-2.0]), np.array([4.0]), alpha=1.0, beta=1.0, l1=1.0, l2=0.0
        )
        assert w[0] == pytest.approx(1.0 / 3.0, abs=TOL)

    def test_update_recursion_hand_trace(self):
        policy = FTRLProximal(2, dim=3, alpha=1.0, beta=1.0, l1=0.01, l2=0.0)
        e1 = np.eye(3)[0]
        policy.update(0, e1, 1.0)
        assert policy.z[0, 0] == pytest.approx(-1.0, abs=TOL)
        assert policy.n[0, 0] == pytest.approx(1.0, abs=TOL)
        assert np.allclose(policy.z[0, 1:], 0.0, atol=TOL)
        assert np.allclose(policy.z[1], 0.0, atol=TOL)

    def test_zero_reward_from_zero_weights_is_noop(self):
        policy = FTRLProximal(2, dim=3)
        e1 = np.eye(3)[0]
        policy.update(0, e1, 0.0)
        policy.update(0, e1, 0.0)
        assert np.allclose(policy.z, 0.0, atol=TOL)
        assert np.allclose(policy.n, 0.0, atol=TOL)

    def test_zero_context_is_noop(self):
        policy = FTRLProximal(2, dim=3)
        policy.z[0, 0] = 5.0
        before = policy.z.copy()
        policy.update(0, np.zeros(3), 1.0)
        assert np.allclose(policy.z, before, atol=TOL)


class TestEpsilonGreedyFTRL:
    def test_fresh_greedy_picks_lowest_index(self):
        policy = EpsilonGreedyFTRL(4, dim=3, epsilon=0.0)
        assert policy.select(np.ones(3)).arm == 0

    def test_single_observation_ridge(self):
        policy = EpsilonGreedyFTRL(2, dim=3, epsilon=0.0)
        e1 = np.eye(3)[0]
        policy.update(0, e1, 1.0)
        expected = np.linalg.solve(np.eye(3) + np.outer(e1, e1), e1)
        assert np.allclose(policy.theta_matrix()[0], expected, atol=TOL)
        assert policy.theta_matrix()[0, 0] == pytest.approx(0.5, abs=TOL)


class TestLinearExp3:
    def test_zero_theta_uniform(self):
        policy = LinearExp3(4, dim=3, gamma=0.3)
        assert np.allclose(policy.probabilities(np.ones(3)), 0.25, atol=TOL)

    def test_hand_softmax(self):
        policy = LinearExp3(2, dim=2, gamma=0.0)
        policy.theta[0] = np.array([1.0, 0.0])
        probs = policy.probabilities(np.array([1.0, 0.0]))
        e = math.exp(1.0)
        assert probs[0] == pytest.approx(e / (e + 1.0), abs=TOL)
        assert probs[1] == pytest.approx(1.0 / (e + 1.0), abs=TOL)
        assert probs[0] == pytest.approx(0.7311, abs=5e-5)

    def test_full_mixing_uniform(self):
        policy = LinearExp3(3, dim=2, gamma=1.0)
        policy.theta[0] = np.array([4.0, -1.0])
        assert np.allclose(policy.probabilities(np.ones(2)), 1 / 3, atol=TOL)

    def test_importance_weighted_step(self):
        policy = LinearExp3(2, dim=3, eta=0.1, gamma=0.0)
        e2 = np.eye(3)[1]
        policy.update(0, e2, 1.0)
        # zero theta gives p = 0.5, so the step is 0.1*(1/0.5) = 0.2 along e2
        assert np.allclose(policy.theta[0], 0.2 * e2, atol=TOL)
        assert np.allclose(policy.theta[1], 0.0, atol=TOL)


class TestLinearFTPL:
    def test_additive_update(self):
        policy = LinearFTPL(2, dim=3)
        policy.update(0, np.array([1.0, 0.0, 1.0]), 0.5)
        assert np.allclose(policy.theta[0], [0.5, 0.0, 0.5], atol=TOL)

    def test_huge_eta_is_greedy(self):
        policy = LinearFTPL(3, dim=1, eta=1e6, seed=0)
        policy.theta = np.array([[5.0], [0.0], [0.0]])
        for _ in range(50):
            assert policy.select(np.ones(1)).arm == 0

    def test_seeded_choice_replayed(self):
        policy = LinearFTPL(3, dim=2, eta=1.0, seed=11)
        x = np.array([1.0, 0.5])
        rng = np.random.default_rng(11)
        u = rng.random(3)
        expected = np.zeros(3) + (-np.log(-np.log(u)))
        assert policy.select(x).arm == int(np.argmax(expected))


class TestLinearThompson:
    def test_rank_one_posterior(self):
        policy = LinearThompson(2, dim=3, sigma_noise=1.0)
        e1 = np.eye(3)[0]
        policy.update(0, e1, 1.0)
        mu, cov = policy.posterior(0)
        assert np.allclose(policy.precision[0], np.eye(3) + np.outer(e1, e1), atol=TOL)
        assert mu[0] == pytest.approx(0.5, abs=TOL)
        assert np.allclose(mu[1:], 0.0, atol=TOL)
        assert np.allclose(cov, np.linalg.inv(np.eye(3) + np.outer(e1, e1)), atol=TOL)

    def test_posterior_matches_batch_bayes(self):
        # against a direct batch conjugate solve on the full history
        sigma = 0.5
        rng = np.random.default_rng(3)
        policy = LinearThompson(2, dim=4, sigma_noise=sigma)
        xs, rs = [], []
        for _ in range(40):
            x = rng.random(4)
            r = float(rng.random())
            xs.append(x)
            rs.append(r)
            policy.update(1, x, r)
        X = np.array(xs)
        y = np.array(rs)
        precision = np.eye(4) + X.T @ X / sigma**2
        mu = np.linalg.solve(precision, X.T @ y / sigma**2)
        got_mu, got_cov = policy.posterior(1)
        assert np.allclose(got_mu, mu, atol=1e-8)
        assert np.allclose(got_cov, np.linalg.inv(precision), atol=1e-8)


def _dense_ridge(history, dim, ridge=1.0):
    gram = ridge * np.eye(dim)
    target = np.zeros(dim)
    for x, r in history:
        gram += np.outer(x, x)
        target += r * x
    return np.linalg.solve(gram, target)


@pytest.mark.parametrize("policy_name", ["linucb", "eps-ftrl"])
def test_ridge_matches_dense_solve_after_1000_updates(policy_name):
    dim, n_arms = 6, 3
    policy = make_policy(policy_name, n_arms, dim=dim, seed=0)
    rng = np.random.default_rng(12345)
    history = {a: [] for a in range(n_arms)}
    for _ in range(1000):
        arm = int(rng.integers(n_arms))
        x = rng.random(dim)
        r = float(rng.random())
        history[arm].append((x, r))
        policy.update(arm, x, r)
    theta = policy.theta_matrix()
    for arm in range(n_arms):
        expected = _dense_ridge(history[arm], dim)
        assert np.allclose(theta[arm], expected, atol=RIDGE_TOL)


def test_ridge_survives_refresh_boundary():
    # 1000+ updates on a single arm crosses the refactorization point
    dim = 5
    policy = make_policy("linucb", 2, dim=dim, seed=0)
    rng = np.random.default_rng(99)
    history = []
    for _ in range(1003):
        x = rng.random(dim)
        r = float(rng.random())
        history.append((x, r))
        policy.update(0, x, r)
    expected = _dense_ridge(history, dim)
    assert np.allclose(policy.theta_matrix()[0], expected, atol=RIDGE_TOL)
