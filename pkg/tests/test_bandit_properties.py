"""Behavioural invariants shared by all policies: determinism, simplex
structure, update locality, tie-breaking, and sampling frequencies."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rewritelab.bandits import POLICY_REGISTRY, make_policy
from rewritelab.bandits.base import sample_categorical
from rewritelab.bandits.linear import ftrl_weights
from rewritelab.bandits.noncontextual import exp3_probabilities
from rewritelab.errors import ConfigurationError, ContractError

ALL_POLICIES = sorted(POLICY_REGISTRY)
DIM = 6
N_ARMS = 4


def _make(name, seed=0, **params):
    return make_policy(name, N_ARMS, dim=DIM, seed=seed, **params)


def _scripted_run(policy, n_rounds=60, stream_seed=7):
    """Play scripted contexts/rewards; returns (arms, traces)."""
    rng = np.random.default_rng(stream_seed)
    arms, traces = [], []
    for _ in range(n_rounds):
        x = (rng.random(DIM) < 0.4).astype(np.float64)
        trace = policy.select(x if policy.contextual else None)
        reward = float(rng.random())
        policy.update(trace.arm, x if policy.contextual else None, reward)
        arms.append(trace.arm)
        traces.append(trace)
    return arms, traces


@pytest.mark.parametrize("name", ALL_POLICIES)
def test_same_seed_bit_identical(name):
    arms_a, traces_a = _scripted_run(_make(name, seed=5))
    arms_b, traces_b = _scripted_run(_make(name, seed=5))
    assert arms_a == arms_b
    for ta, tb in zip(traces_a, traces_b):
        assert ta.scores == tb.scores
        assert ta.probs == tb.probs
        assert ta.draws == tb.draws


@pytest.mark.parametrize("name", ALL_POLICIES)
def test_reward_out_of_range_rejected(name):
    policy = _make(name)
    x = np.ones(DIM)
    ctx = x if policy.contextual else None
    with pytest.raises(ContractError):
        policy.update(0, ctx, 1.5)
    with pytest.raises(ContractError):
        policy.update(0, ctx, -0.1)
    with pytest.raises(ContractError):
        policy.update(N_ARMS, ctx, 0.5)


@pytest.mark.parametrize("name", ["exp3", "linexp3"])
def test_sampling_distribution_valid_simplex(name):
    policy = _make(name)
    rng = np.random.default_rng(0)
    x = np.ones(DIM)
    for _ in range(50):
        if name == "exp3":
            probs = policy.probabilities()
            policy.update(int(rng.integers(N_ARMS)), None, float(rng.random()))
        else:
            probs = policy.probabilities(x)
            policy.update(int(rng.integers(N_ARMS)), x, float(rng.random()))
        assert abs(probs.sum() - 1.0) < 1e-9
        assert np.all(probs >= policy.gamma / N_ARMS - 1e-12)


@pytest.mark.parametrize("name", ["linucb", "linucb-kl", "ftrl", "eps-ftrl"])
def test_fresh_tie_breaks_to_lowest_index(name):
    params = {"epsilon": 0.0} if name == "eps-ftrl" else {}
    policy = _make(name, **params)
    assert policy.select(np.ones(DIM)).arm == 0


@pytest.mark.parametrize(
    "name", ["linucb", "linucb-kl", "ftrl", "eps-ftrl", "linexp3", "linftpl", "ts-c"]
)
def test_update_touches_only_chosen_arm(name):
    policy = _make(name, seed=2)
    rng = np.random.default_rng(4)
    for _ in range(10):
        policy.update(1, rng.random(DIM), float(rng.random()))
    before = policy.theta_matrix().copy()
    policy.update(2, rng.random(DIM), 0.9)
    after = policy.theta_matrix()
    untouched = [a for a in range(N_ARMS) if a != 2]
    assert np.array_equal(before[untouched], after[untouched])


def test_ts_c_covariance_stays_pd():
    policy = _make("ts-c", seed=0)
    rng = np.random.default_rng(8)
    for _ in range(200):
        arm = int(rng.integers(N_ARMS))
        policy.update(arm, rng.random(DIM), float(rng.random()))
        _, cov = policy.posterior(arm)
        assert np.allclose(cov, cov.T, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(cov) > 0.0)


def test_exp3_weights_stay_bounded():
    policy = _make("exp3", **{"gamma": 0.01})
    for _ in range(3000):
        trace = policy.select()
        policy.update(trace.arm, None, 1.0)
    assert np.all(np.isfinite(policy.weights))
    assert policy.weights.max() <= 1e100
    assert abs(policy.probabilities().sum() - 1.0) < 1e-9


def _frequency_check(counts, expected_p, n):
    observed = np.asarray(counts, dtype=np.float64)
    chi2 = stats.chisquare(observed, f_exp=np.full(len(counts), expected_p * n))
    assert chi2.pvalue > 1e-4


def test_ftpl_equal_totals_uniform():
    policy = _make("ftpl", seed=13)
    counts = np.zeros(N_ARMS)
    for _ in range(10_000):
        counts[policy.select().arm] += 1
    _frequency_check(counts, 1.0 / N_ARMS, 10_000)


def test_eps_ftrl_full_exploration_uniform():
    policy = _make("eps-ftrl", seed=21, **{"epsilon": 1.0})
    x = np.ones(DIM)
    counts = np.zeros(N_ARMS)
    for _ in range(10_000):
        counts[policy.select(x).arm] += 1
    _frequency_check(counts, 1.0 / N_ARMS, 10_000)


def test_ts_identical_posteriors_split_evenly():
    policy = make_policy("ts-c", 2, dim=3, seed=17)
    x = np.ones(3)
    counts = np.zeros(2)
    for _ in range(10_000):
        counts[policy.select(x).arm] += 1
    _frequency_check(counts, 0.5, 10_000)


def test_ts_nc_symmetric_arms_split_evenly():
    policy = make_policy("ts-nc", 2, seed=23)
    counts = np.zeros(2)
    for _ in range(10_000):
        counts[policy.select().arm] += 1
    _frequency_check(counts, 0.5, 10_000)


class _FixedUniform:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


@given(st.floats(min_value=0.0, max_value=0.999999))
def test_sample_categorical_inverse_cdf(u):
    probs = np.array([0.2, 0.3, 0.5])
    idx, got_u = sample_categorical(_FixedUniform(u), probs)
    assert got_u == u
    if u < 0.2:
        assert idx == 0
    elif u < 0.5:
        assert idx == 1
    else:
        assert idx == 2


@given(
    st.lists(st.floats(min_value=1e-6, max_value=1e6), min_size=2, max_size=8),
    st.floats(min_value=0.0, max_value=1.0),
)
@settings(max_examples=200)
def test_exp3_probabilities_simplex_property(weights, gamma):
    probs = exp3_probabilities(np.array(weights), gamma)
    assert abs(probs.sum() - 1.0) < 1e-9
    assert np.all(probs >= gamma / len(weights) - 1e-12)


@given(
    st.lists(st.floats(min_value=-50.0, max_value=50.0), min_size=1, max_size=6),
    st.floats(min_value=0.0, max_value=5.0),
)
@settings(max_examples=200)
def test_ftrl_weights_dead_zone_and_sign(zs, l1):
    z = np.array(zs)
    n = np.abs(z) + 1.0
    w = ftrl_weights(z, n, alpha=1.0, beta=1.0, l1=l1, l2=0.0)
    inside = np.abs(z) <= l1
    assert np.all(w[inside] == 0.0)
    # sign check needs a gap above the threshold; at the exact boundary the
    # subtraction can underflow to zero
    outside = np.abs(z) > l1 + 1e-9
    assert np.all(np.sign(w[outside]) == -np.sign(z[outside]))


def test_make_policy_unknown_name():
    with pytest.raises(ConfigurationError, match="exp3"):
        make_policy("nope", 4, dim=3)


def test_make_policy_contextual_needs_dim():
    with pytest.raises(ConfigurationError):
        make_policy("linucb", 4)


def test_make_policy_bad_param():
    with pytest.raises(ConfigurationError, match="linucb"):
        make_policy("linucb", 4, dim=3, bogus=1.0)


def test_make_policy_rejects_tiny_arm_count():
    with pytest.raises(ConfigurationError):
        make_policy("exp3", 1)
