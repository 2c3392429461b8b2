import numpy as np
import pytest

from hgr import (
    DiscreteJoint,
    DualCritic,
    HgrEstimate,
    chi2_divergence_exact,
    chi2_dual_objective,
    d_metric,
    discretize,
    dual_value_exact,
    estimate_hgr_independence,
    estimate_hgr_separation,
    f_star,
    hgr_binned,
    hgr_exact_conditional,
    hgr_exact_discrete,
    permute_within_strata,
)
from tensor_nn import AdamOptimizer
from utils.errors import InputError, ParameterError


def _random_joint(rng, k1=None, k2=None):
    k1 = k1 or int(rng.integers(2, 6))
    k2 = k2 or int(rng.integers(2, 6))
    p = rng.dirichlet(np.ones(k1 * k2)).reshape(k1, k2)
    return DiscreteJoint(p / p.sum())


def _sample_binary_pair(joint, n, rng):
    cells = rng.choice(4, size=n, p=joint.probs.ravel())
    return (cells // 2).astype(float), (cells % 2).astype(float)


# ----------------------------------------------------------------------
# Exact oracle
# ----------------------------------------------------------------------
def test_product_joint_has_zero_hgr():
    joint = DiscreteJoint(np.outer([0.2, 0.3, 0.5], [0.6, 0.4]))
    assert hgr_exact_discrete(joint) == pytest.approx(0.0, abs=1e-9)


def test_permutation_joint_has_unit_hgr():
    joint = DiscreteJoint(np.eye(3)[[2, 0, 1]] / 3.0)
    assert hgr_exact_discrete(joint) == pytest.approx(1.0, abs=1e-12)


def test_binary_joint_matches_pearson():
    assert hgr_exact_discrete(DiscreteJoint(np.array([[0.4, 0.1], [0.1, 0.4]]))) == pytest.approx(0.6, abs=1e-12)


def test_joint_contract():
    with pytest.raises(InputError):
        DiscreteJoint(np.array([[0.5, 0.5], [0.0, 0.0]]))
    with pytest.raises(InputError):
        DiscreteJoint(np.array([[0.5, 0.4]]))
    with pytest.raises(InputError):
        DiscreteJoint(np.array([[-0.1, 0.6], [0.3, 0.2]]))


def test_squared_hgr_never_exceeds_chi2():
    rng = np.random.default_rng(0)
    for _ in range(100):
        joint = _random_joint(rng)
        assert hgr_exact_discrete(joint) ** 2 <= chi2_divergence_exact(joint) + 1e-10


def test_squared_hgr_equals_chi2_for_binary_pairs():
    rng = np.random.default_rng(1)
    for _ in range(100):
        joint = _random_joint(rng, 2, 2)
        assert hgr_exact_discrete(joint) ** 2 == pytest.approx(chi2_divergence_exact(joint), abs=1e-9)


def test_merging_categories_never_increases_hgr():
    rng = np.random.default_rng(2)
    for _ in range(100):
        joint = _random_joint(rng, int(rng.integers(3, 6)))
        i, j = sorted(rng.choice(joint.probs.shape[0], size=2, replace=False))
        merged = np.delete(joint.probs, j, axis=0)
        merged[i] += joint.probs[j]
        assert hgr_exact_discrete(DiscreteJoint(merged)) <= hgr_exact_discrete(joint) + 1e-9


def test_triangle_inequality_with_binary_pivot():
    rng = np.random.default_rng(3)
    for _ in range(100):
        k1, k2 = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        p = rng.dirichlet(np.ones(k1 * k2 * 2)).reshape(k1, k2, 2)
        rho_12 = hgr_exact_discrete(DiscreteJoint(p.sum(axis=2)))
        rho_13 = hgr_exact_discrete(DiscreteJoint(p.sum(axis=1)))
        rho_23 = hgr_exact_discrete(DiscreteJoint(p.sum(axis=0)))
        assert d_metric(rho_12) <= d_metric(rho_13) + d_metric(rho_23) + 1e-9


def test_dual_value_never_exceeds_chi2():
    rng = np.random.default_rng(4)
    for _ in range(100):
        joint = _random_joint(rng)
        critic = rng.normal(scale=2.0, size=joint.probs.shape)
        assert dual_value_exact(joint, critic) <= chi2_divergence_exact(joint) + 1e-12


def test_optimal_critic_attains_chi2():
    joint = _random_joint(np.random.default_rng(5), 3, 4)
    optimal = 2.0 * (joint.probs / joint.product - 1.0)
    assert dual_value_exact(joint, optimal) == pytest.approx(chi2_divergence_exact(joint), abs=1e-12)


def test_dual_value_table_shape_is_checked():
    with pytest.raises(InputError):
        dual_value_exact(DiscreteJoint(np.full((2, 2), 0.25)), np.zeros((2, 3)))


def test_conditional_hgr_is_worst_stratum():
    strata = [DiscreteJoint(np.full((2, 2), 0.25)), DiscreteJoint(np.array([[0.4, 0.1], [0.1, 0.4]]))]
    assert hgr_exact_conditional(strata) == pytest.approx(0.6)
    with pytest.raises(InputError):
        hgr_exact_conditional([])


# ----------------------------------------------------------------------
# Dual objective and d-metric
# ----------------------------------------------------------------------
def test_chi2_dual_objective_examples():
    assert chi2_dual_objective(np.zeros(5), np.zeros(5)) == 0.0
    assert chi2_dual_objective([2.0], [2.0]) == pytest.approx(-1.0)
    assert f_star(2.0) == 3.0
    with pytest.raises(InputError):
        chi2_dual_objective([], [1.0])


@pytest.mark.parametrize("rho, expected", [(1.0, 0.0), (0.0, np.sqrt(2.0)), (0.5, 1.0)])
def test_d_metric(rho, expected):
    assert d_metric(rho) == pytest.approx(expected)


@pytest.mark.parametrize("rho", [-0.1, 1.2])
def test_d_metric_rejects_out_of_range(rho):
    with pytest.raises(ParameterError):
        d_metric(rho)


def test_estimate_clamps_rho():
    assert HgrEstimate.from_dual(1.44).rho_hat == 1.0
    assert HgrEstimate.from_dual(-0.3).rho_hat == 0.0
    assert HgrEstimate.from_dual(0.25).rho_hat == pytest.approx(0.5)


# ----------------------------------------------------------------------
# Plug-in helpers
# ----------------------------------------------------------------------
def test_discretize_uses_quantile_bins_for_continuous_values(rng):
    codes = discretize(rng.normal(size=1000), bins=4)
    assert sorted(np.unique(codes)) == [0, 1, 2, 3]
    assert np.all(np.bincount(codes) == 250)


def test_discretize_maps_rows_of_one_hot_blocks_to_groups():
    codes = discretize(np.array([[1, 0], [0, 1], [1, 0]]))
    assert codes[0] == codes[2] != codes[1]


def test_hgr_binned_separates_dependent_from_independent(rng):
    a = rng.integers(0, 2, size=4000).astype(float)
    independent = rng.normal(size=4000)
    dependent = a + 0.1 * rng.normal(size=4000)
    assert hgr_binned(independent, a) < 0.1
    assert hgr_binned(dependent, a) > 0.9
    assert hgr_binned(np.ones(10), a[:10]) == 0.0


def test_within_strata_permutation_stays_in_stratum(rng):
    strata = np.array([0, 1, 0, 1, 1, 2, 0])
    perm, singleton = permute_within_strata(strata, rng)
    np.testing.assert_array_equal(strata[perm], strata)
    assert sorted(perm) == list(range(len(strata)))
    assert singleton


# ----------------------------------------------------------------------
# Neural estimators
# ----------------------------------------------------------------------
def test_constant_scores_are_flagged_degenerate():
    estimate = estimate_hgr_independence(np.ones(50), np.eye(2)[np.arange(50) % 2], steps=1)
    assert estimate.degenerate and estimate.rho_hat == 0.0


def test_estimators_reject_zero_steps():
    with pytest.raises(ParameterError):
        estimate_hgr_independence(np.arange(4.0), np.zeros((4, 1)), steps=0)
    with pytest.raises(ParameterError):
        estimate_hgr_separation(np.arange(4.0), np.zeros((4, 1)), np.zeros(4), steps=0)


def test_independent_scores_give_small_estimate():
    rng = np.random.default_rng(6)
    a = rng.integers(0, 2, size=5000).astype(float)
    estimate = estimate_hgr_independence(rng.normal(size=5000), a, rng=np.random.default_rng(0))
    assert estimate.rho_hat <= 0.1


def test_function_of_attribute_gives_large_estimate():
    rng = np.random.default_rng(7)
    a = rng.integers(0, 2, size=5000).astype(float)
    estimate = estimate_hgr_independence(3.0 * a - 1.0, a, rng=np.random.default_rng(0))
    assert estimate.rho_hat >= 0.9


def test_binary_joint_estimate_near_oracle():
    joint = DiscreteJoint(np.array([[0.4, 0.1], [0.1, 0.4]]))
    s, a = _sample_binary_pair(joint, 5000, np.random.default_rng(8))
    estimate = estimate_hgr_independence(s, a, rng=np.random.default_rng(0))
    assert 0.5 <= estimate.rho_hat <= 0.7


def test_confounded_outcome_separates_the_two_notions():
    rng = np.random.default_rng(9)
    y = rng.integers(0, 2, size=5000).astype(float)
    a = y.copy()
    scores = 2.0 * y + 0.05 * rng.normal(size=5000)
    separation = estimate_hgr_separation(scores, a, y, rng=np.random.default_rng(0))
    independence = estimate_hgr_independence(scores, a, rng=np.random.default_rng(0))
    assert separation.rho_hat <= 0.15
    assert independence.rho_hat >= 0.6


def test_separation_reduces_to_independence_when_outcome_is_unrelated():
    rng = np.random.default_rng(10)
    a = rng.integers(0, 2, size=5000).astype(float)
    y = rng.integers(0, 2, size=5000).astype(float)
    scores = a + 0.5 * rng.normal(size=5000)
    separation = estimate_hgr_separation(scores, a, y, rng=np.random.default_rng(0))
    independence = estimate_hgr_independence(scores, a, rng=np.random.default_rng(0))
    assert abs(separation.rho_hat - independence.rho_hat) <= 0.1


def test_conditionally_independent_scores_give_small_separation():
    rng = np.random.default_rng(11)
    y = rng.integers(0, 2, size=5000).astype(float)
    a = np.where(rng.random(5000) < 0.8, y, 1.0 - y)
    scores = y + 0.3 * rng.normal(size=5000)
    assert estimate_hgr_separation(scores, a, y, rng=np.random.default_rng(0)).rho_hat <= 0.1


@pytest.mark.slow
def test_estimator_calibration_on_random_binary_joints():
    rng = np.random.default_rng(12)
    checked = 0
    while checked < 20:
        joint = _random_joint(rng, 2, 2)
        if min(joint.row_marginal.min(), joint.col_marginal.min()) < 0.1:
            continue
        s, a = _sample_binary_pair(joint, 5000, rng)
        estimate = estimate_hgr_independence(s, a, steps=600, rng=np.random.default_rng(checked))
        assert abs(estimate.rho_hat - hgr_exact_discrete(joint)) <= 0.1
        checked += 1


def test_critic_document_round_trip(rng):
    critic = DualCritic.build(1, 2, conditional=True, width=8, depth=2, seed=3)
    signal, a, y = rng.normal(size=(20, 1)), np.eye(2)[rng.integers(0, 2, 20)], rng.integers(0, 2, 20)
    restored = DualCritic.from_dict(critic.to_dict())
    perm = rng.permutation(20)
    assert restored.value(signal, a, a[perm], y) == critic.value(signal, a, a[perm], y)
    with pytest.raises(InputError):
        DualCritic.from_dict({"net": critic.to_dict()["net"]})


def test_separation_critic_needs_outcome(rng):
    critic = DualCritic.build(1, 1, conditional=True, width=4, depth=1)
    with pytest.raises(InputError):
        critic.value(np.zeros((3, 1)), np.zeros((3, 1)), np.zeros((3, 1)))


def test_objective_gradients_ascend_the_dual(rng):
    critic = DualCritic.build(1, 1, width=16, depth=2, seed=0)
    a = rng.integers(0, 2, size=(400, 1)).astype(float)
    signal = a + 0.2 * rng.normal(size=(400, 1))
    perm = rng.permutation(400)
    before = critic.value(signal, a, a[perm])
    optimizer = AdamOptimizer(critic.net.parameters(), learning_rate=5e-3)
    for _ in range(50):
        _, grads, d_signal = critic.objective_and_gradients(signal, a, a[perm])
        optimizer.step(grads, ascend=True)
    assert d_signal.shape == signal.shape
    assert critic.value(signal, a, a[perm]) > before
