"""Generator tests: propensity structure, scenario sorting, ground-truth checks."""
import numpy as np
import pytest
from scipy import stats

from ope_kit import (
    PolicyMatrix,
    ShapeMismatch,
    gen_example1,
    gen_example2,
    gen_toy,
    ipw,
    true_value,
)


class TestExample1:
    def test_propensity_rows_sorted_and_normalized(self):
        rng = np.random.default_rng(0)
        problem = gen_example1(50, 8, "unsorted", rng)
        p = problem.data.propensities
        assert np.all(np.diff(p, axis=1) >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-10)

    def test_increasing_scenario_perfect_rank_correlation(self):
        rng = np.random.default_rng(1)
        problem = gen_example1(30, 10, "increasing", rng)
        for row in problem.full_rewards:
            rho = stats.spearmanr(row, np.arange(10)).statistic
            assert rho == pytest.approx(1.0)

    def test_decreasing_scenario_negative_rank_correlation(self):
        rng = np.random.default_rng(2)
        problem = gen_example1(30, 10, "decreasing", rng)
        for row in problem.full_rewards:
            rho = stats.spearmanr(row, np.arange(10)).statistic
            assert rho == pytest.approx(-1.0)

    def test_unsorted_scenario_uncorrelated(self):
        rng = np.random.default_rng(3)
        problem = gen_example1(2000, 20, "unsorted", rng)
        r = np.corrcoef(
            problem.full_rewards.ravel(), problem.data.propensities.ravel()
        )[0, 1]
        assert abs(r) < 0.05

    def test_mean_true_value_near_one(self):
        values = []
        for b in range(500):
            rng = np.random.default_rng([17, b])
            values.append(gen_example1(300, 20, "unsorted", rng).true_value)
        assert np.mean(values) == pytest.approx(1.0, abs=0.01)

    def test_observed_reward_consistent_with_table(self):
        rng = np.random.default_rng(4)
        problem = gen_example1(40, 6, "increasing", rng)
        np.testing.assert_array_equal(
            problem.data.observed_reward,
            problem.full_rewards[np.arange(40), problem.data.chosen_action],
        )

    def test_bitwise_reproducible(self):
        a = gen_example1(25, 5, "decreasing", np.random.default_rng(42))
        b = gen_example1(25, 5, "decreasing", np.random.default_rng(42))
        np.testing.assert_array_equal(a.full_rewards, b.full_rewards)
        np.testing.assert_array_equal(a.data.chosen_action, b.data.chosen_action)
        assert a.true_value == b.true_value

    def test_chosen_arm_frequencies_match_propensities(self):
        counts = np.zeros(20)
        expected = np.zeros(20)
        for b in range(400):
            rng = np.random.default_rng([18, b])
            problem = gen_example1(300, 20, "unsorted", rng)
            counts += np.bincount(problem.data.chosen_action, minlength=20)
            expected += problem.data.propensities.sum(axis=0)
        assert counts.sum() >= 1e5
        result = stats.chisquare(counts, f_exp=expected)
        assert result.pvalue > 0.001


class TestExample2:
    def test_zero_beta_gives_zero_predictions(self):
        rng = np.random.default_rng(5)
        _, preds = gen_example2(20, 5, "unsorted", 0.0, rng)
        np.testing.assert_array_equal(preds.mu_hat, 0.0)

    def test_joint_sort_preserves_pairing(self):
        rng = np.random.default_rng(6)
        problem, preds = gen_example2(40, 8, "decreasing", 1.0, rng)
        residual = problem.full_rewards - preds.mu_hat
        assert np.all(np.diff(residual, axis=1) <= 1e-12)
        assert np.all(residual >= 0)

    def test_increasing_sort_key_is_residual_component(self):
        rng = np.random.default_rng(7)
        problem, preds = gen_example2(40, 8, "increasing", 1.0, rng)
        residual = problem.full_rewards - preds.mu_hat
        assert np.all(np.diff(residual, axis=1) >= -1e-12)

    def test_mean_true_value_near_three(self):
        values = []
        for b in range(500):
            rng = np.random.default_rng([19, b])
            values.append(gen_example2(300, 20, "unsorted", 1.0, rng)[0].true_value)
        assert np.mean(values) == pytest.approx(3.0, abs=0.05)

    def test_beta_scales_predictions(self):
        full = gen_example2(20, 5, "unsorted", 1.0, np.random.default_rng(8))[1]
        half = gen_example2(20, 5, "unsorted", 0.5, np.random.default_rng(8))[1]
        np.testing.assert_allclose(half.mu_hat, 0.5 * full.mu_hat, atol=1e-12)

    def test_rejects_bad_beta(self):
        with pytest.raises(ValueError):
            gen_example2(10, 4, "unsorted", 1.5, np.random.default_rng(9))


class TestToy:
    def test_w_zero_gives_uniform_policy(self):
        rng = np.random.default_rng(10)
        problem = gen_toy(30, 5, w=0.0, mu=1.0, sigma=0.5, rng=rng)
        np.testing.assert_allclose(problem.policy.probs, 0.2, atol=1e-12)

    def test_w_one_policy_equals_logging_so_ipw_is_mean_reward(self):
        rng = np.random.default_rng(11)
        problem = gen_toy(40, 5, w=1.0, mu=1.0, sigma=0.5, rng=rng)
        est = ipw(problem.data, problem.policy)
        assert est.value == pytest.approx(
            float(np.mean(problem.data.observed_reward)), abs=1e-12
        )

    def test_least_squares_line_recovers_linear_structure(self):
        """Pooled regression of pi*r on the chosen propensity recovers the
        intercept (1-w)*mu/K and slope w*mu."""
        xs, ys = [], []
        for b in range(400):
            rng = np.random.default_rng([20, b])
            problem = gen_toy(50, 4, w=0.5, mu=2.0, sigma=1.0, rng=rng)
            idx = np.arange(problem.data.n)
            pi_chosen = problem.policy.probs[idx, problem.data.chosen_action]
            xs.append(problem.data.chosen_propensity)
            ys.append(pi_chosen * problem.data.observed_reward)
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        slope, intercept, *_ = stats.linregress(x, y)
        n = x.size
        resid = y - (intercept + slope * x)
        s2 = np.sum(resid**2) / (n - 2)
        sxx = np.sum((x - x.mean()) ** 2)
        se_slope = np.sqrt(s2 / sxx)
        se_intercept = np.sqrt(s2 * (1.0 / n + x.mean() ** 2 / sxx))
        assert abs(intercept - 0.25) < 3 * se_intercept
        assert abs(slope - 1.0) < 3 * se_slope

    def test_rejects_bad_w(self):
        with pytest.raises(ValueError):
            gen_toy(10, 4, w=1.5, mu=1.0, sigma=0.5, rng=np.random.default_rng(12))


class TestTrueValue:
    def test_uniform_policy_is_grand_mean(self):
        rng = np.random.default_rng(13)
        problem = gen_example1(25, 6, "unsorted", rng)
        assert true_value(problem, PolicyMatrix.uniform(25, 6)) == pytest.approx(
            float(problem.full_rewards.mean()), abs=1e-12
        )

    def test_one_hot_policy_is_column_mean(self):
        rng = np.random.default_rng(14)
        problem = gen_example1(25, 6, "unsorted", rng)
        policy = PolicyMatrix.one_hot(np.zeros(25, dtype=int), 6)
        assert true_value(problem, policy) == pytest.approx(
            float(problem.full_rewards[:, 0].mean()), abs=1e-12
        )

    def test_hand_instance(self):
        rng = np.random.default_rng(15)
        problem = gen_example1(3, 2, "unsorted", rng)
        rewards = problem.full_rewards
        policy = PolicyMatrix([[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]])
        by_hand = (
            0.2 * rewards[0, 0] + 0.8 * rewards[0, 1]
            + 0.6 * rewards[1, 0] + 0.4 * rewards[1, 1]
            + 0.5 * rewards[2, 0] + 0.5 * rewards[2, 1]
        ) / 3.0
        assert true_value(problem, policy) == pytest.approx(by_hand, abs=1e-12)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(16)
        problem = gen_example1(10, 4, "unsorted", rng)
        with pytest.raises(ShapeMismatch):
            true_value(problem, PolicyMatrix.uniform(10, 5))

    def test_ipw_unbiased_on_known_truth(self):
        """IPW with true propensities is exactly unbiased; its Monte Carlo
        mean stays within three standard errors of the mean realized value."""
        n_iter = 2000
        errs = np.empty(n_iter)
        for b in range(n_iter):
            rng = np.random.default_rng([21, b])
            problem = gen_example1(300, 20, "unsorted", rng)
            errs[b] = ipw(problem.data, problem.policy).value - problem.true_value
        se = errs.std(ddof=1) / np.sqrt(n_iter)
        assert abs(errs.mean()) < 3 * se
