# tests/test_policy.py
import numpy as np
import pytest

import oracles
from conftest import random_policy
from shared.errors import ConfigError, InputError
from shared.fairness import balance_deviation, marginal_balance
from shared.model import (
    DirichletBelief,
    DiscreteSpace,
    FiniteSupportBelief,
    ModelParams,
    random_model,
)
from shared.policy import (
    Parameterization,
    Policy,
    TrainConfig,
    UtilityTable,
    ascent_step,
    bayes_optimal_rule,
    expected_utility,
    finite_difference_gradient,
    gradient,
    objective_value,
    posterior_expected_objective,
    train,
    train_bayes,
    train_marginal,
)
from shared.simplex import project_simplex


def deterministic_outcome_model(space, labels):
    """y = labels[x] with certainty."""
    p_y = np.zeros((space.n_x, space.n_z, space.n_y))
    for x, y in enumerate(labels):
        p_y[x, :, y] = 1.0
    return ModelParams(space=space,
                       p_z=np.full(space.n_z, 1.0 / space.n_z),
                       p_x_given_z=np.full((space.n_z, space.n_x), 1.0 / space.n_x),
                       p_y_given_xz=p_y)


class TestPolicy:
    def test_softmax_rows(self, rng):
        pi = random_policy(DiscreteSpace(6, 2, 2, 3), rng)
        np.testing.assert_allclose(pi.table.sum(axis=1), 1.0, atol=1e-12)

    def test_simplex_rows_validated(self, space222):
        with pytest.raises(InputError):
            Policy(space222, [[0.5, 0.6], [0.5, 0.5]], Parameterization.SIMPLEX)

    def test_shape_validated(self, space222):
        with pytest.raises(InputError):
            Policy(space222, np.zeros((3, 2)))

    def test_dict_round_trip(self, space422, rng):
        pi = random_policy(space422, rng, Parameterization.SIMPLEX)
        restored = Policy.from_dict(pi.to_dict())
        assert restored.parameterization == Parameterization.SIMPLEX
        np.testing.assert_array_equal(restored.table, pi.table)


class TestSimplexProjection:
    def test_feasible_rows_unchanged(self, rng):
        rows = rng.dirichlet(np.ones(4), size=5)
        np.testing.assert_allclose(project_simplex(rows), rows, atol=1e-12)

    def test_known_projection(self):
        np.testing.assert_allclose(project_simplex([2.0, 0.0]), [1.0, 0.0])
        shift = 0.4 / 3
        np.testing.assert_allclose(project_simplex([0.3, 0.3, 0.0]),
                                   [0.3 + shift, 0.3 + shift, shift])

    def test_output_on_simplex(self, rng):
        out = project_simplex(rng.normal(scale=3.0, size=(20, 5)))
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-14)

    def test_rejects_higher_rank(self):
        with pytest.raises(InputError):
            project_simplex(np.zeros((2, 2, 2)))


class TestExpectedUtility:
    def test_constant_utility(self, theta422, rng):
        u = UtilityTable(np.full((2, 2), 0.7))
        assert expected_utility(random_policy(theta422.space, rng), theta422, u) == pytest.approx(0.7)

    def test_matching_rule(self, space422):
        labels = [0, 1, 1, 0]
        theta = deterministic_outcome_model(space422, labels)
        pi = Policy.deterministic(space422, labels)
        assert expected_utility(pi, theta, UtilityTable.indicator(2, 2)) == pytest.approx(1.0)

    def test_matches_enumeration(self, rng):
        space = DiscreteSpace(5, 3, 2, 3)
        u = UtilityTable(rng.normal(size=(3, 3)))
        for _ in range(10):
            theta = random_model(space, rng)
            pi = random_policy(space, rng)
            assert expected_utility(pi, theta, u) == pytest.approx(
                oracles.utility(pi.table, theta, u.u), abs=1e-12)


class TestBayesOptimalRule:
    def test_recovers_labels(self, space422):
        labels = [1, 0, 1, 1]
        belief = FiniteSupportBelief.point_mass(deterministic_outcome_model(space422, labels))
        rule = bayes_optimal_rule(belief, UtilityTable.indicator(2, 2))
        np.testing.assert_array_equal(rule.table.argmax(axis=1), labels)

    def test_ties_go_to_first_action(self, space422):
        rule = bayes_optimal_rule(DirichletBelief.symmetric(space422),
                                  UtilityTable.indicator(2, 2))
        np.testing.assert_array_equal(rule.table[:, 0], 1.0)

    def test_beats_every_deterministic_rule(self, space422, rng):
        belief = FiniteSupportBelief.uniform([random_model(space422, rng) for _ in range(3)])
        u = UtilityTable.indicator(2, 2)
        best = posterior_expected_objective(bayes_optimal_rule(belief, u), belief, u, 0.0)
        for code in range(2 ** 4):
            actions = [(code >> i) & 1 for i in range(4)]
            value = posterior_expected_objective(Policy.deterministic(space422, actions),
                                                 belief, u, 0.0)
            assert value <= best + 1e-12


class TestObjective:
    def test_lambda_zero_is_utility(self, theta422, rng):
        u = UtilityTable.indicator(2, 2)
        pi = random_policy(theta422.space, rng)
        assert objective_value(pi, theta422, u, 0.0) == expected_utility(pi, theta422, u)

    def test_lambda_one_trivial_policy(self, theta422):
        pi = Policy.trivial(theta422.space, [0.2, 0.8])
        assert abs(objective_value(pi, theta422, UtilityTable.indicator(2, 2), 1.0)) <= 1e-12

    def test_composition(self, theta422, rng):
        u = UtilityTable.indicator(2, 2)
        pi = random_policy(theta422.space, rng)
        expected = (0.7 * expected_utility(pi, theta422, u)
                    - 0.3 * balance_deviation(pi, theta422, 2).aggregate_p)
        assert objective_value(pi, theta422, u, 0.3) == pytest.approx(expected, abs=1e-14)

    def test_lambda_out_of_range(self, theta422):
        with pytest.raises(InputError):
            objective_value(Policy.uniform(theta422.space), theta422,
                            UtilityTable.indicator(2, 2), 1.5)


class TestGradient:
    @pytest.mark.parametrize("parameterization", list(Parameterization))
    def test_matches_finite_differences(self, parameterization, rng):
        for i in range(50):
            space = DiscreteSpace(n_x=int(rng.integers(2, 9)), n_y=2, n_z=2, n_a=2)
            theta = random_model(space, rng)
            u = UtilityTable(rng.normal(size=(2, 2)))
            lam = [0.0, 0.25, 0.5, 0.75, 1.0][i % 5]
            pi = random_policy(space, rng, parameterization)
            analytic = gradient(pi, theta, u, lam)
            numeric = finite_difference_gradient(pi, theta, u, lam)
            scale = max(np.linalg.norm(numeric), 1e-8)
            assert np.linalg.norm(analytic - numeric) <= 1e-4 * scale + 1e-9

    def test_fairness_gradient_vanishes_at_trivial_policy(self, theta422):
        u = UtilityTable.indicator(2, 2)
        logits = Policy(theta422.space, np.tile([0.3, -0.4], (4, 1)))
        np.testing.assert_allclose(gradient(logits, theta422, u, 1.0), 0.0, atol=1e-12)
        simplex = Policy.trivial(theta422.space, [0.6, 0.4])
        np.testing.assert_allclose(gradient(simplex, theta422, u, 1.0), 0.0, atol=1e-12)

    def test_constant_utility_has_no_logit_gradient(self, theta422, rng):
        u = UtilityTable(np.full((2, 2), 3.0))
        g = gradient(random_policy(theta422.space, rng), theta422, u, 0.0)
        np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_linear_objective_is_exact(self, theta422, rng):
        u = UtilityTable(rng.normal(size=(2, 2)))
        pi = random_policy(theta422.space, rng, Parameterization.SIMPLEX)
        np.testing.assert_allclose(gradient(pi, theta422, u, 0.0),
                                   finite_difference_gradient(pi, theta422, u, 0.0), atol=1e-9)

    def test_step_size_convergence(self, theta422, rng):
        u = UtilityTable.indicator(2, 2)
        pi = random_policy(theta422.space, rng)
        coarse = finite_difference_gradient(pi, theta422, u, 0.5, h=1e-4)
        fine = finite_difference_gradient(pi, theta422, u, 0.5, h=5e-5)
        np.testing.assert_allclose(coarse, fine, atol=1e-7)

    def test_ascent_step_does_not_decrease(self, theta422, rng):
        u = UtilityTable.indicator(2, 2)
        for lam in (0.0, 0.5, 1.0):
            pi = random_policy(theta422.space, rng)
            before = objective_value(pi, theta422, u, lam)
            g = gradient(pi, theta422, u, lam)
            lr = 1e-2
            after = objective_value(ascent_step(pi, g, lr), theta422, u, lam)
            while after < before - 1e-12 and lr > 1e-8:
                lr /= 2
                after = objective_value(ascent_step(pi, g, lr), theta422, u, lam)
            assert after >= before - 1e-12
            small = objective_value(ascent_step(pi, g, 1e-4), theta422, u, lam)
            assert small >= before - 1e-12


class TestTrainConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ConfigError):
            TrainConfig(lam=1.2)
        with pytest.raises(ConfigError):
            TrainConfig(steps=-1)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(p=1)

    def test_dict_uses_lambda_key(self):
        cfg = TrainConfig(lam=0.25, steps=10)
        assert cfg.to_dict()["lambda"] == 0.25
        assert TrainConfig.from_dict(cfg.to_dict()).lam == 0.25

    def test_overrides_skip_none(self):
        cfg = TrainConfig(steps=10).with_overrides(steps=None, learning_rate=0.5)
        assert cfg.steps == 10 and cfg.learning_rate == 0.5


class TestTrainers:
    u = UtilityTable.indicator(2, 2)

    def test_zero_steps_returns_start(self, space222, rng):
        belief = DirichletBelief.symmetric(space222)
        start = random_policy(space222, rng)
        assert train_bayes(belief, self.u, TrainConfig(steps=0, warm_start=start)) is start
        assert train_marginal(belief, self.u, TrainConfig(steps=0, warm_start=start)) is start
        uniform = train_bayes(belief, self.u, TrainConfig(steps=0))
        np.testing.assert_allclose(uniform.table, 0.5)

    def test_lambda_one_reaches_balance(self, space222, rng):
        belief = FiniteSupportBelief.point_mass(random_model(space222, rng))
        pi = train_bayes(belief, self.u, TrainConfig(lam=1.0, steps=200))
        assert balance_deviation(pi, belief.models[0], 1).aggregate_p <= 1e-3

    def test_lambda_zero_reaches_optimum(self, space222, rng):
        theta = random_model(space222, rng)
        belief = FiniteSupportBelief.point_mass(theta)
        pi = train_bayes(belief, self.u, TrainConfig(lam=0.0, steps=2000, learning_rate=50.0))
        best = expected_utility(bayes_optimal_rule(belief, self.u), theta, self.u)
        assert expected_utility(pi, theta, self.u) >= best - 1e-3

    def test_simplex_training_stays_feasible(self, space422, rng):
        belief = FiniteSupportBelief.point_mass(random_model(space422, rng))
        cfg = TrainConfig(lam=0.5, steps=300, learning_rate=1.0,
                          parameterization=Parameterization.SIMPLEX)
        pi = train_bayes(belief, self.u, cfg)
        assert np.all(pi.table >= 0)
        np.testing.assert_allclose(pi.table.sum(axis=1), 1.0, atol=1e-12)

    def test_bayes_is_deterministic(self, space422):
        belief = DirichletBelief.symmetric(space422)
        cfg = TrainConfig(lam=0.5, steps=30, k_samples=4, seed=12, learning_rate=0.5)
        a = train_bayes(belief, self.u, cfg)
        b = train_bayes(belief, self.u, cfg)
        np.testing.assert_array_equal(a.params, b.params)
        np.testing.assert_allclose(a.table.sum(axis=1), 1.0, atol=1e-12)

    def test_point_mass_same_for_both_methods(self, space422, rng):
        belief = FiniteSupportBelief.point_mass(random_model(space422, rng))
        cfg = TrainConfig(lam=0.5, steps=100, learning_rate=0.5)
        np.testing.assert_array_equal(train("bayes", belief, self.u, cfg).params,
                                      train("marginal", belief, self.u, cfg).params)

    def test_marginal_lambda_one_is_balanced(self, space422):
        belief = DirichletBelief.symmetric(space422)
        pi = train_marginal(belief, self.u, TrainConfig(lam=1.0, steps=200))
        assert marginal_balance(pi, belief, 1) <= 1e-3

    def test_bayes_improves_posterior_objective(self, space422, rng):
        belief = FiniteSupportBelief.uniform([random_model(space422, rng) for _ in range(3)])
        start = Policy.uniform(space422)
        pi = train_bayes(belief, self.u, TrainConfig(lam=0.5, steps=300, learning_rate=1.0))
        assert (posterior_expected_objective(pi, belief, self.u, 0.5)
                >= posterior_expected_objective(start, belief, self.u, 0.5))

    def test_unknown_method(self, space222):
        with pytest.raises(ConfigError):
            train("oracle", DirichletBelief.symmetric(space222), self.u, TrainConfig(steps=1))

    def test_warm_start_space_checked(self, space222, space422):
        cfg = TrainConfig(steps=1, warm_start=Policy.uniform(space222))
        with pytest.raises(ConfigError):
            train_marginal(DirichletBelief.symmetric(space422), self.u, cfg)
