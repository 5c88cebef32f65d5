# tests/test_sequential.py
from dataclasses import replace

import numpy as np
import pytest

from shared.errors import ConfigError, InputError
from shared.model import (
    Dataset,
    DirichletBelief,
    DiscreteSpace,
    random_model,
    sample_dataset,
    update_many,
)
from shared.policy import TrainConfig, UtilityTable
from experiments.harness import ExperimentConfig, build_scenario, repetition_seeds, \
    run_static_experiment
from sequential.simulator import SequentialConfig, run_sequential, training_seed

U = UtilityTable.indicator(2, 2)
FAST = TrainConfig(steps=20, learning_rate=0.5, k_samples=4)


@pytest.fixture
def world(space422, rng):
    theta = random_model(space422, rng)
    return theta, sample_dataset(theta, 40, rng)


def run(world, **overrides):
    theta, stream = world
    cfg = SequentialConfig(stream=stream, belief=DirichletBelief.symmetric(theta.space),
                           train=FAST, **overrides)
    return run_sequential(cfg, theta, U, 0.5, rng_seed=3)


class TestCensoring:
    def test_always_accept_sees_everything(self, world):
        theta, stream = world
        result = run(world, forced_action=1, method="marginal")
        expected = update_many(DirichletBelief.symmetric(theta.space), stream)
        np.testing.assert_array_equal(result.belief.alpha_y_given_xz, expected.alpha_y_given_xz)
        assert result.steps[-1].belief_updates == len(stream)

    def test_always_reject_learns_nothing(self, world):
        theta, _ = world
        result = run(world, forced_action=0, method="marginal")
        prior = DirichletBelief.symmetric(theta.space)
        np.testing.assert_array_equal(result.belief.alpha_z, prior.alpha_z)
        assert result.steps[-1].belief_updates == 0
        assert len({(c.utility, c.fairness) for c in result.curves}) == 1

    def test_updates_follow_positive_actions(self, world):
        result = run(world, method="marginal")
        accepted = sum(step.action == 1 for step in result.steps)
        assert result.steps[-1].belief_updates == accepted
        assert all(step.observed == (step.action == 1) for step in result.steps)

    def test_no_censoring_updates_every_step(self, world):
        result = run(world, censoring=False, method="marginal")
        assert [s.belief_updates for s in result.steps] == list(range(1, 41))


class TestRun:
    def test_checkpoints(self, world):
        result = run(world, retrain_every=10, method="marginal")
        assert [c.t for c in result.curves] == [0, 10, 20, 30, 40]
        assert all(c.phase == "sequential" for c in result.curves)

    def test_deterministic(self, world):
        first = run(world, method="bayes")
        second = run(world, method="bayes")
        assert [s.to_dict() for s in first.steps] == [s.to_dict() for s in second.steps]
        assert [c.value for c in first.curves] == [c.value for c in second.curves]
        np.testing.assert_array_equal(first.policy.params, second.policy.params)

    def test_empty_stream(self, space422):
        cfg = SequentialConfig(stream=Dataset(space422),
                               belief=DirichletBelief.symmetric(space422), train=FAST)
        with pytest.raises(InputError):
            run_sequential(cfg, random_model(space422, 0), U, 0.5)

    def test_invalid_config(self, world):
        theta, stream = world
        belief = DirichletBelief.symmetric(theta.space)
        with pytest.raises(ConfigError):
            SequentialConfig(stream=stream, belief=belief, retrain_every=0)
        with pytest.raises(ConfigError):
            SequentialConfig(stream=stream, belief=belief, forced_action=2)
        with pytest.raises(ConfigError):
            SequentialConfig(stream=stream, belief=DirichletBelief.symmetric(
                DiscreteSpace(2, 2, 2, 2)))

    def test_training_seed_depends_on_method(self):
        assert training_seed(5, 10, "bayes") != training_seed(5, 10, "marginal")
        assert training_seed(5, 10, "bayes") == training_seed(5, 10, "bayes")


@pytest.mark.parametrize("method", ["bayes", "marginal"])
def test_uncensored_matches_static(method):
    cfg = ExperimentConfig(
        space=DiscreteSpace(4, 2, 2, 2),
        lambdas=(0.5,),
        checkpoints=(10, 20, 30),
        train=FAST,
        methods=(method,),
        seed=7,
    )
    static = {r.t: r for r in run_static_experiment(cfg, max_workers=1)}

    rep_seed = repetition_seeds(cfg)[0]
    scenario = build_scenario(cfg, rep_seed)
    seq = SequentialConfig(stream=scenario.stream, belief=scenario.prior, train=cfg.train,
                           retrain_every=10, censoring=False, method=method, warm_start=False)
    result = run_sequential(seq, scenario.theta_eval, cfg.utility_table, 0.5, rep_seed)

    for record in result.curves[1:]:
        expected = static[record.t]
        assert (record.utility, record.fairness, record.value) == \
            (expected.utility, expected.fairness, expected.value)


def test_warm_start_changes_trajectory(world):
    cold = run(world, censoring=False, method="marginal", warm_start=False)
    warm = run(world, censoring=False, method="marginal", warm_start=True)
    assert cold.curves[0].value == warm.curves[0].value
    assert not np.array_equal(cold.policy.params, warm.policy.params)


def test_explicit_initial_policy(world):
    theta, _ = world
    start = replace(FAST, steps=0)
    result = run_sequential(
        SequentialConfig(stream=world[1], belief=DirichletBelief.symmetric(theta.space),
                         train=start, forced_action=0),
        theta, U, 0.5)
    np.testing.assert_allclose(result.policy.table, 0.5)
