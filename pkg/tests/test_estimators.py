import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from uavdqn.config import desk_config
from uavdqn.dqn import DqnHyperparams
from uavdqn.estimators import DQNPolicy, ExhaustivePolicy, FixedPolicy, KMeansPolicy
from uavdqn.harness import prepare_scenario

CFG = desk_config(n_ues=10, horizon=12, episodes=2, init_grid=5,
                  hyperparams=DqnHyperparams(batch_size=5, capacity=100))


def test_get_params_and_clone():
    km = KMeansPolicy(uav_step_m=2.0, max_iters=7, random_state=3)
    assert km.get_params() == {"uav_step_m": 2.0, "max_iters": 7, "random_state": 3}
    assert clone(km).get_params() == km.get_params()
    dqn = DQNPolicy(config=CFG)
    assert clone(dqn).get_params()["config"] == CFG


def test_baseline_predict_shapes():
    scenario = prepare_scenario(CFG)
    state = scenario.state(0, scenario.initial_uavs)
    assert FixedPolicy().fit().predict(state).tolist() == [4, 4]
    assert ExhaustivePolicy().fit().predict(state).shape == (2,)
    assert KMeansPolicy().fit().predict(state).shape == (2,)


def test_predict_requires_world_state():
    with pytest.raises(TypeError):
        FixedPolicy().fit().predict(np.zeros((3, 2)))


def test_unfitted_policies_raise():
    scenario = prepare_scenario(CFG)
    state = scenario.state(0, scenario.initial_uavs)
    with pytest.raises(NotFittedError):
        DQNPolicy(config=CFG).predict(state)
    with pytest.raises(NotFittedError):
        KMeansPolicy().predict(state)


def test_dqn_policy_fit_predict_evaluate():
    policy = DQNPolicy(config=CFG).fit()
    scenario = policy.scenario_
    actions = policy.predict(scenario.state(0, scenario.initial_uavs))
    assert actions.shape == (2,) and set(actions.tolist()) <= set(range(5))
    record = policy.evaluate()
    assert record.sum_rate.shape == (1, CFG.horizon)
    assert policy.record_.sum_rate.shape == (CFG.episodes, CFG.horizon)
