"""scikit-learn style wrappers around the movement policies.

Each policy is a ``BaseEstimator`` (so ``get_params``/``set_params``/``clone``
work) with ``fit`` and ``predict``. ``predict`` takes a
:class:`~uavdqn.world.WorldState` and returns one action index per UAV.

    >>> from uavdqn.config import desk_config
    >>> policy = DQNPolicy(config=desk_config(episodes=50)).fit()
    >>> actions = policy.predict(policy.scenario_.state(0, policy.scenario_.initial_uavs))
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .channel import EnvParams
from .config import RunConfig, desk_config
from .harness import Scenario, evaluate, prepare_scenario, train
from .policies import PolicyKind, kmeans_actions, policy_step
from .world import WorldState


def _check_state(X) -> WorldState:
    if not isinstance(X, WorldState):
        raise TypeError(f"expected a WorldState, got {type(X).__name__}")
    return X


class _MovementPolicy(BaseEstimator):
    kind: PolicyKind

    def fit(self, X=None, y=None):
        """Baselines need no training; ``X`` is accepted for pipeline compatibility."""
        self.n_features_in_ = 2
        return self

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, config: RunConfig, scenario: Scenario | None = None):
        """Run one frozen episode; returns the :class:`~uavdqn.harness.RunRecord`."""
        return evaluate(config, self.kind, None, scenario)


class FixedPolicy(_MovementPolicy):
    kind = PolicyKind.FIXED

    def predict(self, X):
        return policy_step(self.kind, _check_state(X))


class KMeansPolicy(_MovementPolicy):
    kind = PolicyKind.KMEANS

    def __init__(self, uav_step_m=1.0, max_iters=100, random_state=0):
        self.uav_step_m = uav_step_m
        self.max_iters = max_iters
        self.random_state = random_state

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.rng_ = np.random.default_rng(self.random_state)
        return self

    def predict(self, X):
        check_is_fitted(self, "rng_")
        return kmeans_actions(_check_state(X), self.rng_, self.uav_step_m, self.max_iters)


class ExhaustivePolicy(_MovementPolicy):
    kind = PolicyKind.EXHAUSTIVE

    def __init__(self, env=None, uav_step_m=1.0):
        self.env = env
        self.uav_step_m = uav_step_m

    def predict(self, X):
        return policy_step(self.kind, _check_state(X), env=self.env or EnvParams(),
                           step_m=self.uav_step_m)


class DQNPolicy(_MovementPolicy):
    """Per-UAV deep Q-network movement policy.

    ``fit`` runs the full training loop for ``config`` (desk preset when
    ``None``); ``X`` may be a prepared :class:`~uavdqn.harness.Scenario`.
    """

    kind = PolicyKind.DQN

    def __init__(self, config=None, networks=None):
        self.config = config
        self.networks = networks

    def fit(self, X=None, y=None):
        cfg = self.config or desk_config()
        scenario = X if isinstance(X, Scenario) else prepare_scenario(cfg)
        self.networks_, self.record_ = train(cfg, scenario, nets=self.networks)
        self.scenario_ = scenario
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "networks_")
        return policy_step(self.kind, _check_state(X), self.networks_)

    def evaluate(self, config: RunConfig | None = None, scenario: Scenario | None = None):
        check_is_fitted(self, "networks_")
        cfg = config or self.config or desk_config()
        return evaluate(cfg, self.kind, self.networks_, scenario or self.scenario_)


POLICIES = {
    PolicyKind.DQN: DQNPolicy,
    PolicyKind.EXHAUSTIVE: ExhaustivePolicy,
    PolicyKind.KMEANS: KMeansPolicy,
    PolicyKind.FIXED: FixedPolicy,
}
