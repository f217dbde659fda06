"""UAV movement policies: trained DQN, fixed, K-Means tracking, one-step exhaustive.

Every policy maps a :class:`~uavdqn.world.WorldState` to one action index
per UAV; ``ACTIONS[a] * uav_step_m`` is the displacement.
"""
from __future__ import annotations

import itertools
import logging
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import EnvParams
from .dqn import QNetwork, forward
from .errors import ConfigurationError
from .mobility import MOVES
from .world import WorldState, nearest_sum_rate

logger = logging.getLogger(__name__)

ACTIONS = MOVES
STAY = 4


class PolicyKind(str, Enum):
    DQN = "dqn"
    EXHAUSTIVE = "exhaustive"
    KMEANS = "kmeans"
    FIXED = "fixed"


# Report order for summaries and plots.
POLICY_ORDER = (PolicyKind.DQN, PolicyKind.EXHAUSTIVE, PolicyKind.KMEANS, PolicyKind.FIXED)


class DegenerateInputError(ValueError):
    pass


def move(position, action: int, step_m: float, area):
    """Apply one action; an axis that would leave the area contributes 0."""
    target = np.asarray(position, dtype=float) + ACTIONS[action] * step_m
    out = target.copy()
    for axis, limit in enumerate(area):
        if not 0.0 <= target[axis] <= limit:
            logger.debug("clamped action %d at %s on axis %d", action, position, axis)
            out[axis] = position[axis]
    return out


def move_all(positions, actions, step_m: float, area):
    """Vectorised :func:`move` for ``positions (..., n, 2)`` and ``actions (..., n)``."""
    target = positions + ACTIONS[actions] * step_m
    limits = np.asarray(area, dtype=float)
    inside = (target >= 0.0) & (target <= limits)
    return np.where(inside, target, positions)


def normalize(positions, area):
    return np.asarray(positions, dtype=float) / np.asarray(area, dtype=float)


def dqn_actions(state: WorldState, nets) -> np.ndarray:
    if nets is None or len(nets) != state.n_uavs:
        raise ConfigurationError(
            f"dqn policy needs one network per UAV ({state.n_uavs}), got "
            f"{None if nets is None else len(nets)}")
    s = normalize(state.uav_positions, state.area)
    # Greedy with lowest-index ties, i.e. select_action at epsilon = 0.
    return np.array([int(np.argmax(forward(net, s[j]))) for j, net in enumerate(nets)])


def exhaustive_actions(state: WorldState, env: EnvParams, step_m: float = 1.0) -> np.ndarray:
    """Best joint action tuple over all 5**n_uavs combinations.

    Candidates are scored by deterministic sum rate after re-association;
    ties go to the lexicographically first tuple.
    """
    n = state.n_uavs
    tuples = np.array(list(itertools.product(range(len(ACTIONS)), repeat=n)), dtype=np.intp)
    candidates = move_all(state.uav_positions[None], tuples, step_m, state.area)
    scores = nearest_sum_rate(state.ue_positions, candidates, state.gbs_positions,
                              state.altitude_h, env)
    return tuples[int(np.argmax(scores))]


def within_cluster_ss(points, centroids) -> float:
    d2 = ((points[:, None, :] - centroids[None]) ** 2).sum(-1)
    return float(d2.min(axis=1).sum())


def kmeans_centroids(ue_positions, k: int, rng, max_iters: int = 100) -> np.ndarray:
    """Lloyd iterations from ``k`` distinct UEs drawn at random.

    An empty cluster is re-seeded at the point farthest from its centroid.
    """
    points = np.asarray(ue_positions, dtype=float)
    if k < 1 or len(points) == 0:
        raise DegenerateInputError("need k >= 1 and at least one point")
    distinct = np.unique(points, axis=0)
    if k > len(distinct):
        raise DegenerateInputError(f"k={k} exceeds {len(distinct)} distinct positions")
    centroids = distinct[np.sort(rng.choice(len(distinct), size=k, replace=False))].copy()
    labels = None
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centroids[None]) ** 2).sum(-1)
        new_labels = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(len(points)), labels]))
                centroids[c] = points[far]
                labels[far] = c
    return centroids


def assign_to_centroids(uav_positions, centroids) -> np.ndarray:
    """Centroid index for each UAV minimising the total UAV-centroid distance."""
    cost = np.linalg.norm(uav_positions[:, None, :] - centroids[None], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(len(uav_positions), dtype=np.intp)
    out[rows] = cols
    return out


def toward(position, target, step_m: float, area) -> int:
    """Legal action leaving ``position`` closest to ``target`` (lowest index on ties)."""
    best, best_d = STAY, np.inf
    for a in range(len(ACTIONS)):
        d = np.linalg.norm(move(position, a, step_m, area) - target)
        if d < best_d - 1e-12:
            best, best_d = a, d
    return best


def kmeans_actions(state: WorldState, rng, step_m: float = 1.0, max_iters: int = 100):
    centroids = kmeans_centroids(state.ue_positions, state.n_uavs, rng, max_iters)
    assignment = assign_to_centroids(state.uav_positions, centroids)
    return np.array([toward(p, centroids[assignment[j]], step_m, state.area)
                     for j, p in enumerate(state.uav_positions)])


def policy_step(kind, state: WorldState, nets=None, env: EnvParams | None = None,
                rng=None, step_m: float = 1.0) -> np.ndarray:
    """One action index per UAV for the given policy."""
    kind = PolicyKind(kind)
    if (nets is not None) != (kind is PolicyKind.DQN):
        raise ConfigurationError("networks are required for, and only for, the dqn policy")
    if kind is PolicyKind.FIXED:
        return np.full(state.n_uavs, STAY)
    if kind is PolicyKind.DQN:
        return dqn_actions(state, nets)
    if kind is PolicyKind.KMEANS:
        if rng is None:
            raise ConfigurationError("kmeans policy needs an rng")
        return kmeans_actions(state, rng, step_m)
    return exhaustive_actions(state, env or EnvParams(), step_m)


def check_nets(nets, n_uavs):
    if len(nets) != n_uavs or not all(isinstance(n, QNetwork) for n in nets):
        raise ConfigurationError(f"expected {n_uavs} Q-networks, got {len(nets)}")
    return list(nets)
