"""Per-agent deep Q-network: 2-10-5 MLP, replay memory and target network.

The network is small enough that a hand-written numpy forward/backward
pass is both the fastest and the most transparent option.
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, TrainingError

LAYER_SIZES = (2, 10, 5)
N_ACTIONS = LAYER_SIZES[-1]
REWARDS = (1.0, -0.2, -1.0)
CHECKPOINT_MAGIC = "qnet v1 2 10 5"


@dataclass(frozen=True)
class DqnHyperparams:
    learning_rate: float = 0.01
    gamma: float = 0.9
    capacity: int = 2000
    batch_size: int = 50
    target_sync: int = 200
    epsilon: float = 0.1
    # Multiplicative per-episode decay; 1.0 keeps epsilon constant.
    epsilon_decay: float = 1.0
    epsilon_min: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not 0 <= self.gamma < 1:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if not 1 <= self.batch_size <= self.capacity:
            raise ConfigurationError("need 1 <= batch_size <= capacity")
        if self.target_sync < 1:
            raise ConfigurationError("target_sync must be >= 1")
        if not (0 <= self.epsilon <= 1 and 0 <= self.epsilon_min <= 1):
            raise ConfigurationError("epsilon must lie in [0, 1]")
        if not 0 < self.epsilon_decay <= 1:
            raise ConfigurationError("epsilon_decay must lie in (0, 1]")


@dataclass(eq=False)
class QNetwork:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    PARAM_NAMES = ("w1", "b1", "w2", "b2")

    @classmethod
    def zeros(cls) -> "QNetwork":
        n_in, n_hidden, n_out = LAYER_SIZES
        return cls(np.zeros((n_hidden, n_in)), np.zeros(n_hidden),
                   np.zeros((n_out, n_hidden)), np.zeros(n_out))

    @classmethod
    def initialize(cls, rng) -> "QNetwork":
        """Glorot-uniform weights, zero biases."""
        n_in, n_hidden, n_out = LAYER_SIZES
        lim1 = np.sqrt(6.0 / (n_in + n_hidden))
        lim2 = np.sqrt(6.0 / (n_hidden + n_out))
        return cls(rng.uniform(-lim1, lim1, (n_hidden, n_in)), np.zeros(n_hidden),
                   rng.uniform(-lim2, lim2, (n_out, n_hidden)), np.zeros(n_out))

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "QNetwork":
        return QNetwork(*(p.copy() for p in self.params()))

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True)
class Transition:
    state: tuple[float, float]
    action: int
    reward: float
    next_state: tuple[float, float]

    def __post_init__(self):
        if self.action not in range(N_ACTIONS):
            raise ValueError(f"action must be in 0..{N_ACTIONS - 1}")
        if self.reward not in REWARDS:
            raise ValueError(f"reward must be one of {REWARDS}")


def forward(net: QNetwork, state) -> np.ndarray:
    """Q-values for one state ``(2,)`` or a batch ``(n, 2)``."""
    s = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("state must be finite")
    hidden = np.maximum(s @ net.w1.T + net.b1, 0.0)
    return hidden @ net.w2.T + net.b2


def select_action(q, epsilon: float, rng) -> int:
    """Epsilon-greedy choice; greedy ties go to the lowest index."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(q))


def td_targets(batch: Batch, target_net: QNetwork, gamma: float) -> np.ndarray:
    if len(batch) == 0:
        raise ValueError("empty batch")
    q_next = forward(target_net, batch.next_states)
    return batch.rewards + gamma * q_next.max(axis=1)


def loss_and_grads(net: QNetwork, states, actions, targets):
    """Summed squared TD error on the taken actions and its exact gradients."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    actions = np.asarray(actions, dtype=np.intp)
    pre = states @ net.w1.T + net.b1
    hidden = np.maximum(pre, 0.0)
    q = hidden @ net.w2.T + net.b2
    rows = np.arange(len(actions))
    err = q[rows, actions] - targets
    loss = float(np.dot(err, err))

    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err
    g_w2 = dq.T @ hidden
    g_b2 = dq.sum(axis=0)
    dhidden = (dq @ net.w2) * (pre > 0)
    g_w1 = dhidden.T @ states
    g_b1 = dhidden.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2]


def train_step(net: QNetwork, batch: Batch, targets, learning_rate: float) -> float:
    """One plain gradient-descent step in place; returns the pre-update loss."""
    with np.errstate(invalid="ignore", over="ignore"):
        loss, grads = loss_and_grads(net, batch.states, batch.actions, targets)
    # A single non-finite entry makes the sum non-finite.
    if not (np.isfinite(loss) and all(np.isfinite(g.sum()) for g in grads)):
        raise TrainingError(
            f"non-finite loss/gradient (loss={loss}, max |param|="
            f"{max(np.abs(p).max() for p in net.params()):.3g})"
        )
    for p, g in zip(net.params(), grads):
        p -= learning_rate * g
    return loss


def sync_target(net: QNetwork) -> QNetwork:
    return net.copy()


class ReplayNotReady(LookupError):
    """Fewer transitions stored than the requested batch size."""


class ReplayBuffer:
    """Fixed-capacity FIFO transition store backed by ring arrays."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("capacity must be >= 1")
        self.capacity = capacity
        self._states = np.empty((capacity, 2))
        self._actions = np.empty(capacity, dtype=np.intp)
        self._rewards = np.empty(capacity)
        self._next = np.empty((capacity, 2))
        self._head = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, state, action, reward, next_state):
        i = self._head
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = reward
        self._next[i] = next_state
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        start = (self._head - self._size) % self.capacity
        return (start + np.arange(self._size)) % self.capacity

    def items(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        return [Transition(tuple(self._states[i]), int(self._actions[i]),
                           float(self._rewards[i]), tuple(self._next[i]))
                for i in self._order()]

    def sample(self, batch_size: int, rng) -> Batch:
        if self._size < batch_size:
            raise ReplayNotReady(f"{self._size} stored, {batch_size} requested")
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return Batch(self._states[idx], self._actions[idx], self._rewards[idx], self._next[idx])


def replay_push(buffer: ReplayBuffer, transition: Transition):
    buffer.push(transition.state, transition.action, transition.reward, transition.next_state)


def replay_sample(buffer: ReplayBuffer, batch_size: int, rng) -> Batch:
    return buffer.sample(batch_size, rng)


class DQNAgent:
    """Online net, frozen target copy, replay memory and RNG for one UAV."""

    def __init__(self, hyperparams: DqnHyperparams, rng, net: QNetwork | None = None):
        self.hp = hyperparams
        self.rng = rng
        self.net = QNetwork.initialize(rng) if net is None else net
        self.target = sync_target(self.net)
        self.buffer = ReplayBuffer(hyperparams.capacity)
        self.epsilon = hyperparams.epsilon
        self.steps = 0
        self.gradient_steps = 0
        self.syncs = 0
        self.last_loss = None

    def act(self, state, greedy=False) -> int:
        net = self.net
        q = np.maximum(net.w1 @ state + net.b1, 0.0) @ net.w2.T + net.b2
        return select_action(q, 0.0 if greedy else self.epsilon, self.rng)

    def observe(self, state, action, reward, next_state):
        """Store a transition, learn from a minibatch and sync the target on schedule."""
        self.buffer.push(state, action, reward, next_state)
        if len(self.buffer) >= self.hp.batch_size:
            batch = self.buffer.sample(self.hp.batch_size, self.rng)
            y = td_targets(batch, self.target, self.hp.gamma)
            self.last_loss = train_step(self.net, batch, y, self.hp.learning_rate)
            self.gradient_steps += 1
        self.steps += 1
        if self.steps % self.hp.target_sync == 0:
            self.target = sync_target(self.net)
            self.syncs += 1

    def end_episode(self):
        self.epsilon = max(self.hp.epsilon_min, self.epsilon * self.hp.epsilon_decay)


def format_checkpoint(net: QNetwork) -> str:
    lines = [CHECKPOINT_MAGIC]
    for p in net.params():
        for row in np.atleast_2d(p):
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_checkpoint(text: str) -> QNetwork:
    lines = text.strip("\n").split("\n")
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint: expected header {CHECKPOINT_MAGIC!r}")
    rows = [np.array([float(v) for v in ln.split()]) for ln in lines[1:]]
    n_in, n_hidden, n_out = LAYER_SIZES
    if len(rows) != n_hidden + 1 + n_out + 1:
        raise ValueError(f"checkpoint has {len(rows)} parameter rows")
    w1 = np.vstack(rows[:n_hidden])
    b1 = rows[n_hidden]
    w2 = np.vstack(rows[n_hidden + 1:n_hidden + 1 + n_out])
    b2 = rows[-1]
    if w1.shape != (n_hidden, n_in) or b1.shape != (n_hidden,) \
            or w2.shape != (n_out, n_hidden) or b2.shape != (n_out,):
        raise ValueError("checkpoint parameter shapes do not match 2-10-5")
    return QNetwork(w1, b1, w2, b2)


def save_checkpoint(net: QNetwork, path):
    """Write atomically: temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qnet-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_checkpoint(net))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> QNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_checkpoint(fh.read())
