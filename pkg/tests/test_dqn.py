import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavdqn.dqn import (
    CHECKPOINT_MAGIC,
    Batch,
    DqnHyperparams,
    DQNAgent,
    QNetwork,
    ReplayBuffer,
    ReplayNotReady,
    Transition,
    format_checkpoint,
    forward,
    load_checkpoint,
    loss_and_grads,
    parse_checkpoint,
    replay_push,
    replay_sample,
    save_checkpoint,
    select_action,
    sync_target,
    td_targets,
    train_step,
)
from uavdqn.errors import ConfigurationError, TrainingError


def random_net(seed):
    rng = np.random.default_rng(seed)
    return QNetwork(rng.normal(size=(10, 2)), rng.normal(size=10),
                    rng.normal(size=(5, 10)), rng.normal(size=5))


def random_batch(seed, n=8):
    rng = np.random.default_rng(seed)
    return Batch(rng.uniform(size=(n, 2)), rng.integers(0, 5, n),
                 rng.choice([1.0, -0.2, -1.0], n), rng.uniform(size=(n, 2)))


def oracle_forward(net, s):
    """Explicit loops over neurons."""
    hidden = []
    for i in range(10):
        z = net.b1[i] + sum(net.w1[i, k] * s[k] for k in range(2))
        hidden.append(z if z > 0 else 0.0)
    return [net.b2[o] + sum(net.w2[o, i] * hidden[i] for i in range(10)) for o in range(5)]


def test_forward_zero_net():
    assert forward(QNetwork.zeros(), [0.3, 0.7]).tolist() == [0.0] * 5


def test_forward_bias_passthrough():
    net = QNetwork.zeros()
    net.b2[:] = [1, 2, 3, 4, 5]
    for s in ([0, 0], [0.5, 0.2], [1, 1]):
        assert forward(net, s).tolist() == [1, 2, 3, 4, 5]


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(0)
    for seed in range(20):
        net = random_net(seed)
        s = rng.uniform(size=2)
        assert np.allclose(forward(net, s), oracle_forward(net, s), rtol=0, atol=1e-12)


def test_forward_batch_matches_single():
    net = random_net(3)
    states = np.random.default_rng(1).uniform(size=(6, 2))
    batch = forward(net, states)
    for s, row in zip(states, batch):
        assert np.allclose(row, forward(net, s), rtol=0, atol=1e-12)


def test_forward_rejects_non_finite():
    with pytest.raises(ValueError):
        forward(QNetwork.zeros(), [np.nan, 0.1])


def test_agent_act_matches_forward():
    agent = DQNAgent(DqnHyperparams(epsilon=0.0), np.random.default_rng(4))
    for s in np.random.default_rng(2).uniform(size=(30, 2)):
        assert agent.act(s) == int(np.argmax(forward(agent.net, s)))


def test_glorot_initialisation():
    net = QNetwork.initialize(np.random.default_rng(0))
    assert np.all(np.abs(net.w1) <= np.sqrt(6 / 12))
    assert np.all(np.abs(net.w2) <= np.sqrt(6 / 15))
    assert not net.b1.any() and not net.b2.any()
    again = QNetwork.initialize(np.random.default_rng(0))
    assert np.array_equal(net.flat(), again.flat())


def test_select_action_greedy():
    rng = np.random.default_rng(0)
    assert select_action(np.array([0.1, 0.9, 0.2, 0.3, 0.4]), 0.0, rng) == 1
    assert select_action(np.array([1, 1, 0, 0, 0.0]), 0.0, rng) == 0


def test_select_action_uniform_when_epsilon_one():
    rng = np.random.default_rng(12)
    n = 100_000
    q = np.array([0, 0, 5, 0, 0.0])
    counts = np.bincount([select_action(q, 1.0, rng) for _ in range(n)], minlength=5)
    sigma = np.sqrt(n * 0.2 * 0.8)
    assert np.all(np.abs(counts - n / 5) <= 3 * sigma)


@given(q=st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=5))
def test_select_action_epsilon_zero_is_pure(q):
    a = select_action(np.array(q), 0.0, np.random.default_rng(0))
    b = select_action(np.array(q), 0.0, np.random.default_rng(99))
    assert a == b == int(np.argmax(q))


def test_td_targets_examples():
    batch = random_batch(0)
    assert np.array_equal(td_targets(batch, random_net(1), 0.0), batch.rewards)
    assert np.array_equal(td_targets(batch, QNetwork.zeros(), 0.9), batch.rewards)
    net = QNetwork.zeros()
    net.b2[:] = [0.5, 2.0, -1.0, 0.0, 1.5]
    one = Batch(np.zeros((1, 2)), np.array([0]), np.array([1.0]), np.full((1, 2), 0.4))
    assert td_targets(one, net, 0.9)[0] == pytest.approx(2.8, abs=1e-12)


def test_td_targets_leave_target_untouched():
    target = random_net(5)
    before = target.flat().copy()
    td_targets(random_batch(2), target, 0.9)
    assert np.array_equal(before, target.flat())


def test_td_targets_empty_batch():
    empty = Batch(np.empty((0, 2)), np.empty(0, int), np.empty(0), np.empty((0, 2)))
    with pytest.raises(ValueError):
        td_targets(empty, QNetwork.zeros(), 0.9)


def test_loss_is_summed_squared_error_on_taken_actions():
    net, batch = random_net(2), random_batch(3)
    y = np.random.default_rng(4).normal(size=len(batch))
    loss, _ = loss_and_grads(net, batch.states, batch.actions, y)
    q = np.array([oracle_forward(net, s) for s in batch.states])
    expected = sum((q[i, a] - y[i]) ** 2 for i, a in enumerate(batch.actions))
    assert loss == pytest.approx(expected, rel=1e-12)


def test_train_step_zero_learning_rate_is_noop():
    net, batch = random_net(0), random_batch(0)
    y = np.ones(len(batch))
    before = net.flat().copy()
    first = train_step(net, batch, y, 0.0)
    second = train_step(net, batch, y, 0.0)
    assert first == second
    assert np.array_equal(before, net.flat())


def test_train_step_converges_on_single_sample():
    net = QNetwork.initialize(np.random.default_rng(7))
    batch = Batch(np.array([[0.3, 0.6]]), np.array([2]), np.array([1.0]), np.array([[0.3, 0.6]]))
    y = np.array([1.5])
    losses = [train_step(net, batch, y, 0.01) for _ in range(200)]
    assert np.all(np.diff(losses[10:]) <= 0)
    assert losses[-1] < 1e-3


def test_train_step_rejects_non_finite():
    net = random_net(0)
    net.w2[0, 0] = np.inf
    batch = random_batch(1)
    with pytest.raises(TrainingError):
        train_step(net, batch, np.zeros(len(batch)), 0.01)


def finite_difference_grads(net, states, actions, targets, h=1e-5):
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = loss_and_grads(net, states, actions, targets)
            p[idx] = old - h
            down, _ = loss_and_grads(net, states, actions, targets)
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def test_gradient_matches_finite_differences():
    for seed in range(12):
        net, batch = random_net(seed), random_batch(100 + seed)
        y = np.random.default_rng(seed).normal(size=len(batch))
        _, analytic = loss_and_grads(net, batch.states, batch.actions, y)
        numeric = finite_difference_grads(net, batch.states, batch.actions, y)
        assert max_relative_error(analytic, numeric) < 1e-4


def test_sync_target_is_independent_copy():
    net = random_net(1)
    target = sync_target(net)
    states = np.random.default_rng(0).uniform(size=(10, 2))
    assert np.array_equal(forward(net, states), forward(target, states))
    frozen = forward(target, states)
    train_step(net, random_batch(2), np.ones(8), 0.05)
    assert np.array_equal(forward(target, states), frozen)
    assert not np.array_equal(forward(net, states), frozen)


def test_agent_sync_counter_fires_every_c_steps():
    hp = DqnHyperparams(batch_size=5, capacity=50, target_sync=200)
    agent = DQNAgent(hp, np.random.default_rng(0))
    fired = []
    probe = np.array([[0.2, 0.4], [0.9, 0.1]])
    frozen = forward(agent.target, probe)
    rng = np.random.default_rng(1)
    for step in range(1, 701):
        s, s2 = rng.uniform(size=2), rng.uniform(size=2)
        syncs = agent.syncs
        agent.observe(s, int(rng.integers(5)), float(rng.choice([1.0, -0.2, -1.0])), s2)
        if agent.syncs != syncs:
            fired.append(step)
            frozen = forward(agent.target, probe)
        else:
            # The target stays frozen between syncs.
            assert np.array_equal(forward(agent.target, probe), frozen)
    assert fired == [200, 400, 600]


def test_agent_skips_learning_until_batch_ready():
    hp = DqnHyperparams(batch_size=10, capacity=20)
    agent = DQNAgent(hp, np.random.default_rng(0))
    for i in range(9):
        agent.observe([0.1, 0.1], 0, 1.0, [0.2, 0.1])
    assert agent.gradient_steps == 0
    agent.observe([0.1, 0.1], 0, 1.0, [0.2, 0.1])
    assert agent.gradient_steps == 1


def test_hyperparams_defaults_and_validation():
    hp = DqnHyperparams()
    assert (hp.learning_rate, hp.gamma, hp.capacity, hp.batch_size, hp.target_sync,
            hp.epsilon) == (0.01, 0.9, 2000, 50, 200, 0.1)
    for bad in ({"learning_rate": 0.0}, {"gamma": 1.0}, {"batch_size": 3000},
                {"target_sync": 0}, {"epsilon": 1.5}):
        with pytest.raises(ConfigurationError):
            DqnHyperparams(**bad)


def test_transition_invariants():
    Transition((0.1, 0.2), 4, -0.2, (0.1, 0.2))
    with pytest.raises(ValueError):
        Transition((0.1, 0.2), 5, 1.0, (0.1, 0.2))
    with pytest.raises(ValueError):
        Transition((0.1, 0.2), 0, 0.5, (0.1, 0.2))


def test_replay_fifo_eviction():
    buf = ReplayBuffer(4)
    for i in range(5):
        replay_push(buf, Transition((i / 10, 0.0), i % 5, 1.0, (0.0, 0.0)))
    assert len(buf) == 4
    assert [t.state[0] for t in buf.items()] == [0.1, 0.2, 0.3, 0.4]


@settings(max_examples=50)
@given(capacity=st.integers(1, 30), pushes=st.integers(0, 100))
def test_replay_never_exceeds_capacity(capacity, pushes):
    buf = ReplayBuffer(capacity)
    for i in range(pushes):
        buf.push((i, 0), 0, 1.0, (0, 0))
        assert len(buf) <= capacity
    kept = [t.state[0] for t in buf.items()]
    assert kept == list(range(max(0, pushes - capacity), pushes))


def test_replay_sample_distinct_and_not_ready():
    buf = ReplayBuffer(20)
    for i in range(20):
        buf.push((i, 0), 0, 1.0, (0, 0))
    batch = replay_sample(buf, 15, np.random.default_rng(0))
    assert len(set(batch.states[:, 0].tolist())) == 15
    small = ReplayBuffer(20)
    small.push((0, 0), 0, 1.0, (0, 0))
    with pytest.raises(ReplayNotReady):
        small.sample(2, np.random.default_rng(0))


def test_replay_inclusion_frequency():
    n_items, b, draws = 100, 10, 100_000
    buf = ReplayBuffer(n_items)
    for i in range(n_items):
        buf.push((i, 0), 0, 1.0, (0, 0))
    rng = np.random.default_rng(3)
    counts = np.zeros(n_items)
    for _ in range(draws):
        counts[buf.sample(b, rng).states[:, 0].astype(int)] += 1
    p = b / n_items
    sigma = np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= 4 * sigma)
    # Aggregate check: the worst item stays within the Bonferroni-style bound above
    # and the typical deviation is about one sigma.
    assert np.std(counts) < 1.5 * sigma


def test_checkpoint_format_and_round_trip(tmp_path):
    net = random_net(9)
    text = format_checkpoint(net)
    lines = text.splitlines()
    assert lines[0] == CHECKPOINT_MAGIC == "qnet v1 2 10 5"
    assert len(lines) == 1 + 10 + 1 + 5 + 1
    assert [len(ln.split()) for ln in lines[1:]] == [2] * 10 + [10] + [10] * 5 + [5]
    path = tmp_path / "agent_0.qnet"
    save_checkpoint(net, path)
    assert np.array_equal(load_checkpoint(path).flat(), net.flat())
    assert [p for p in os.listdir(tmp_path) if p.endswith(".tmp")] == []


@pytest.mark.parametrize("text", ["", "qnet v2\n1 2\n", CHECKPOINT_MAGIC + "\n1 2\n"])
def test_checkpoint_rejects_garbage(text):
    with pytest.raises(ValueError):
        parse_checkpoint(text)
