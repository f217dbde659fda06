import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavdqn.errors import ConfigurationError
from uavdqn.mobility import (
    MOVES,
    MobilityConfig,
    UePopulation,
    generate_trajectory,
    in_rect,
    init_population,
    random_walk,
    step_population,
    trajectory_csv,
)

LARGE_AREA = (5000.0, 5000.0)


def test_init_population_deterministic():
    a = init_population(500, LARGE_AREA, np.random.default_rng(42)).positions
    b = init_population(500, LARGE_AREA, np.random.default_rng(42)).positions
    assert np.array_equal(a, b)


def test_init_population_inside_area():
    pos = init_population(500, LARGE_AREA, np.random.default_rng(1)).positions
    assert pos.shape == (500, 2)
    assert np.all((pos >= 0) & (pos <= 5000))


def test_init_population_quadrant_counts():
    n = 10000
    pos = init_population(n, LARGE_AREA, np.random.default_rng(3)).positions
    right = pos[:, 0] >= 2500
    top = pos[:, 1] >= 2500
    counts = [np.sum(~right & ~top), np.sum(right & ~top), np.sum(~right & top), np.sum(right & top)]
    sigma = np.sqrt(n * 0.25 * 0.75)
    for c in counts:
        assert abs(c - n / 4) <= 3 * sigma


def test_init_population_rejects_zero():
    with pytest.raises(ConfigurationError):
        init_population(0, LARGE_AREA, np.random.default_rng(0))


def test_walk_displacement_axis_aligned():
    rng = np.random.default_rng(5)
    pop = init_population(300, (100.0, 100.0), rng)
    for _ in range(50):
        new, moves = random_walk(pop, 2.5, rng)
        d = new.positions - pop.positions
        assert np.all((d[:, 0] == 0) | (d[:, 1] == 0))
        assert set(np.round(np.abs(d).sum(axis=1), 12)) <= {0.0, 2.5}
        assert np.allclose(d, MOVES[moves] * 2.5)
        pop = new


def test_walk_move_distribution_uniform():
    # UEs far from any wall never draw an illegal move, so every draw counts.
    rng = np.random.default_rng(1)
    n, steps = 1000, 20
    pop = UePopulation(np.full((n, 2), 500.0), np.tile((0.0, 0.0, 1000.0, 1000.0), (n, 1)))
    counts = np.zeros(len(MOVES))
    for _ in range(steps):
        pop, moves = random_walk(pop, 1.0, rng)
        counts += np.bincount(moves, minlength=len(MOVES))
    total = n * steps
    sigma = np.sqrt(total * 0.2 * 0.8)
    assert np.all(np.abs(counts - total / 5) <= 3 * sigma)


def test_walk_resamples_at_corner():
    rng = np.random.default_rng(0)
    pop = UePopulation(np.zeros((2000, 2)), np.tile((0.0, 0.0, 10.0, 10.0), (2000, 1)))
    new, moves = random_walk(pop, 1.0, rng)
    assert np.all(new.inside_home())
    # From the corner only right, forward and stay are legal.
    assert set(moves.tolist()) == {0, 2, 4}


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), horizon=st.integers(3, 60),
       step=st.floats(0.5, 50.0))
def test_containment_every_step(seed, horizon, step):
    cfg = MobilityConfig(area=(200.0, 150.0), ue_step_m=step, concentrate_fraction=0.0)
    rng = np.random.default_rng(seed)
    pop = init_population(40, cfg.area, rng)
    for t in range(horizon):
        pop = step_population(pop, cfg, t, horizon, rng)
        assert np.all(pop.inside_home())
        assert np.all(in_rect(pop.positions, cfg.full_area))


def test_concentration_exact_count():
    cfg = MobilityConfig(area=LARGE_AREA)
    horizon = 30
    t1, _ = cfg.boundaries(horizon)
    rng = np.random.default_rng(11)
    pop = init_population(500, cfg.area, rng)
    for t in range(t1 + 1):
        pop = step_population(pop, cfg, t, horizon, rng)
    assert np.sum(in_rect(pop.positions, cfg.section1)) == 450
    assert np.all(pop.inside_home())


def test_phase_changes_only_at_boundaries():
    cfg = MobilityConfig(area=(400.0, 400.0), ue_step_m=5.0)
    horizon = 30
    t1, t2 = cfg.boundaries(horizon)
    assert (t1, t2) == (10, 20)
    rng = np.random.default_rng(2)
    pop = init_population(100, cfg.area, rng)
    changed = []
    for t in range(horizon):
        new = step_population(pop, cfg, t, horizon, rng)
        if not np.array_equal(new.home_region, pop.home_region):
            changed.append(t)
        pop = new
    assert changed == [t1, t2]
    assert np.all(pop.home_region == np.array(cfg.full_area))


def test_uniform_after_second_transition():
    cfg = MobilityConfig(area=LARGE_AREA)
    horizon = 9
    rng = np.random.default_rng(4)
    pop = init_population(4000, cfg.area, rng)
    for t in range(7):
        pop = step_population(pop, cfg, t, horizon, rng)
    inside = np.sum(in_rect(pop.positions, cfg.section1))
    assert abs(inside - 1000) <= 3 * np.sqrt(4000 * 0.25 * 0.75)


@pytest.mark.parametrize("bounds", [(0, 5), (5, 5), (6, 3), (3, 10)])
def test_invalid_phase_boundaries(bounds):
    cfg = MobilityConfig(phase_boundaries=bounds)
    with pytest.raises(ConfigurationError):
        cfg.boundaries(10)


@pytest.mark.parametrize("kwargs", [
    {"concentrate_fraction": 1.5}, {"section1": (0, 0, 2000, 10)}, {"ue_step_m": -1.0},
])
def test_mobility_config_invariants(kwargs):
    with pytest.raises(ConfigurationError):
        MobilityConfig(**kwargs)


def test_step_rejects_out_of_range_t():
    cfg = MobilityConfig()
    pop = init_population(3, cfg.area, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        step_population(pop, cfg, 10, 10, np.random.default_rng(0))


def test_trajectory_deterministic_and_csv():
    cfg = MobilityConfig(area=(100.0, 100.0))
    init_a, traj_a = generate_trajectory(5, cfg, 12, np.random.default_rng(9))
    init_b, traj_b = generate_trajectory(5, cfg, 12, np.random.default_rng(9))
    assert np.array_equal(init_a, init_b) and np.array_equal(traj_a, traj_b)
    assert traj_a.shape == (12, 5, 2)
    text = trajectory_csv(traj_a)
    lines = text.splitlines()
    assert lines[0] == "t,ue_index,x,y"
    assert len(lines) == 1 + 12 * 5


def test_short_horizon_without_phases():
    cfg = MobilityConfig(area=(50.0, 50.0))
    assert cfg.boundaries(2) == (2, 3)
    _, traj = generate_trajectory(4, cfg, 1, np.random.default_rng(0))
    assert traj.shape == (1, 4, 2)
