"""Training and evaluation loops, initial placement search and run records."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig, to_flat_dict
from .dqn import DQNAgent, QNetwork
from .errors import TrainingError
from .mobility import generate_trajectory
from .policies import ACTIONS, PolicyKind, check_nets, move, policy_step
from .world import FadingMode, IncrementalSumRate, WorldState, nearest_sum_rate

logger = logging.getLogger(__name__)

REWARD_UP, REWARD_SAME, REWARD_DOWN = 1.0, -0.2, -1.0
REL_EQUAL_TOL = 1e-9

RECORD_HEADER = ("episode", "t", "policy", "sum_rate_bps", "agent", "reward",
                 "action_dx", "action_dy", "uav_x", "uav_y")

INTERPRETATION = {"exhaustive": "one-step-joint", "init_search": "greedy-grid-{grid}"}


def reward(prev_sum_rate: float, new_sum_rate: float) -> float:
    """+1 on increase, -1 on decrease, -0.2 when equal to 1e-9 relative."""
    scale = max(abs(prev_sum_rate), abs(new_sum_rate))
    if abs(new_sum_rate - prev_sum_rate) <= REL_EQUAL_TOL * scale:
        return REWARD_SAME
    return REWARD_UP if new_sum_rate > prev_sum_rate else REWARD_DOWN


def lattice(area, resolution: int) -> np.ndarray:
    xs = np.linspace(0.0, area[0], resolution)
    ys = np.linspace(0.0, area[1], resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def initial_uav_positions(state0: WorldState, env, grid_resolution: int = 25,
                          refine_passes: int = 1) -> np.ndarray:
    """Greedy sequential lattice search for the t0 sum-rate-maximising placement.

    UAV j is placed given UAVs 0..j-1; then each UAV is re-optimised once
    with all others fixed.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    grid = lattice(state0.area, grid_resolution)
    n = state0.n_uavs
    placed = np.empty((0, 2))

    def best_for(slot, others):
        cand = np.repeat(others[None], len(grid), axis=0)
        cand = np.insert(cand, slot, grid, axis=1)
        scores = nearest_sum_rate(state0.ue_positions, cand, state0.gbs_positions,
                                  state0.altitude_h, env)
        return grid[int(np.argmax(scores))]

    for j in range(n):
        placed = np.vstack([placed, best_for(j, placed)])
    for _ in range(refine_passes):
        for j in range(n):
            placed[j] = best_for(j, np.delete(placed, j, axis=0))
    return placed


@dataclass
class RunRecord:
    """Per-step metrics of one or more episodes of a single policy."""

    policy: str
    sum_rate: np.ndarray          # (episodes, T)
    rewards: np.ndarray           # (episodes, T, n_uavs)
    actions: np.ndarray           # (episodes, T, n_uavs) action indices
    uav_positions: np.ndarray     # (episodes, T, n_uavs, 2) after the step
    uav_step_m: float = 1.0
    episode_offset: int = 0
    decision_seconds: np.ndarray | None = None  # (episodes, T)
    metadata: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.rewards.size

    def episode_mean_sum_rate(self) -> np.ndarray:
        return self.sum_rate.mean(axis=1)

    def episode_total_reward(self) -> np.ndarray:
        return self.rewards.sum(axis=(1, 2))

    def mean_decision_ms(self) -> float:
        if self.decision_seconds is None:
            return float("nan")
        return float(self.decision_seconds.mean() * 1e3)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RECORD_HEADER)
        n_ep, horizon, n_uav = self.rewards.shape
        deltas = ACTIONS[self.actions] * self.uav_step_m
        for e in range(n_ep):
            ep = e + self.episode_offset
            for t in range(horizon):
                rate = f"{self.sum_rate[e, t]:.9g}"
                for j in range(n_uav):
                    writer.writerow((
                        ep, t, self.policy, rate, j, f"{self.rewards[e, t, j]:.9g}",
                        f"{deltas[e, t, j, 0]:.9g}", f"{deltas[e, t, j, 1]:.9g}",
                        f"{self.uav_positions[e, t, j, 0]:.9g}",
                        f"{self.uav_positions[e, t, j, 1]:.9g}",
                    ))
        return buf.getvalue()

    def episodes_csv(self) -> str:
        lines = ["episode,mean_sum_rate_bps,total_reward"]
        for e, (m, r) in enumerate(zip(self.episode_mean_sum_rate(), self.episode_total_reward())):
            lines.append(f"{e + self.episode_offset},{m:.9g},{r:.9g}")
        return "\n".join(lines) + "\n"


@dataclass
class Scenario:
    """Everything seeded that the policies share: UE layout, trajectory, start positions."""

    config: RunConfig
    initial_ues: np.ndarray
    trajectory: np.ndarray
    initial_uavs: np.ndarray
    seeds: dict

    def state(self, t: int, uav_positions) -> WorldState:
        ues = self.initial_ues if t < 0 else self.trajectory[t]
        cfg = self.config
        return WorldState(ues, uav_positions, cfg.gbs_array, cfg.altitude_h, cfg.area,
                          time_index=max(t, 0))


def seed_streams(seed: int, n_uavs: int) -> dict:
    root = np.random.SeedSequence(seed)
    mobility, agents, policy, fading = root.spawn(4)
    return {
        "mobility": mobility,
        "agents": agents.spawn(n_uavs),
        "policy": policy,
        "fading": fading,
    }


def prepare_scenario(cfg: RunConfig) -> Scenario:
    seeds = seed_streams(cfg.seed, cfg.n_uavs)
    rng = np.random.default_rng(seeds["mobility"])
    initial, traj = generate_trajectory(cfg.n_ues, cfg.mobility, cfg.horizon, rng)
    state0 = WorldState(initial, np.empty((0, 2)), cfg.gbs_array, cfg.altitude_h, cfg.area)
    state0 = state0.with_uavs(np.zeros((cfg.n_uavs, 2)))
    uavs = initial_uav_positions(state0, cfg.env, cfg.init_grid)
    return Scenario(cfg, initial, traj, uavs, seeds)


def run_metadata(cfg: RunConfig, scenario: Scenario | None = None, **extra) -> dict:
    meta = {
        "config": to_flat_dict(cfg),
        "seed": cfg.seed,
        "code_version": __version__,
        "interpretation": {
            "exhaustive": INTERPRETATION["exhaustive"],
            "init_search": INTERPRETATION["init_search"].format(grid=cfg.init_grid),
        },
    }
    if scenario is not None:
        meta["initial_uav_positions"] = scenario.initial_uavs.tolist()
    meta.update(extra)
    return meta


class _RateEvaluator:
    """Sum rate under the run's fading mode; gains are fixed within a time step."""

    def __init__(self, cfg: RunConfig, seeds):
        self.cfg = cfg
        self.inc = IncrementalSumRate(cfg.gbs_array, cfg.altitude_h, cfg.env)
        self.rayleigh = FadingMode(cfg.fading_mode) is FadingMode.RAYLEIGH
        self.rng = np.random.default_rng(seeds["fading"])
        self.n_stations = cfg.n_uavs + len(cfg.gbs_array)

    def start_step(self, ues, uavs) -> float:
        gains = None
        if self.rayleigh:
            gains = self.rng.exponential(1.0, size=(len(ues), self.n_stations))
        return self.inc.reset(ues, uavs, gains)

    def moved(self, j, position) -> float:
        return self.inc.move(j, position)


def train(cfg: RunConfig, scenario: Scenario | None = None, nets=None,
          progress=None) -> tuple[list[QNetwork], RunRecord]:
    """Train one DQN agent per UAV; returns the online networks and the record."""
    scenario = scenario or prepare_scenario(cfg)
    seeds = scenario.seeds
    hp = cfg.hyperparams
    agents = []
    for j in range(cfg.n_uavs):
        rng = np.random.default_rng(seeds["agents"][j])
        agents.append(DQNAgent(hp, rng, None if nets is None else nets[j].copy()))
    rate_of = _RateEvaluator(cfg, seeds)
    mob_rng = np.random.default_rng(seeds["mobility"]).spawn(1)[0]
    area = np.asarray(cfg.area)
    E, T, Q = cfg.episodes, cfg.horizon, cfg.n_uavs

    sum_rate = np.empty((E, T))
    rewards = np.empty((E, T, Q))
    actions = np.empty((E, T, Q), dtype=np.int8)
    positions = np.empty((E, T, Q, 2))
    trajectory = scenario.trajectory

    for e in range(E):
        uavs = scenario.initial_uavs.copy()
        if not cfg.replay_trajectory and e > 0:
            _, trajectory = generate_trajectory(cfg.n_ues, cfg.mobility, T, mob_rng,
                                                initial=scenario.initial_ues)
        for t in range(T):
            ues = trajectory[t]
            current = rate_of.start_step(ues, uavs)
            for j, agent in enumerate(agents):
                s = uavs[j] / area
                a = agent.act(s)
                uavs[j] = move(uavs[j], a, cfg.uav_step_m, cfg.area)
                new = rate_of.moved(j, uavs[j])
                r = reward(current, new)
                try:
                    agent.observe(s, a, r, uavs[j] / area)
                except TrainingError as exc:
                    raise TrainingError(f"episode {e}, t={t}, agent {j}: {exc}",
                                        networks=[ag.net for ag in agents]) from exc
                current = new
                rewards[e, t, j] = r
                actions[e, t, j] = a
            sum_rate[e, t] = current
            positions[e, t] = uavs
        for agent in agents:
            agent.end_episode()
        if progress is not None:
            progress(e, sum_rate[e].mean())

    record = RunRecord(PolicyKind.DQN.value, sum_rate, rewards, actions, positions,
                       cfg.uav_step_m, metadata=run_metadata(cfg, scenario, mode="train"))
    record.metadata["gradient_steps"] = [a.gradient_steps for a in agents]
    record.metadata["target_syncs"] = [a.syncs for a in agents]
    record.metadata["transitions_stored"] = [len(a.buffer) for a in agents]
    return [a.net for a in agents], record


def evaluate(cfg: RunConfig, policy_kind, nets=None, scenario: Scenario | None = None,
             clock=time.perf_counter) -> RunRecord:
    """One frozen episode of a policy on the scenario's seeded trajectory."""
    kind = PolicyKind(policy_kind)
    scenario = scenario or prepare_scenario(cfg)
    if kind is PolicyKind.DQN:
        if nets is None:
            raise ValueError("dqn evaluation needs trained networks")
        nets = check_nets(nets, cfg.n_uavs)
    elif nets is not None:
        raise ValueError(f"{kind.value} policy takes no networks")
    policy_rng = np.random.default_rng(scenario.seeds["policy"])
    rate_of = _RateEvaluator(cfg, scenario.seeds)
    T, Q = cfg.horizon, cfg.n_uavs
    sum_rate = np.empty((1, T))
    rewards = np.empty((1, T, Q))
    actions = np.empty((1, T, Q), dtype=np.int8)
    positions = np.empty((1, T, Q, 2))
    elapsed = np.empty((1, T))
    uavs = scenario.initial_uavs.copy()
    for t in range(T):
        ues = scenario.trajectory[t]
        state = scenario.state(t, uavs)
        start = clock()
        chosen = policy_step(kind, state, nets, cfg.env, policy_rng, cfg.uav_step_m)
        elapsed[0, t] = clock() - start
        current = rate_of.start_step(ues, uavs)
        for j, a in enumerate(chosen):
            uavs[j] = move(uavs[j], int(a), cfg.uav_step_m, cfg.area)
            new = rate_of.moved(j, uavs[j])
            rewards[0, t, j] = reward(current, new)
            current = new
        actions[0, t] = chosen
        sum_rate[0, t] = current
        positions[0, t] = uavs
    return RunRecord(kind.value, sum_rate, rewards, actions, positions, cfg.uav_step_m,
                     decision_seconds=elapsed,
                     metadata=run_metadata(cfg, scenario, mode="evaluate", policy=kind.value))
