"""Random-walk UE mobility with the three-phase concentration scenario."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Unit moves: right, left, forward, backward, stay.
MOVES = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [0, 0]], dtype=float)
STAY = 4


@dataclass(frozen=True)
class MobilityConfig:
    """Random walk and scenario phase settings.

    ``section1`` is ``(x_min, y_min, x_max, y_max)``; ``None`` means the
    lower-left quadrant of the area.
    """

    area: tuple[float, float] = (1000.0, 1000.0)
    ue_step_m: float = 1.0
    phase_boundaries: tuple[int, int] | None = None
    concentrate_fraction: float = 0.9
    section1: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        w, h = self.area
        if self.section1 is None:
            object.__setattr__(self, "section1", (0.0, 0.0, w / 2.0, h / 2.0))
        x0, y0, x1, y1 = self.section1
        if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
            raise ConfigurationError("section1 must be a rectangle inside the area")
        if not 0.0 <= self.concentrate_fraction <= 1.0:
            raise ConfigurationError("concentrate_fraction must lie in [0, 1]")
        if self.ue_step_m < 0:
            raise ConfigurationError("ue_step_m must be non-negative")

    def boundaries(self, horizon: int) -> tuple[int, int]:
        """Phase indices ``(t1, t2)`` for an episode of ``horizon`` steps.

        With default boundaries an episode shorter than 3 steps has no room
        for the phases and is a plain random walk; ``(T, T + 1)`` is returned
        so neither transition is ever reached.
        """
        if self.phase_boundaries is None and horizon < 3:
            return horizon, horizon + 1
        t1, t2 = self.phase_boundaries or (horizon // 3, 2 * horizon // 3)
        if not 0 < t1 < t2 < horizon:
            raise ConfigurationError(
                f"phase boundaries must satisfy 0 < t1 < t2 < T, got ({t1}, {t2}) for T={horizon}"
            )
        return t1, t2

    @property
    def full_area(self) -> tuple[float, float, float, float]:
        return (0.0, 0.0, float(self.area[0]), float(self.area[1]))


@dataclass
class UePopulation:
    positions: np.ndarray
    home_region: np.ndarray = field(default=None)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.home_region is None:
            raise ValueError("home_region is required")
        self.home_region = np.asarray(self.home_region, dtype=float)

    def copy(self) -> "UePopulation":
        return UePopulation(self.positions.copy(), self.home_region.copy())

    def inside_home(self) -> np.ndarray:
        p, r = self.positions, self.home_region
        return ((p[:, 0] >= r[:, 0]) & (p[:, 0] <= r[:, 2])
                & (p[:, 1] >= r[:, 1]) & (p[:, 1] <= r[:, 3]))


def _uniform_in(rect, n, rng):
    x0, y0, x1, y1 = rect
    return np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])


def in_rect(points, rect) -> np.ndarray:
    x0, y0, x1, y1 = rect
    return ((points[:, 0] >= x0) & (points[:, 0] <= x1)
            & (points[:, 1] >= y0) & (points[:, 1] <= y1))


def init_population(n_ues: int, area, rng) -> UePopulation:
    """``n_ues`` UEs uniform over the area, all free to roam the whole area."""
    if n_ues <= 0:
        raise ConfigurationError("n_ues must be positive")
    rect = (0.0, 0.0, float(area[0]), float(area[1]))
    return UePopulation(_uniform_in(rect, n_ues, rng), np.tile(rect, (n_ues, 1)))


def random_walk(pop: UePopulation, step_m: float, rng) -> tuple[UePopulation, np.ndarray]:
    """One walk step; returns the new population and the chosen move indices.

    Illegal moves (leaving the home region) are redrawn until legal.
    """
    n = len(pop.positions)
    moves = rng.integers(0, len(MOVES), size=n)
    pending = np.arange(n)
    new = pop.positions.copy()
    while pending.size:
        cand = pop.positions[pending] + MOVES[moves[pending]] * step_m
        reg = pop.home_region[pending]
        ok = ((cand[:, 0] >= reg[:, 0]) & (cand[:, 0] <= reg[:, 2])
              & (cand[:, 1] >= reg[:, 1]) & (cand[:, 1] <= reg[:, 3]))
        new[pending[ok]] = cand[ok]
        pending = pending[~ok]
        if pending.size:
            moves[pending] = rng.integers(0, len(MOVES), size=pending.size)
    return UePopulation(new, pop.home_region.copy()), moves


def _concentrate(pop: UePopulation, cfg: MobilityConfig, rng) -> UePopulation:
    n = len(pop.positions)
    k = int(round(cfg.concentrate_fraction * n))
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    positions = pop.positions.copy()
    home = pop.home_region.copy()
    home[chosen] = cfg.section1
    positions[chosen] = _uniform_in(cfg.section1, k, rng)
    # The remaining UEs are moved out of Section 1 so the split is exact.
    rest = np.setdiff1d(np.arange(n), chosen)
    stray = rest[in_rect(positions[rest], cfg.section1)]
    while stray.size:
        positions[stray] = _uniform_in(cfg.full_area, stray.size, rng)
        stray = stray[in_rect(positions[stray], cfg.section1)]
    return UePopulation(positions, home)


def step_population(pop: UePopulation, cfg: MobilityConfig, t: int, horizon: int,
                    rng) -> UePopulation:
    """Advance the population to time index ``t``.

    Phase transitions replace the walk step at ``t1`` and ``t2``.
    """
    t1, t2 = cfg.boundaries(horizon)
    if not 0 <= t < horizon:
        raise ConfigurationError(f"t={t} outside [0, {horizon})")
    if t == t1:
        return _concentrate(pop, cfg, rng)
    if t == t2:
        n = len(pop.positions)
        return UePopulation(_uniform_in(cfg.full_area, n, rng), np.tile(cfg.full_area, (n, 1)))
    return random_walk(pop, cfg.ue_step_m, rng)[0]


def generate_trajectory(n_ues: int, cfg: MobilityConfig, horizon: int, rng, initial=None):
    """Initial layout ``(n, 2)`` and positions after each step ``(T, n, 2)``.

    Pass ``initial`` to walk from a given layout instead of drawing one.
    """
    if initial is None:
        pop = init_population(n_ues, cfg.area, rng)
    else:
        pop = UePopulation(np.array(initial, dtype=float), np.tile(cfg.full_area, (n_ues, 1)))
    initial = pop.positions.copy()
    out = np.empty((horizon, n_ues, 2))
    for t in range(horizon):
        pop = step_population(pop, cfg, t, horizon, rng)
        out[t] = pop.positions
    return initial, out


def trajectory_csv(trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("t", "ue_index", "x", "y"))
    for t, frame in enumerate(trajectory):
        for i, (x, y) in enumerate(frame):
            writer.writerow((t, i, f"{x:.9g}", f"{y:.9g}"))
    return buf.getvalue()
