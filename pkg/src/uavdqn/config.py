"""Run configuration, built-in presets and the flat dotted-key JSON format."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import EnvParams
from .dqn import DqnHyperparams
from .errors import ConfigurationError
from .mobility import MobilityConfig
from .world import FadingMode


@dataclass(frozen=True)
class RunConfig:
    area: tuple[float, float] = (1000.0, 1000.0)
    n_ues: int = 50
    n_uavs: int = 2
    gbs_positions: tuple[tuple[float, float], ...] = ((500.0, 500.0),)
    altitude_h: float = 100.0
    horizon: int = 200
    episodes: int = 2000
    hyperparams: DqnHyperparams = field(default_factory=DqnHyperparams)
    env: EnvParams = field(default_factory=EnvParams)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    seed: int = 0
    fading_mode: str = FadingMode.DETERMINISTIC.value
    uav_step_m: float = 1.0
    init_grid: int = 25
    # Replay the same seeded UE trajectory every episode.
    replay_trajectory: bool = True

    def __post_init__(self):
        object.__setattr__(self, "area", tuple(float(v) for v in self.area))
        object.__setattr__(self, "gbs_positions",
                           tuple((float(x), float(y)) for x, y in self.gbs_positions))
        object.__setattr__(self, "fading_mode", FadingMode(self.fading_mode).value)
        if self.horizon < 1 or self.episodes < 1:
            raise ConfigurationError("horizon and episodes must be >= 1")
        if self.n_uavs < 1:
            raise ConfigurationError("n_uavs must be >= 1")
        if self.n_ues < 1:
            raise ConfigurationError("n_ues must be >= 1")
        if self.init_grid < 2:
            raise ConfigurationError("init_grid must be >= 2")
        if tuple(self.mobility.area) != self.area:
            raise ConfigurationError("mobility.area must equal the run area")
        if not self.altitude_h > 0 or not self.uav_step_m > 0:
            raise ConfigurationError("altitude_h and uav_step_m must be positive")

    @property
    def gbs_array(self) -> np.ndarray:
        return np.array(self.gbs_positions, dtype=float).reshape(-1, 2)

    def replace(self, **changes) -> "RunConfig":
        if "area" in changes and "mobility" not in changes:
            changes["mobility"] = dataclasses.replace(
                self.mobility, area=tuple(changes["area"]), section1=None)
        return dataclasses.replace(self, **changes)


def desk_config(**overrides) -> RunConfig:
    """Workstation-sized scenario: 1 km square, 50 UEs, 2 UAVs, 1 GBS at the center."""
    return RunConfig().replace(**overrides) if overrides else RunConfig()


def paper_config(**overrides) -> RunConfig:
    """The full 5 km / 500 UE / 4 UAV scenario with 50000 episodes of 500 steps."""
    area = (5000.0, 5000.0)
    cfg = RunConfig(
        area=area, n_ues=500, n_uavs=4, gbs_positions=((2500.0, 2500.0),),
        horizon=500, episodes=50000, mobility=MobilityConfig(area=area),
    )
    return cfg.replace(**overrides) if overrides else cfg


PRESETS = {"desk": desk_config, "paper": paper_config}

_SECTIONS = {"env": "env", "dqn": "hyperparams", "mobility": "mobility"}


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def to_flat_dict(cfg: RunConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            section = next(k for k, v in _SECTIONS.items() if v == f.name)
            for sub in dataclasses.fields(value):
                if section == "mobility" and sub.name == "area":
                    continue
                out[f"{section}.{sub.name}"] = _plain(getattr(value, sub.name))
        else:
            out[f"run.{f.name}"] = _plain(value)
    return out


def _tupleize(value):
    if isinstance(value, list):
        return tuple(_tupleize(v) for v in value)
    return value


def from_flat_dict(flat: dict, base: RunConfig | None = None) -> RunConfig:
    """Build a config from dotted keys, starting from ``base`` (desk preset)."""
    base = base or desk_config()
    run_kw, nested = {}, {name: {} for name in _SECTIONS}
    run_fields = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in flat.items():
        section, _, name = key.partition(".")
        value = _tupleize(value)
        if section == "run" and name in run_fields and name not in _SECTIONS.values():
            run_kw[name] = value
        elif section in nested:
            target = getattr(base, _SECTIONS[section])
            if name not in {f.name for f in dataclasses.fields(target)} or \
                    (section == "mobility" and name == "area"):
                raise ConfigurationError(f"unknown config key {key!r}")
            nested[section][name] = value
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    area = tuple(run_kw.get("area", base.area))
    mob_kw = nested["mobility"]
    if "area" in run_kw and "section1" not in mob_kw:
        mob_kw["section1"] = None
    try:
        mobility = dataclasses.replace(base.mobility, area=area, **mob_kw)
        env = dataclasses.replace(base.env, **nested["env"])
        hp = dataclasses.replace(base.hyperparams, **nested["dqn"])
        return dataclasses.replace(base, env=env, hyperparams=hp, mobility=mobility, **run_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def dumps(cfg: RunConfig) -> str:
    return json.dumps(to_flat_dict(cfg), indent=2, sort_keys=True) + "\n"


def load_config(path=None, scale: str = "desk") -> RunConfig:
    if scale not in PRESETS:
        raise ConfigurationError(f"unknown scale {scale!r}; choose from {sorted(PRESETS)}")
    base = PRESETS[scale]()
    if path is None:
        return base
    with open(path, encoding="utf-8") as fh:
        try:
            flat = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(flat, dict):
        raise ConfigurationError(f"{path}: expected a flat JSON object")
    return from_flat_dict(flat, base)
