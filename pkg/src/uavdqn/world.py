"""Network geometry, nearest-station association and the sum-rate objective."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ._validation import check_in_area, check_positions
from .errors import ConfigurationError
from .channel import (
    SPEED_OF_LIGHT, EnvParams, a2g_mean_pl_db, dbm_to_watt, rate_bps, terrestrial_pl_db,
)

# Terrestrial links are evaluated no closer than this (r = 0 is outside the model).
MIN_TERRESTRIAL_DISTANCE_M = 1.0


class FadingMode(str, Enum):
    DETERMINISTIC = "deterministic"
    RAYLEIGH = "rayleigh"


@dataclass(frozen=True, eq=False)
class WorldState:
    """Snapshot of every entity at one time instant.

    Stations are indexed UAVs first, then GBSs, in the combined list used by
    :class:`Association`.
    """

    ue_positions: np.ndarray
    uav_positions: np.ndarray
    gbs_positions: np.ndarray
    altitude_h: float
    area: tuple[float, float]
    time_index: int = 0

    def __post_init__(self):
        if not self.altitude_h > 0:
            raise ValueError("altitude_h must be positive")
        for name in ("ue_positions", "uav_positions", "gbs_positions"):
            arr = check_positions(getattr(self, name), name).copy()
            check_in_area(arr, self.area, name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "area", (float(self.area[0]), float(self.area[1])))

    @property
    def n_ues(self) -> int:
        return len(self.ue_positions)

    @property
    def n_uavs(self) -> int:
        return len(self.uav_positions)

    @property
    def station_positions(self) -> np.ndarray:
        return np.concatenate([self.uav_positions, self.gbs_positions])

    def with_uavs(self, uav_positions) -> "WorldState":
        return replace(self, uav_positions=np.array(uav_positions, dtype=float))

    def with_ues(self, ue_positions, time_index=None) -> "WorldState":
        t = self.time_index if time_index is None else time_index
        return replace(self, ue_positions=np.array(ue_positions, dtype=float), time_index=t)


@dataclass(frozen=True, eq=False)
class Association:
    serving: np.ndarray
    n_uavs: int = field(default=0)

    def indicator(self, n_stations: int) -> np.ndarray:
        """Binary (n_ues, n_stations) association matrix."""
        gamma = np.zeros((len(self.serving), n_stations), dtype=int)
        gamma[np.arange(len(self.serving)), self.serving] = 1
        return gamma


def horizontal_distances(ue_positions, station_positions):
    """Pairwise planar distances, shape ``(..., n_ues, n_stations)``.

    ``station_positions`` may carry leading batch dimensions.
    """
    diff = ue_positions[..., :, None, :] - station_positions[..., None, :, :]
    return np.sqrt(np.einsum("...k,...k->...", diff, diff))


def nearest_station(distances):
    # argmin returns the first minimum, which is the lowest combined index.
    return np.argmin(distances, axis=-1)


def associate(state: WorldState) -> Association:
    stations = state.station_positions
    if len(stations) == 0:
        raise ConfigurationError("at least one base station is required")
    dist = horizontal_distances(state.ue_positions, stations)
    return Association(nearest_station(dist).astype(np.intp), n_uavs=state.n_uavs)


def _received_power_w(dist, n_uavs, altitude_h, env: EnvParams):
    """Received power in watts and path loss in dB on every UE-station link."""
    pl = np.empty_like(dist)
    pl[..., :n_uavs] = a2g_mean_pl_db(dist[..., :n_uavs], altitude_h, env)
    pl[..., n_uavs:] = terrestrial_pl_db(
        np.maximum(dist[..., n_uavs:], MIN_TERRESTRIAL_DISTANCE_M), env
    )
    tx = np.empty(dist.shape[-1])
    tx[:n_uavs] = env.uav_tx_dbm
    tx[n_uavs:] = env.gbs_tx_dbm
    return dbm_to_watt(tx - pl), pl


def per_ue_rates(dist, serving, n_uavs, altitude_h, env: EnvParams,
                 fading_mode=FadingMode.DETERMINISTIC, rng=None, gains=None):
    """Rate of every UE given distances ``(..., n_ues, n_stations)`` and servers.

    ``gains`` fixes the fading power gains instead of drawing them.
    """
    rx, pl = _received_power_w(dist, n_uavs, altitude_h, env)
    if gains is not None:
        rx = rx * gains
    elif FadingMode(fading_mode) is FadingMode.RAYLEIGH:
        if rng is None:
            raise ConfigurationError("rayleigh fading needs an rng")
        rx = rx * rng.exponential(1.0, size=rx.shape)
    idx = serving[..., None]
    signal = np.take_along_axis(rx, idx, axis=-1)[..., 0]
    mask = np.ones(rx.shape, dtype=bool)
    np.put_along_axis(mask, idx, False, axis=-1)
    interference = np.where(mask, rx, 0.0).sum(axis=-1)
    sinr = signal / (dbm_to_watt(env.noise_dbm) + interference)
    rates = rate_bps(sinr, env.bandwidth_hz)
    if env.pl_max_db is not None:
        serving_pl = np.take_along_axis(pl, idx, axis=-1)[..., 0]
        rates = np.where(serving_pl > env.pl_max_db, 0.0, rates)
    return rates


def sum_rate(state: WorldState, assoc: Association, env: EnvParams,
             fading_mode=FadingMode.DETERMINISTIC, rng=None) -> float:
    """Total Shannon rate of all UEs in bits/s."""
    if state.n_ues == 0:
        return 0.0
    if len(assoc.serving) != state.n_ues:
        raise ConfigurationError("association does not match the UE count")
    dist = horizontal_distances(state.ue_positions, state.station_positions)
    rates = per_ue_rates(dist, assoc.serving, state.n_uavs, state.altitude_h, env,
                         fading_mode, rng)
    return float(np.sum(rates))


def nearest_sum_rate(ue_positions, uav_positions, gbs_positions, altitude_h,
                     env: EnvParams, gains=None) -> np.ndarray:
    """Deterministic sum rate after nearest-station association.

    ``uav_positions`` may be a batch ``(n_candidates, n_uavs, 2)``; the
    result then has shape ``(n_candidates,)``.
    """
    uav_positions = np.asarray(uav_positions, dtype=float)
    batch = uav_positions.shape[:-2]
    gbs = np.broadcast_to(gbs_positions, batch + np.shape(gbs_positions))
    stations = np.concatenate([uav_positions, gbs], axis=-2)
    if ue_positions.shape[0] == 0:
        return np.zeros(batch) if batch else 0.0
    dist = horizontal_distances(ue_positions, stations)
    serving = nearest_station(dist)
    rates = per_ue_rates(dist, serving, uav_positions.shape[-2], altitude_h, env, gains=gains)
    return rates.sum(axis=-1)


SNAPSHOT_HEADER = ("kind", "index", "x", "y")


def snapshot_rows(state: WorldState):
    rows = []
    for kind, arr in (("ue", state.ue_positions), ("uav", state.uav_positions),
                      ("gbs", state.gbs_positions)):
        rows.extend((kind, i, float(x), float(y)) for i, (x, y) in enumerate(arr))
    return rows


def snapshot_csv(state: WorldState) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SNAPSHOT_HEADER)
    for kind, i, x, y in snapshot_rows(state):
        writer.writerow((kind, i, f"{x:.9g}", f"{y:.9g}"))
    return buf.getvalue()


class IncrementalSumRate:
    """Deterministic-association sum rate with cheap single-UAV updates.

    Within one time instant the UEs are fixed, so moving UAV ``j`` only
    changes column ``j`` of the received-power matrix. Numerically this
    matches :func:`nearest_sum_rate` to rounding.
    """

    def __init__(self, gbs_positions, altitude_h, env: EnvParams):
        self.env = env
        self.h = float(altitude_h)
        self.gbs = np.asarray(gbs_positions, dtype=float).reshape(-1, 2)
        self.noise_w = float(dbm_to_watt(env.noise_dbm))
        self._fspl0 = 20.0 * np.log10(4.0 * np.pi * env.carrier_hz / SPEED_OF_LIGHT)
        self._uav_base_db = env.uav_tx_dbm - 30.0 - self._fspl0 - env.eta_nlos_db
        self._eta_diff = env.eta_los_db - env.eta_nlos_db

    def reset(self, ue_positions, uav_positions, gains=None):
        self.ue = np.asarray(ue_positions, dtype=float)
        self.n_uavs = len(uav_positions)
        stations = np.concatenate([np.asarray(uav_positions, dtype=float), self.gbs])
        dx = self.ue[:, 0:1] - stations[None, :, 0]
        dy = self.ue[:, 1:2] - stations[None, :, 1]
        self.dist = np.sqrt(dx * dx + dy * dy)
        self.gains = gains
        self.rx = np.empty_like(self.dist)
        self.pl = np.empty_like(self.dist) if self.env.pl_max_db is not None else None
        for j in range(self.n_uavs):
            self._fill_uav(j)
        if len(self.gbs):
            r = np.maximum(self.dist[:, self.n_uavs:], MIN_TERRESTRIAL_DISTANCE_M)
            pl = self.env.terrestrial_eta_db + 10.0 * self.env.terrestrial_alpha * np.log10(r)
            rx = np.power(10.0, (self.env.gbs_tx_dbm - 30.0 - pl) / 10.0)
            if gains is not None:
                rx = rx * gains[:, self.n_uavs:]
            self.rx[:, self.n_uavs:] = rx
            if self.pl is not None:
                self.pl[:, self.n_uavs:] = pl
        return self.total()

    def _fill_uav(self, j):
        env, r = self.env, self.dist[:, j]
        theta = np.degrees(np.arctan2(self.h, r))
        p_los = 1.0 / (1.0 + env.a * np.exp(-env.b * (theta - env.a)))
        # Mean loss in dB without the constant free-space term.
        var_db = 10.0 * np.log10(self.h * self.h + r * r) + p_los * self._eta_diff
        rx = np.power(10.0, (self._uav_base_db - var_db) / 10.0)
        if self.gains is not None:
            rx = rx * self.gains[:, j]
        self.rx[:, j] = rx
        if self.pl is not None:
            self.pl[:, j] = var_db + self._fspl0 + env.eta_nlos_db

    def move(self, j, position):
        d = self.ue - np.asarray(position, dtype=float)
        self.dist[:, j] = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
        self._fill_uav(j)
        return self.total()

    def total(self) -> float:
        if self.dist.shape[0] == 0:
            return 0.0
        serving = np.argmin(self.dist, axis=1)
        rows = np.arange(len(serving))
        signal = self.rx[rows, serving]
        interference = self.rx.sum(axis=1) - signal
        rates = self.env.bandwidth_hz * np.log2(1.0 + signal / (self.noise_w + interference))
        if self.pl is not None:
            rates = np.where(self.pl[rows, serving] > self.env.pl_max_db, 0.0, rates)
        return float(rates.sum())
