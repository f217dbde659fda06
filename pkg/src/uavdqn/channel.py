"""Radio propagation and link quality.

Probabilistic LoS air-to-ground path loss, a log-distance terrestrial
model, SINR with inter-cell interference and Shannon rate. Everything here
is a pure function; scalar or numpy array inputs are both accepted where
noted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Value the urban parameter set was tabulated with; see EnvParams.
SPEED_OF_LIGHT = 3.0e8


class ChannelDomainError(ValueError):
    """Raised when a channel function gets an argument outside its domain."""


@dataclass(frozen=True)
class EnvParams:
    """Channel environment constants.

    Defaults are the urban A2G set (a, b, eta_los, eta_nlos) =
    (9.61, 0.43, 0.1, 20) at 2 GHz with 37/40 dBm UAV/GBS transmit power.
    """

    a: float = 9.61
    b: float = 0.43
    eta_los_db: float = 0.1
    eta_nlos_db: float = 20.0
    carrier_hz: float = 2.0e9
    terrestrial_alpha: float = 3.5
    terrestrial_eta_db: float = 30.0
    bandwidth_hz: float = 1.0e6
    noise_dbm: float = -114.0
    pl_max_db: float | None = None
    uav_tx_dbm: float = 37.0
    gbs_tx_dbm: float = 40.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("S-curve parameters a and b must be positive")
        if not (self.carrier_hz > 0 and self.bandwidth_hz > 0):
            raise ValueError("carrier_hz and bandwidth_hz must be positive")
        if self.eta_nlos_db < self.eta_los_db:
            raise ValueError("eta_nlos_db must be >= eta_los_db")
        if self.terrestrial_alpha < 2:
            raise ValueError("terrestrial_alpha must be >= 2")


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float
    path_loss_db: float
    fading_linear: float = field(default=1.0)

    def __post_init__(self):
        if not self.fading_linear >= 0:
            raise ValueError("fading_linear must be non-negative")

    @property
    def received_w(self) -> float:
        return dbm_to_watt(self.tx_power_dbm - self.path_loss_db) * self.fading_linear


def dbm_to_watt(dbm):
    return np.power(10.0, (np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(watt) + 30.0


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def thermal_noise_dbm(bandwidth_hz: float, density_dbm_hz: float = -174.0) -> float:
    return density_dbm_hz + 10.0 * np.log10(bandwidth_hz)


def elevation_deg(r, h):
    """Elevation angle in degrees of the ground-to-UAV ray (90 at r = 0)."""
    return np.degrees(np.arctan2(h, r))


def los_probability(r, h, env: EnvParams):
    """Probability of a line-of-sight link at horizontal range ``r``, altitude ``h``.

    ``r = 0`` is handled through ``arctan2`` and gives the 90 degree limit.
    """
    r = np.asarray(r, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ChannelDomainError(f"altitude must be positive, got {h}")
    if np.any(r < 0):
        raise ChannelDomainError(f"horizontal distance must be >= 0, got {r}")
    theta = elevation_deg(r, h)
    p = 1.0 / (1.0 + env.a * np.exp(-env.b * (theta - env.a)))
    return p if p.ndim else float(p)


def free_space_pl_db(d, carrier_hz: float):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ChannelDomainError(f"distance must be positive, got {d}")
    pl = 20.0 * np.log10(4.0 * np.pi * carrier_hz * d / SPEED_OF_LIGHT)
    return pl if pl.ndim else float(pl)


def a2g_mean_pl_db(r, h, env: EnvParams):
    """Mean A2G path loss: LoS/NLoS losses weighted by the LoS probability."""
    r = np.asarray(r, dtype=float)
    p_los = los_probability(r, h, env)
    fspl = free_space_pl_db(np.sqrt(np.square(h) + np.square(r)), env.carrier_hz)
    loss_los = fspl + env.eta_los_db
    loss_nlos = fspl + env.eta_nlos_db
    return p_los * loss_los + (1.0 - p_los) * loss_nlos


def terrestrial_pl_db(r, env: EnvParams):
    """Terrestrial loss eta * r**alpha, expressed in dB."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ChannelDomainError(f"distance must be positive, got {r}")
    pl = env.terrestrial_eta_db + 10.0 * env.terrestrial_alpha * np.log10(r)
    return pl if pl.ndim else float(pl)


def sinr_linear(signal: LinkBudget, interferers: Sequence[LinkBudget], noise_dbm: float) -> float:
    for link in (signal, *interferers):
        if not np.isfinite(link.path_loss_db):
            raise ChannelDomainError("path loss must be finite")
    interference = sum(link.received_w for link in interferers)
    return float(signal.received_w / (dbm_to_watt(noise_dbm) + interference))


def rate_bps(sinr, bandwidth_hz: float):
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ChannelDomainError(f"SINR must be >= 0, got {sinr}")
    rate = bandwidth_hz * np.log2(1.0 + sinr)
    return rate if rate.ndim else float(rate)
