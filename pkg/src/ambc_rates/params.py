"""Validated value types shared by every layer of the rate model.

Powers are in mW, rates in bit/s, gains are linear power gains. Conversions
from dBm happen only in :mod:`ambc_rates.config`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np


class DomainError(ValueError):
    """Raised when an input lies outside the domain of a formula."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


def aggregate_kappa(kappa_p: float, kappa_r: float) -> float:
    """Combined transmitter/receiver distortion level."""
    _require(kappa_p >= 0 and kappa_r >= 0, "impairment levels must be >= 0")
    kp2 = kappa_p * kappa_p
    kr2 = kappa_r * kappa_r
    return kr2 * kp2 + kr2 + kp2


@dataclass(frozen=True)
class ImpairmentLevels:
    kappa_p: float = 0.0
    kappa_r: float = 0.0
    kappa: float = field(init=False)

    def __post_init__(self):
        _require(
            math.isfinite(self.kappa_p) and math.isfinite(self.kappa_r),
            "impairment levels must be finite",
        )
        object.__setattr__(self, "kappa", aggregate_kappa(self.kappa_p, self.kappa_r))

    @property
    def ideal(self) -> bool:
        return self.kappa == 0.0


IDEAL = ImpairmentLevels(0.0, 0.0)


@dataclass(frozen=True)
class SystemParams:
    """Link-level parameters of the PT/BD/PR system."""

    p0: float = 3.0
    bandwidth_hz: float = 1e6
    spreading_factor: int = 128
    beta: float = 0.8
    noise_power: float = 1e-6
    impairments: ImpairmentLevels = ImpairmentLevels(0.1, 0.1)
    # carried for completeness, not consumed by any rate expression
    block_duration_s: float = 1.0

    def __post_init__(self):
        _require(math.isfinite(self.p0) and self.p0 > 0, f"p0 must be > 0, got {self.p0}")
        _require(
            math.isfinite(self.bandwidth_hz) and self.bandwidth_hz > 0,
            f"bandwidth_hz must be > 0, got {self.bandwidth_hz}",
        )
        _require(
            isinstance(self.spreading_factor, int) and self.spreading_factor >= 1,
            f"spreading_factor must be an integer >= 1, got {self.spreading_factor}",
        )
        _require(0.0 <= self.beta <= 1.0, f"beta must lie in [0, 1], got {self.beta}")
        _require(
            math.isfinite(self.noise_power) and self.noise_power > 0,
            f"noise_power must be > 0, got {self.noise_power}",
        )
        _require(self.block_duration_s > 0, "block_duration_s must be > 0")

    @property
    def kappa(self) -> float:
        return self.impairments.kappa

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def ideal(self) -> "SystemParams":
        """Same link with distortion-free transceivers."""
        return replace(self, impairments=IDEAL)


@dataclass(frozen=True, eq=False)
class ChannelState:
    """Instantaneous power gains: h (PT->BD), f (PT->PR), g (BD->PR).

    Gains may be floats or equal-shape numpy arrays (a batch of channel
    draws); every formula in :mod:`ambc_rates.model` broadcasts over them.
    """

    h: Union[float, np.ndarray]
    f: Union[float, np.ndarray]
    g: Union[float, np.ndarray]

    def __post_init__(self):
        for name in ("h", "f", "g"):
            v = np.asarray(getattr(self, name), dtype=float)
            _require(
                bool(np.all(np.isfinite(v)) and np.all(v >= 0)),
                f"channel gain {name} must be finite and >= 0, got {getattr(self, name)}",
            )

    def __len__(self):
        return int(np.size(self.h))

    def __getitem__(self, i) -> "ChannelState":
        return ChannelState(float(np.asarray(self.h)[i]), float(np.asarray(self.f)[i]), float(np.asarray(self.g)[i]))

    def cascade(self, beta: float) -> float:
        """Power gain of the backscatter path, h*beta*g."""
        return self.h * beta * self.g


@dataclass(frozen=True)
class RateReport:
    c_p_analytic: float
    c_p_noncoop: float
    c_s: float
    c_p_ideal: float
    c_s_ideal: float
    # None under ideal hardware: no finite ceiling exists
    ceiling_p: Optional[float]
    ceiling_s: Optional[float]
    c_p_mc: Optional[float] = None

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v is None:
                continue
            _require(math.isfinite(v) and v >= 0, f"{k} must be finite and >= 0, got {v}")
