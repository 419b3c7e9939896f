"""Closed-form SINR and rate expressions of the cooperative backscatter link.

Every function is pure. Functions taking ``cs_mag_sq`` accept either a
scalar or a numpy array of backscatter-symbol energies |c_s|^2 and
broadcast over it.
"""

from __future__ import annotations

import math

import numpy as np

from .params import ChannelState, DomainError, SystemParams, aggregate_kappa

__all__ = [
    "aggregate_kappa",
    "primary_sinr_conditional",
    "primary_rate_conditional",
    "backscatter_sinr",
    "backscatter_rate",
    "ideal_primary_rate_conditional",
    "ideal_backscatter_rate",
    "primary_rate_ceiling",
    "backscatter_rate_ceiling",
    "noncooperation_sinr",
    "noncooperation_rate",
]

LN2 = math.log(2.0)


def _log2_1p(x):
    out = np.log1p(x) / LN2
    return float(out) if np.ndim(out) == 0 else out


def _sinr(signal, kappa, sigma_sq):
    """signal / (signal*kappa + sigma^2), the distortion-limited SINR shape."""
    return signal / (signal * kappa + sigma_sq)


def primary_sinr_conditional(cs_mag_sq, params: SystemParams, ch: ChannelState):
    """SINR for decoding the primary symbol given the backscatter symbol energy."""
    if np.any(np.asarray(cs_mag_sq) < 0):
        raise DomainError("cs_mag_sq must be >= 0")
    hbg = ch.cascade(params.beta)
    signal = params.p0 * (hbg * np.asarray(cs_mag_sq, dtype=float) + np.asarray(ch.f, dtype=float))
    out = _sinr(signal, params.kappa, params.noise_power)
    return float(out) if np.ndim(out) == 0 else out


def primary_rate_conditional(cs_mag_sq, params: SystemParams, ch: ChannelState):
    return params.bandwidth_hz * _log2_1p(primary_sinr_conditional(cs_mag_sq, params, ch))


def noncooperation_sinr(params: SystemParams, ch: ChannelState) -> float:
    return primary_sinr_conditional(0.0, params, ch)


def noncooperation_rate(params: SystemParams, ch: ChannelState) -> float:
    """Primary rate with the BD denied access (the PT alone on the band)."""
    return primary_rate_conditional(0.0, params, ch)


def cooperation_gain_conditional(cs_mag_sq, params: SystemParams, ch: ChannelState):
    """primary_rate_conditional(cs_mag_sq) - noncooperation_rate, without cancellation.

    Uses SINR(x) - SINR(0) = sigma^2 P0 h beta g x / ((S_x kappa + sigma^2)(S_0 kappa + sigma^2)),
    so a gain far below the rate's own rounding error keeps its sign.
    """
    x = np.asarray(cs_mag_sq, dtype=float)
    if np.any(x < 0):
        raise DomainError("cs_mag_sq must be >= 0")
    s2, k = params.noise_power, params.kappa
    extra = params.p0 * ch.cascade(params.beta) * x
    s0 = params.p0 * np.asarray(ch.f, dtype=float)
    d0 = s0 * k + s2
    d_sinr = s2 * extra / (((s0 + extra) * k + s2) * d0)
    out = params.bandwidth_hz * (np.log1p(d_sinr / (1.0 + s0 / d0)) / LN2)
    return float(out) if np.ndim(out) == 0 else out


def backscatter_sinr(params: SystemParams, ch: ChannelState):
    """Post-combining SINR of the BD symbol after SIC and despreading over L chips."""
    hbg = ch.cascade(params.beta)
    den = params.p0 * (hbg + ch.f) * params.kappa + params.noise_power
    out = params.spreading_factor * hbg * params.p0 / den
    return float(out) if np.ndim(out) == 0 else out


def backscatter_rate(params: SystemParams, ch: ChannelState) -> float:
    return params.bandwidth_hz / params.spreading_factor * _log2_1p(backscatter_sinr(params, ch))


def ideal_primary_rate_conditional(cs_mag_sq, params: SystemParams, ch: ChannelState):
    return primary_rate_conditional(cs_mag_sq, params.ideal(), ch)


def ideal_backscatter_rate(params: SystemParams, ch: ChannelState) -> float:
    return backscatter_rate(params.ideal(), ch)


def primary_rate_ceiling(params: SystemParams) -> float:
    """High-power limit of the primary rate; depends on the impairments only."""
    k = params.kappa
    if k <= 0:
        raise DomainError("no finite primary-rate ceiling under ideal hardware (kappa = 0)")
    return params.bandwidth_hz * _log2_1p(1.0 / k)


def backscatter_rate_ceiling(params: SystemParams, ch: ChannelState) -> float:
    """High-power limit of the BD rate; grows as the direct PT->PR gain f shrinks."""
    k = params.kappa
    if k <= 0:
        raise DomainError("no finite backscatter-rate ceiling under ideal hardware (kappa = 0)")
    hbg = np.asarray(ch.cascade(params.beta), dtype=float)
    L = params.spreading_factor
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(hbg > 0, L * hbg / ((hbg + ch.f) * k), 0.0)
    return params.bandwidth_hz / L * _log2_1p(arg)
