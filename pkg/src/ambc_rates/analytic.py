"""Exponential integral and the closed-form ergodic primary rate.

The closed form assumes the BD symbol c_s is circularly-symmetric complex
Gaussian with unit variance, so |c_s|^2 is unit-mean exponential. Products
of the form exp(z) * Ei(-z) appear throughout and are always evaluated
jointly through :func:`scaled_ei_product`; the two factors separately
overflow/underflow long before their product does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LN2
from .params import ChannelState, DomainError, SystemParams

EULER_GAMMA = 0.57721566490153286060651209008240243
# assumption under which primary_rate_closed_form is exact
CLOSED_FORM_DISTRIBUTION = "complex-gaussian"

_SERIES_TERMS = 30
_CF_EPS = 3e-16
_CF_MAXITER = 2000
_ASYMPTOTIC_FROM = 40.0


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def _e1_series(z):
    """E1(z) for 0 < z <= 1 by the convergent power series."""
    acc = np.zeros_like(z)
    term = np.ones_like(z)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-z) / k
        acc += term / k
    return -EULER_GAMMA - np.log(z) - acc


def _scaled_e1_cf(z):
    """exp(z)*E1(z) for z >= 1 by modified Lentz evaluation of the continued fraction."""
    tiny = 1e-300
    b = z + 1.0
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    done = np.zeros(z.shape, dtype=bool)
    for i in range(1, _CF_MAXITER + 1):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        # converged entries are frozen so ulp-level jitter cannot accumulate
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < _CF_EPS
        if done.all():
            return h
    raise ArithmeticError("E1 continued fraction failed to converge")


def _scaled_e1_asymptotic(z):
    """exp(z)*E1(z) ~ sum_n (-1)^n n! / z^(n+1), truncated at the smallest term (z > 40)."""
    acc = np.zeros_like(z)
    term = 1.0 / z
    for n in range(1, 60):
        acc += term
        nxt = -term * n / z
        if np.all(np.abs(nxt) < 1e-17 * np.abs(acc)):
            break
        term = nxt
    else:
        acc += term
    return acc


def exp_integral_ei(x):
    """Ei(x) for strictly negative real x (scalar or array).

    Ei(x) = -E1(-x). Power series for -1 <= x < 0, continued fraction below.
    Values that underflow return -0.0.
    """
    arr, scalar = _as_array(x)
    if np.any(~(arr < 0)):
        raise DomainError("exp_integral_ei is defined here only for x < 0")
    z = -arr
    out = np.empty_like(z)
    small = z <= 1.0
    if np.any(small):
        out[small] = -_e1_series(z[small])
    big = ~small
    if np.any(big):
        zb = z[big]
        with np.errstate(under="ignore"):
            out[big] = -np.exp(-zb) * _scaled_e1_cf(zb)
    return _out(out, scalar)


def scaled_ei_product(z):
    """-exp(z) * Ei(-z) = exp(z) * E1(z) for z > 0, stable for any magnitude of z."""
    arr, scalar = _as_array(z)
    if np.any(~(arr > 0)):
        raise DomainError("scaled_ei_product requires z > 0")
    out = np.empty_like(arr)
    lo = arr <= 1.0
    mid = (arr > 1.0) & (arr <= _ASYMPTOTIC_FROM)
    hi = arr > _ASYMPTOTIC_FROM
    if np.any(lo):
        out[lo] = np.exp(arr[lo]) * _e1_series(arr[lo])
    if np.any(mid):
        out[mid] = _scaled_e1_cf(arr[mid])
    if np.any(hi):
        out[hi] = _scaled_e1_asymptotic(arr[hi])
    return _out(out, scalar)


@dataclass(frozen=True)
class ClosedFormInputs:
    """a = P0*h*beta*g and b = P0*f in mW; sigma_sq is the noise power."""

    a: float
    b: float
    kappa: float
    sigma_sq: float
    bandwidth_hz: float = 1.0

    def __post_init__(self):
        if not (self.a >= 0 and self.b >= 0 and self.kappa >= 0):
            raise DomainError("a, b and kappa must be >= 0")
        if not (self.sigma_sq > 0 and self.bandwidth_hz > 0):
            raise DomainError("sigma_sq and bandwidth_hz must be > 0")

    @classmethod
    def from_link(cls, params: SystemParams, ch: ChannelState) -> "ClosedFormInputs":
        return cls(
            a=params.p0 * ch.cascade(params.beta),
            b=params.p0 * ch.f,
            kappa=params.kappa,
            sigma_sq=params.noise_power,
            bandwidth_hz=params.bandwidth_hz,
        )

    def with_kappa(self, kappa: float) -> "ClosedFormInputs":
        return ClosedFormInputs(self.a, self.b, kappa, self.sigma_sq, self.bandwidth_hz)


def _noncoop(b, kappa, sigma_sq, bw):
    return bw * (np.log1p(b / (b * kappa + sigma_sq)) / LN2)


def _gain(a, b, kappa, sigma_sq, bw):
    # Rate added by the backscatter path: (bw/ln2) * [S(z1) - S(z2)], S = scaled_ei_product.
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    a, b, kappa, sigma_sq = np.broadcast_arrays(a, b, kappa, np.asarray(sigma_sq, dtype=float))
    out = np.zeros(a.shape)
    live = a > 0
    if not np.any(live):
        return out
    a, b, k, s2 = a[live], b[live], kappa[live], sigma_sq[live]
    with np.errstate(over="ignore", divide="ignore"):
        z1 = (b + b * k + s2) / (a * k + a)
        z2 = np.where(k > 0, (b * k + s2) / (a * k), np.inf)
    s1 = scaled_ei_product(z1)
    s2_term = np.zeros_like(z1)
    finite = np.isfinite(z2)
    if np.any(finite):
        s2_term[finite] = scaled_ei_product(z2[finite])
    out[live] = bw * (s1 - s2_term) / LN2
    return out


def closed_form_rate(a, b, kappa, sigma_sq, bandwidth_hz=1.0):
    """Array form of :func:`primary_rate_closed_form` (broadcasts a, b, kappa, sigma_sq)."""
    gain = _gain(a, b, kappa, sigma_sq, bandwidth_hz)
    out = _noncoop(np.asarray(b, float), np.asarray(kappa, float), np.asarray(sigma_sq, float), bandwidth_hz) + gain
    return float(out) if np.ndim(out) == 0 else out


def mutualism_gain_array(a, b, kappa, sigma_sq, bandwidth_hz=1.0):
    """Array form of :func:`mutualism_gain`."""
    out = _gain(a, b, kappa, sigma_sq, bandwidth_hz)
    return float(out) if np.ndim(out) == 0 else out


def primary_rate_closed_form(inputs: ClosedFormInputs) -> float:
    """Ergodic primary rate for Gaussian c_s, in bit/s.

    For kappa > 0 both exp*Ei terms are present; for kappa = 0 the second
    vanishes. At a = 0 the expression reduces to the non-cooperation rate.
    """
    return closed_form_rate(inputs.a, inputs.b, inputs.kappa, inputs.sigma_sq, inputs.bandwidth_hz)


def noncooperation_rate_closed(inputs: ClosedFormInputs) -> float:
    return float(_noncoop(inputs.b, inputs.kappa, inputs.sigma_sq, inputs.bandwidth_hz))


def mutualism_gain(inputs: ClosedFormInputs) -> float:
    """Primary-rate increase from letting the BD share the band (bit/s)."""
    return float(_gain(inputs.a, inputs.b, inputs.kappa, inputs.sigma_sq, inputs.bandwidth_hz))


def gain_degradation_check(inputs: ClosedFormInputs) -> bool:
    """True when the ideal-hardware gain strictly exceeds the gain at ``inputs.kappa``."""
    return mutualism_gain(inputs.with_kappa(0.0)) > mutualism_gain(inputs)


def primary_rate_closed_form_link(params: SystemParams, ch: ChannelState) -> float:
    return primary_rate_closed_form(ClosedFormInputs.from_link(params, ch))

