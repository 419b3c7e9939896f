"""Symbol-level simulation of the PT -> {BD, PR} signal chain.

The PT sends sqrt(P0)*x_p(n) with x_p ~ CN(0, 1) and adds its own distortion
tau_p(n) ~ CN(0, kappa_p^2 P0). One BD symbol c_s spans L primary symbols.
The PR sees

    y(n) = (sqrt(beta h g) c_s + sqrt(f)) (sqrt(P0) x_p(n) + tau_p(n)) + tau_r(n) + w(n)

with receiver distortion tau_r drawn at its within-BD-symbol (conditional)
variance and thermal noise w ~ CN(0, sigma^2).

Arrays are laid out ``(n_blocks, L)``; one row is one BD symbol period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from . import model
from .montecarlo import STREAM_WAVEFORM, CsDistribution, rng_for
from .params import ChannelState, DomainError, SystemParams

BLOCKS_PER_CHUNK = 4096
# SINRs above this are reported as the overflow sentinel (inf)
SINR_OVERFLOW = 1e12


def _cn(rng: np.random.Generator, shape, var) -> np.ndarray:
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class SymbolBlock:
    """One or more BD symbol periods of the waveform.

    ``c_s`` has shape ``(n_blocks,)``; every other field ``(n_blocks, L)``.
    """

    x_p: np.ndarray
    c_s: np.ndarray
    tau_p: np.ndarray
    tau_r: np.ndarray
    w: np.ndarray
    y_pr: np.ndarray

    def __post_init__(self):
        self.c_s = np.atleast_1d(np.asarray(self.c_s, dtype=complex))
        for name in ("x_p", "tau_p", "tau_r", "w", "y_pr"):
            arr = np.atleast_2d(getattr(self, name))
            setattr(self, name, arr)
            if arr.shape != (self.c_s.size, self.x_p.shape[-1]):
                raise ValueError(f"{name} has shape {arr.shape}, expected {(self.c_s.size, self.x_p.shape[-1])}")

    @property
    def n_blocks(self) -> int:
        return self.c_s.size

    @property
    def length(self) -> int:
        return self.x_p.shape[-1]

    @property
    def n_symbols(self) -> int:
        return self.x_p.size


def tau_r_variance(params: SystemParams, ch: ChannelState, cs_mag_sq):
    """PR distortion power for a given BD symbol energy (within one BD symbol)."""
    kp2 = params.impairments.kappa_p ** 2
    kr2 = params.impairments.kappa_r ** 2
    return kr2 * params.p0 * (1.0 + kp2) * (ch.cascade(params.beta) * np.asarray(cs_mag_sq) + ch.f)


def synthesize_block(
    params: SystemParams,
    ch: ChannelState,
    c_s: Union[complex, np.ndarray],
    rng: np.random.Generator,
    noise_power: Optional[float] = None,
) -> SymbolBlock:
    """Draw the PR observations for each BD symbol in ``c_s``.

    ``noise_power`` overrides sigma^2 (it may be 0 for noiseless checks).
    """
    c_s = np.atleast_1d(np.asarray(c_s, dtype=complex))
    L = params.spreading_factor
    shape = (c_s.size, L)
    s2 = params.noise_power if noise_power is None else noise_power
    x = _cn(rng, shape, 1.0)
    tau_p = _cn(rng, shape, params.impairments.kappa_p ** 2 * params.p0)
    tau_r = _cn(rng, shape, tau_r_variance(params, ch, np.abs(c_s) ** 2)[:, None])
    w = _cn(rng, shape, s2)
    eff = (math.sqrt(ch.cascade(params.beta)) * c_s + math.sqrt(ch.f))[:, None]
    y = eff * (math.sqrt(params.p0) * x + tau_p) + tau_r + w
    return SymbolBlock(x_p=x, c_s=c_s, tau_p=tau_p, tau_r=tau_r, w=w, y_pr=y)


def simulate_blocks(
    params: SystemParams,
    ch: ChannelState,
    n_symbols: int,
    seed: int,
    cs_dist: Optional[CsDistribution] = None,
    noise_power: Optional[float] = None,
    blocks_per_chunk: int = BLOCKS_PER_CHUNK,
) -> List[SymbolBlock]:
    """ceil(n_symbols / L) BD symbol periods, drawn chunk by chunk from ``seed``."""
    cs_dist = cs_dist or CsDistribution("constant-envelope")
    L = params.spreading_factor
    n_blocks = max(1, -(-n_symbols // L))
    out = []
    for idx, lo in enumerate(range(0, n_blocks, blocks_per_chunk)):
        rng = rng_for(seed, STREAM_WAVEFORM, idx)
        k = min(blocks_per_chunk, n_blocks - lo)
        out.append(synthesize_block(params, ch, cs_dist.sample(rng, k), rng, noise_power))
    return out


@dataclass
class EmpiricalSinr:
    value: float
    n_symbols: int
    target: float
    rel_dev: float
    flagged: bool = False
    overflow: bool = False
    kind: str = "primary"

    @classmethod
    def build(cls, value, n_symbols, target, n_effective, tolerance, kind):
        over_v, over_t = value > SINR_OVERFLOW, target > SINR_OVERFLOW
        overflow = over_v or over_t
        if overflow:
            # beyond what a double-precision decomposition of y can resolve
            rel = 0.0 if (over_v and over_t) else math.inf
            value = math.inf if over_v else value
            target = math.inf if over_t else target
        else:
            rel = abs(value - target) / target
        # relative standard error of a ratio-of-powers estimate ~ 1/sqrt(n)
        flagged = 2.0 / math.sqrt(max(n_effective, 1)) > tolerance
        return cls(value, n_symbols, target, rel, flagged, overflow, kind)


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf
    return num / den


def _blocks(blocks) -> List[SymbolBlock]:
    return [blocks] if isinstance(blocks, SymbolBlock) else list(blocks)


def measure_primary_sinr(
    blocks: Union[SymbolBlock, Iterable[SymbolBlock]],
    params: SystemParams,
    ch: ChannelState,
    tolerance: float = 0.02,
) -> EmpiricalSinr:
    """Empirical SINR of the primary symbols against the conditional-SINR formula.

    The signal is x_p passed through the slowly varying effective channel
    sqrt(P0) (sqrt(beta h g) c_s + sqrt(f)); everything else is residual.
    All blocks must share one |c_s|.
    """
    blocks = _blocks(blocks)
    mags = np.concatenate([np.abs(b.c_s) for b in blocks])
    if np.ptp(mags) > 1e-9 * max(1.0, float(mags.max())):
        raise DomainError("measure_primary_sinr needs blocks with a common |c_s|")
    sig_parts, res_parts, n = [], [], 0
    for b in blocks:
        eff = math.sqrt(params.p0) * (math.sqrt(ch.cascade(params.beta)) * b.c_s + math.sqrt(ch.f))
        signal = eff[:, None] * b.x_p
        resid = b.y_pr - signal
        sig_parts.append(math.fsum(np.abs(signal).ravel() ** 2))
        res_parts.append(math.fsum(np.abs(resid).ravel() ** 2))
        n += b.n_symbols
    value = _ratio(math.fsum(sig_parts), math.fsum(res_parts))
    target = model.primary_sinr_conditional(float(mags[0]) ** 2, params, ch)
    return EmpiricalSinr.build(value, n, target, n, tolerance, "primary")


def sic_and_despread(block: SymbolBlock, params: SystemParams, ch: ChannelState, known_x_p=None) -> np.ndarray:
    """Cancel the direct-path primary signal and despread against x_p.

    Returns the per-block estimate of sqrt(beta h g P0) * c_s: the residual
    correlated with the known spreading sequence, normalised by its energy.
    """
    x = block.x_p if known_x_p is None else np.atleast_2d(known_x_p)
    y_hat = block.y_pr - math.sqrt(ch.f * params.p0) * x
    return np.sum(np.conj(x) * y_hat, axis=1) / np.sum(np.abs(x) ** 2, axis=1)


def measure_backscatter_sinr(
    blocks: Union[SymbolBlock, Iterable[SymbolBlock]],
    params: SystemParams,
    ch: ChannelState,
    tolerance: float = 0.03,
) -> EmpiricalSinr:
    """Empirical post-despreading SINR of the BD symbol, targeted at the MRC formula.

    Per block, a unit-norm combiner collects signal energy beta*h*g*P0*|c_s|^2*E
    (E = sum |x_p|^2) against an error of E*|c_hat - c_s*sqrt(beta h g P0)|^2;
    the estimate is the ratio of their sums over blocks.
    """
    blocks = _blocks(blocks)
    amp = math.sqrt(ch.cascade(params.beta) * params.p0)
    sig_parts, err_parts, n, nb = [], [], 0, 0
    for b in blocks:
        est = sic_and_despread(b, params, ch)
        energy = np.sum(np.abs(b.x_p) ** 2, axis=1)
        sig_parts.append(math.fsum(amp * amp * np.abs(b.c_s) ** 2 * energy))
        err_parts.append(math.fsum(energy * np.abs(est - amp * b.c_s) ** 2))
        n += b.n_symbols
        nb += b.n_blocks
    value = _ratio(math.fsum(sig_parts), math.fsum(err_parts))
    target = model.backscatter_sinr(params, ch)
    return EmpiricalSinr.build(value, n, target, nb, tolerance, "backscatter")


@dataclass
class NoiseVarianceCheck:
    name: str
    empirical: float
    target: float

    @property
    def rel_dev(self) -> float:
        return abs(self.empirical - self.target) / self.target


def noise_variances(blocks, params: SystemParams, ch: ChannelState) -> List[NoiseVarianceCheck]:
    """Empirical power of tau_p, tau_r and w against their specified variances.

    tau_r is compared with its conditional variance, so blocks must share |c_s|.
    """
    blocks = _blocks(blocks)
    mag2 = float(np.abs(blocks[0].c_s[0]) ** 2)
    out = []
    targets = {
        "tau_p": params.impairments.kappa_p ** 2 * params.p0,
        "tau_r": float(tau_r_variance(params, ch, mag2)),
        "w": params.noise_power,
    }
    for name, target in targets.items():
        if target == 0:
            continue
        n = sum(b.n_symbols for b in blocks)
        emp = math.fsum(math.fsum(np.abs(getattr(b, name)).ravel() ** 2) for b in blocks) / n
        out.append(NoiseVarianceCheck(name, emp, target))
    return out


@dataclass
class SpreadingGainReport:
    L_values: List[int]
    sinr: List[EmpiricalSinr]
    slope: float
    rate_prefactors: List[float]

    def ratio(self, i: int, j: int) -> float:
        return self.sinr[j].value / self.sinr[i].value


def spreading_gain_check(
    params: SystemParams,
    ch: ChannelState,
    L_values: Sequence[int],
    n_symbols: int,
    seed: int,
    cs_dist: Optional[CsDistribution] = None,
) -> SpreadingGainReport:
    """Despread SINR versus spreading factor; the log-log slope should be 1."""
    if any(L < 1 for L in L_values):
        raise DomainError("spreading factors must be >= 1")
    results = []
    for L in L_values:
        p = params.with_(spreading_factor=int(L))
        blocks = simulate_blocks(p, ch, n_symbols, seed, cs_dist)
        results.append(measure_backscatter_sinr(blocks, p, ch))
    if len(L_values) >= 2:
        slope = float(np.polyfit(np.log(L_values), np.log([r.value for r in results]), 1)[0])
    else:
        slope = math.nan
    prefactors = [params.bandwidth_hz / L for L in L_values]
    return SpreadingGainReport(list(L_values), results, slope, prefactors)
