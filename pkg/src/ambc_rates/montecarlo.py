"""Channel sampling, the ergodic-rate estimator and property-verification campaigns.

Randomness contract: every chunk of draws gets its own generator derived
from ``(seed, stream, chunk_index)``. The chunk size is fixed by the caller
(default :data:`CHUNK_SIZE`), so results are bit-identical no matter how many
workers evaluate the chunks, and chunk partial sums are exact (``math.fsum``)
and combined in chunk order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import model
from .analytic import ClosedFormInputs, closed_form_rate, mutualism_gain, mutualism_gain_array
from .params import ChannelState, DomainError, ImpairmentLevels, SystemParams

CHUNK_SIZE = 1 << 16

# independent stream identifiers for seed derivation
STREAM_CS = 1
STREAM_CHANNEL = 2
STREAM_WAVEFORM = 3
STREAM_CAMPAIGN = 4

FADING_KINDS = ("rayleigh", "fixed-unit")
CS_KINDS = ("complex-gaussian", "psk", "constant-envelope")


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Generator for one (seed, stream, index...) coordinate."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Geometry:
    """Link distances in meters and path-loss exponents.

    h uses (d_ps, alpha_ps), g uses (d_sr, alpha_sr), f uses (d_pr, alpha_pr).
    """

    d_ps: float = 3.0
    d_sr: float = 3.0
    d_pr: float = 8.0
    alpha_ps: float = 2.7
    alpha_sr: float = 2.7
    alpha_pr: float = 3.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{k} must be > 0, got {v}")

    def path_loss(self):
        return (
            self.d_ps ** -self.alpha_ps,
            self.d_pr ** -self.alpha_pr,
            self.d_sr ** -self.alpha_sr,
        )

    def nominal_channel(self) -> ChannelState:
        """Path loss only (unit small-scale fading)."""
        h, f, g = self.path_loss()
        return ChannelState(h=h, f=f, g=g)


@dataclass(frozen=True)
class FadingModel:
    kind: str = "rayleigh"

    def __post_init__(self):
        if self.kind not in FADING_KINDS:
            raise DomainError(f"unknown fading kind {self.kind!r}; expected one of {FADING_KINDS}")

    def small_scale(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "fixed-unit":
            return np.ones(size)
        return rng.standard_exponential(size)


@dataclass(frozen=True)
class CsDistribution:
    """Zero-mean, unit-power backscatter constellation.

    ``complex-gaussian``: CN(0, 1); ``psk``: M-ary PSK (``order`` = M);
    ``constant-envelope``: unit modulus with uniform phase.
    """

    kind: str = "complex-gaussian"
    order: int = 4

    def __post_init__(self):
        if self.kind not in CS_KINDS:
            raise DomainError(f"unknown c_s distribution {self.kind!r}; expected one of {CS_KINDS}")
        if self.kind == "psk" and self.order < 2:
            raise DomainError("psk order must be >= 2")

    @classmethod
    def parse(cls, text: str) -> "CsDistribution":
        text = text.strip()
        if text.startswith("psk"):
            order = int(text.partition(":")[2] or 4)
            return cls("psk", order)
        return cls(text)

    def __str__(self):
        return f"psk:{self.order}" if self.kind == "psk" else self.kind

    @property
    def constant_modulus(self) -> bool:
        return self.kind != "complex-gaussian"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "complex-gaussian":
            return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
        if self.kind == "psk":
            k = rng.integers(0, self.order, size)
            return np.exp(2j * np.pi * k / self.order)
        return np.exp(2j * np.pi * rng.random(size))

    def sample_mag_sq(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "complex-gaussian":
            # |CN(0,1)|^2 is unit-mean exponential
            return rng.standard_exponential(size)
        return np.ones(size)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int


def sample_channel(geometry: Geometry, fading: FadingModel, rng: np.random.Generator, size=None) -> ChannelState:
    """Path loss times small-scale power fading for each of the three links."""
    lh, lf, lg = geometry.path_loss()
    shape = () if size is None else size
    hs = fading.small_scale(rng, shape)
    fs = fading.small_scale(rng, shape)
    gs = fading.small_scale(rng, shape)
    if size is None:
        return ChannelState(h=float(hs) * lh, f=float(fs) * lf, g=float(gs) * lg)
    return ChannelState(h=hs * lh, f=fs * lf, g=gs * lg)


def sample_channels(geometry: Geometry, fading: FadingModel, n: int, seed: int) -> ChannelState:
    """Batch of ``n`` channel draws, reproducible from ``seed``."""
    return sample_channel(geometry, fading, rng_for(seed, STREAM_CHANNEL), size=n)


def _chunk_bounds(n: int, chunk_size: int):
    return [(i, lo, min(lo + chunk_size, n)) for i, lo in enumerate(range(0, n, chunk_size))]


def _reduce(parts):
    """Chan-style combination of (n, fsum, m2) chunk summaries, in chunk order."""
    n_tot = 0
    total = 0.0
    m2 = 0.0
    for n_c, s_c, m2_c in parts:
        if n_tot == 0:
            n_tot, total, m2 = n_c, s_c, m2_c
            continue
        mean_a = total / n_tot
        mean_b = s_c / n_c
        delta = mean_b - mean_a
        m2 = m2 + m2_c + delta * delta * n_tot * n_c / (n_tot + n_c)
        total = math.fsum((total, s_c))
        n_tot += n_c
    return n_tot, total, m2


def _summarize(values: np.ndarray):
    s = math.fsum(values)
    mean = s / values.size
    return values.size, s, math.fsum((values - mean) ** 2)


def _estimate(rate_fn, cs_dist, n_samples, seed, chunk_size, workers) -> McEstimate:
    """Chunked mean and standard error of rate_fn(|c_s|^2) over c_s draws."""
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")

    def run(bounds):
        idx, lo, hi = bounds
        x = cs_dist.sample_mag_sq(rng_for(seed, STREAM_CS, idx), hi - lo)
        return _summarize(np.asarray(rate_fn(x), dtype=float))

    chunks = _chunk_bounds(n_samples, chunk_size)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    n, total, m2 = _reduce(parts)
    mean = total / n
    if n > 1:
        std_error = math.sqrt(max(m2, 0.0) / (n - 1)) / math.sqrt(n)
    else:
        std_error = 0.0
    return McEstimate(mean=mean, std_error=std_error, n_samples=n, seed=seed)


def estimate_primary_rate(
    params: SystemParams,
    ch: ChannelState,
    cs_dist: CsDistribution,
    n_samples: int,
    seed: int,
    chunk_size: int = CHUNK_SIZE,
    workers: int = 1,
) -> McEstimate:
    """Monte Carlo estimate of the ergodic primary rate over the c_s distribution."""
    return _estimate(lambda x: model.primary_rate_conditional(x, params, ch), cs_dist, n_samples, seed, chunk_size, workers)


def estimate_cooperation_gain(
    params: SystemParams,
    ch: ChannelState,
    cs_dist: CsDistribution,
    n_samples: int,
    seed: int,
    chunk_size: int = CHUNK_SIZE,
    workers: int = 1,
) -> McEstimate:
    """Same draws as :func:`estimate_primary_rate`, averaging the rate gain over non-cooperation."""
    return _estimate(lambda x: model.cooperation_gain_conditional(x, params, ch), cs_dist, n_samples, seed, chunk_size, workers)


def expected_primary_rate(params: SystemParams, ch: ChannelState, cs_dist: CsDistribution):
    """Exact ergodic primary rate: closed form for Gaussian c_s, |c_s|^2 = 1 otherwise."""
    if cs_dist.constant_modulus:
        return model.primary_rate_conditional(1.0, params, ch)
    a = params.p0 * np.asarray(ch.cascade(params.beta), dtype=float)
    b = params.p0 * np.asarray(ch.f, dtype=float)
    return closed_form_rate(a, b, params.kappa, params.noise_power, params.bandwidth_hz)


def expected_cooperation_gain(params: SystemParams, ch: ChannelState, cs_dist: CsDistribution):
    """Exact ergodic primary rate minus the non-cooperation rate, free of cancellation."""
    if cs_dist.constant_modulus:
        return model.cooperation_gain_conditional(1.0, params, ch)
    a = params.p0 * np.asarray(ch.cascade(params.beta), dtype=float)
    b = params.p0 * np.asarray(ch.f, dtype=float)
    out = mutualism_gain_array(a, b, params.kappa, params.noise_power, params.bandwidth_hz)
    return float(out) if np.ndim(out) == 0 else out


def link_for_inputs(inputs: ClosedFormInputs):
    """A (SystemParams, ChannelState) pair realizing the given closed-form inputs."""
    params = SystemParams(
        p0=1.0,
        bandwidth_hz=inputs.bandwidth_hz,
        spreading_factor=1,
        beta=1.0,
        noise_power=inputs.sigma_sq,
        impairments=ImpairmentLevels(0.0, math.sqrt(inputs.kappa)),
    )
    return params, ChannelState(h=inputs.a, f=inputs.b, g=1.0)


# --------------------------------------------------------------------------
# verification


@dataclass
class Theorem1Result:
    holds: bool
    equality: bool
    margin: float
    coop_rate: float
    noncoop_rate: float
    estimate: McEstimate
    closed_form_margin: Optional[float] = None


def verify_theorem1(params, ch, cs_dist, n_samples, seed, chunk_size=CHUNK_SIZE) -> Theorem1Result:
    """Check that the cooperative primary rate strictly beats the BD-denied rate.

    With no backscatter path (h*beta*g = 0) both rates coincide and the
    result reports equality rather than a violation.
    """
    est = estimate_primary_rate(params, ch, cs_dist, n_samples, seed, chunk_size)
    noncoop = model.noncooperation_rate(params, ch)
    margin = estimate_cooperation_gain(params, ch, cs_dist, n_samples, seed, chunk_size).mean
    cf_margin = None
    if not cs_dist.constant_modulus:
        cf_margin = mutualism_gain(ClosedFormInputs.from_link(params, ch))
    equality = ch.cascade(params.beta) == 0.0
    if equality:
        # both rates are the same expression; report the boundary exactly
        margin, cf_margin = 0.0, (None if cf_margin is None else 0.0)
    holds = margin > 0 and (cf_margin is None or cf_margin > 0)
    return Theorem1Result(holds, equality, margin, est.mean, noncoop, est, cf_margin)


@dataclass
class CeilingPoint:
    p0: float
    c_p: float
    c_s: float


@dataclass
class CeilingReport:
    ceiling_p: float
    ceiling_s: float
    points: List[CeilingPoint]
    below_p: bool
    below_s: bool
    monotone: bool
    near_p: bool
    near_s: bool
    near_fraction: float

    @property
    def ok(self) -> bool:
        return self.below_p and self.below_s and self.monotone

    @property
    def worst_margin_p(self) -> float:
        return min(self.ceiling_p - p.c_p for p in self.points)

    @property
    def worst_margin_s(self) -> float:
        return min(self.ceiling_s - p.c_s for p in self.points)


def rates_vs_power(params_base: SystemParams, ch: ChannelState, p0_grid, cs_dist=None):
    """Ergodic primary and BD rates at each transmit power of ``p0_grid``."""
    cs_dist = cs_dist or CsDistribution()
    out = []
    for p0 in p0_grid:
        p = params_base.with_(p0=float(p0))
        out.append(CeilingPoint(float(p0), float(expected_primary_rate(p, ch, cs_dist)), model.backscatter_rate(p, ch)))
    return out


def verify_ceilings(
    params_base: SystemParams,
    ch: ChannelState,
    p0_grid: Sequence[float],
    cs_dist: Optional[CsDistribution] = None,
    near_fraction: float = 0.01,
) -> CeilingReport:
    """Rates stay below the high-power ceilings and approach them along an ascending power grid."""
    if params_base.kappa <= 0:
        raise DomainError("ceilings exist only for kappa > 0")
    grid = np.asarray(p0_grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise DomainError("p0_grid must be strictly ascending with at least two points")
    cp_max = model.primary_rate_ceiling(params_base)
    cs_max = model.backscatter_rate_ceiling(params_base, ch)
    pts = rates_vs_power(params_base, ch, grid, cs_dist)
    cp = np.array([p.c_p for p in pts])
    cs = np.array([p.c_s for p in pts])
    if ch.cascade(params_base.beta) > 0:
        below_s = bool(np.all(cs < cs_max))
    else:
        # no backscatter path: rate and ceiling are both 0 (equality, not a violation)
        below_s = bool(np.all(cs == 0.0))
    return CeilingReport(
        ceiling_p=cp_max,
        ceiling_s=cs_max,
        points=pts,
        below_p=bool(np.all(cp < cp_max)),
        below_s=below_s,
        monotone=bool(np.all(np.diff(cp) >= 0) and np.all(np.diff(cs) >= 0)),
        near_p=bool(cp[-1] >= (1 - near_fraction) * cp_max),
        near_s=bool(cs[-1] >= (1 - near_fraction) * cs_max),
        near_fraction=near_fraction,
    )


@dataclass
class DominanceResult:
    holds: bool
    equality: bool
    n_draws: int
    worst_margin_p: float
    worst_margin_s: float
    ideal_mean: float = 0.0
    hi_mean: float = 0.0


def verify_ideal_dominance(params, ch, cs_dist, n_samples, seed) -> DominanceResult:
    """Ideal-hardware rates strictly exceed impaired rates on paired draws.

    ``ch`` may be a batch of channel draws, in which case each channel is
    paired with its own |c_s|^2 draw. For kappa = 0 the two coincide and the
    verdict is "not strictly greater" with ``equality`` set.
    """
    rng = rng_for(seed, STREAM_CS, 0)
    n = max(n_samples, len(ch))
    x = cs_dist.sample_mag_sq(rng, n)
    hi = np.asarray(model.primary_rate_conditional(x, params, ch))
    ideal = np.asarray(model.ideal_primary_rate_conditional(x, params, ch))
    d_p = ideal - hi
    d_s = np.atleast_1d(np.asarray(model.ideal_backscatter_rate(params, ch)) - np.asarray(model.backscatter_rate(params, ch)))
    # draws with no backscatter path carry no BD rate to compare
    live_s = np.atleast_1d(np.asarray(ch.cascade(params.beta)) > 0)
    live_s = np.broadcast_to(live_s, d_s.shape)
    ws = float(d_s[live_s].min()) if np.any(live_s) else math.inf
    wp = float(d_p.min())
    equality = params.kappa == 0
    holds = (not equality) and wp > 0 and ws > 0
    return DominanceResult(holds, equality, n, wp, ws, float(ideal.mean()), float(hi.mean()))


# --------------------------------------------------------------------------
# randomized campaigns


@dataclass
class RandomLinks:
    """A batch of random link instances sharing one SystemParams template per draw."""

    p0: np.ndarray
    beta: np.ndarray
    kappa_p: np.ndarray
    kappa_r: np.ndarray
    channels: ChannelState
    bandwidth_hz: float = 1e6
    noise_power: float = 1e-6
    spreading_factor: int = 128

    def __len__(self):
        return self.p0.size

    def params(self, i: int) -> SystemParams:
        return SystemParams(
            p0=float(self.p0[i]),
            bandwidth_hz=self.bandwidth_hz,
            spreading_factor=self.spreading_factor,
            beta=float(self.beta[i]),
            noise_power=self.noise_power,
            impairments=ImpairmentLevels(float(self.kappa_p[i]), float(self.kappa_r[i])),
        )

    @property
    def kappa(self) -> np.ndarray:
        kp2, kr2 = self.kappa_p ** 2, self.kappa_r ** 2
        return kr2 * kp2 + kr2 + kp2


def random_links(
    n: int,
    seed: int,
    distance_range=(1.0, 10.0),
    kappa_max: float = 0.2,
    p0_range_mw=(0.1, 100.0),
) -> RandomLinks:
    """Random geometry, Rayleigh fading, aggregate kappa in (0, kappa_max] and beta in (0, 1]."""
    rng = rng_for(seed, STREAM_CAMPAIGN)
    lo, hi = distance_range
    d = rng.uniform(lo, hi, size=(3, n))
    small = rng.standard_exponential((3, n))
    geo = Geometry()
    h = small[0] * d[0] ** -geo.alpha_ps
    g = small[1] * d[1] ** -geo.alpha_sr
    f = small[2] * d[2] ** -geo.alpha_pr
    # 1 - U(0,1] lies in (0, 1]
    beta = 1.0 - rng.random(n)
    # aggregate kappa uniform on (0, kappa_max], split at random between PT and PR:
    # kappa_p^2 = u^2 kappa and kappa_r^2 (1 + kappa_p^2) = kappa - kappa_p^2
    kappa = kappa_max * (1.0 - rng.random(n))
    u = rng.random(n)
    kp = np.sqrt(kappa) * u
    kr = np.sqrt((kappa - kp * kp) / (1.0 + kp * kp))
    p0 = np.exp(rng.uniform(math.log(p0_range_mw[0]), math.log(p0_range_mw[1]), n))
    return RandomLinks(p0=p0, beta=beta, kappa_p=kp, kappa_r=kr, channels=ChannelState(h=h, f=f, g=g))


@dataclass
class CampaignResult:
    name: str
    n_draws: int
    n_pass: int
    worst_margin: float
    worst_index: int
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.n_pass == self.n_draws


def _campaign_result(name, margins: np.ndarray, **details) -> CampaignResult:
    i = int(np.argmin(margins))
    return CampaignResult(name, int(margins.size), int(np.sum(margins > 0)), float(margins[i]), i, details)


def theorem1_campaign(links: RandomLinks, cs_dist: CsDistribution) -> CampaignResult:
    """Exact-expectation margin of the cooperative over the BD-denied primary rate, per draw."""
    margins = np.empty(len(links))
    for i in range(len(links)):
        p, ch = links.params(i), links.channels[i]
        margins[i] = float(expected_cooperation_gain(p, ch, cs_dist))
    return _campaign_result(f"theorem1[{cs_dist}]", margins)


def ideal_dominance_campaign(links: RandomLinks, cs_dist: CsDistribution, seed: int) -> CampaignResult:
    """Pointwise ideal-minus-impaired rate margins for both links, one paired |c_s|^2 draw per link."""
    x = cs_dist.sample_mag_sq(rng_for(seed, STREAM_CS, 0), len(links))
    margins = np.empty(len(links))
    for i in range(len(links)):
        p, ch = links.params(i), links.channels[i]
        d_p = model.ideal_primary_rate_conditional(x[i], p, ch) - model.primary_rate_conditional(x[i], p, ch)
        d_s = model.ideal_backscatter_rate(p, ch) - model.backscatter_rate(p, ch)
        margins[i] = min(d_p, d_s)
    return _campaign_result("ideal_dominance", margins)


def gain_degradation_campaign(a, b, sigma_sq, kappas, bandwidth_hz=1.0) -> CampaignResult:
    """Ideal-hardware mutualism gain minus impaired gain, for every (a, b, sigma^2) and kappa."""
    margins = []
    for k in kappas:
        for ai, bi, si in zip(np.ravel(a), np.ravel(b), np.ravel(sigma_sq)):
            inp = ClosedFormInputs(float(ai), float(bi), float(k), float(si), bandwidth_hz)
            margins.append(mutualism_gain(inp.with_kappa(0.0)) - mutualism_gain(inp))
    return _campaign_result("gain_degradation", np.array(margins), kappas=list(kappas))
