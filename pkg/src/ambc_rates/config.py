"""Campaign configuration: a flat ``key = value`` text format.

Blank lines and ``#`` comments are ignored. Unknown keys are rejected.
Omitted keys take the default scenario (P0 = 3 mW, B_w = 1 MHz, L = 128,
beta = 0.8, kappa_p = kappa_r = 0.1, noise PSD -120 dBm/Hz, path-loss
exponents 2.7/2.7/3).

Keys
----
p0_mw | p0_dbm          PT transmit power (give one of them)
bandwidth_hz            B_w
spreading_factor        L (integer >= 1)
beta                    power reflection coefficient in [0, 1]
kappa_p, kappa_r        PT / PR distortion levels (>= 0)
noise_psd_dbm_hz        noise PSD; sigma^2 = PSD * B_w
noise_power_mw          total noise power, overrides the PSD
block_duration_s        T
d_ps, d_sr, d_pr        distances in m (PT-BD, BD-PR, PT-PR)
alpha_ps, alpha_sr, alpha_pr   path-loss exponents
fading                  rayleigh | fixed-unit
cs_distribution         complex-gaussian | psk:M | constant-envelope
sweep_axis              p0 | kappa | L | beta | distance
sweep_from, sweep_to, sweep_points, sweep_log, sweep_dbm
n_samples               c_s draws per channel realization
n_channel_draws         channel realizations per sweep point / validation draws
n_symbols               primary symbols per waveform run
seed, chunk_size, workers, output_path, format_version
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .montecarlo import CHUNK_SIZE, CsDistribution, FadingModel, Geometry
from .params import DomainError, ImpairmentLevels, SystemParams

FORMAT_VERSION = "1"
SWEEP_AXES = ("p0", "kappa", "L", "beta", "distance")
CONFIG_PREFIX = "# config: "
# settings that never change output values; left out of recorded headers
EXECUTION_KEYS = ("workers", "output_path")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class CampaignConfig:
    p0_mw: float = 3.0
    bandwidth_hz: float = 1e6
    spreading_factor: int = 128
    beta: float = 0.8
    kappa_p: float = 0.1
    kappa_r: float = 0.1
    noise_psd_dbm_hz: float = -120.0
    noise_power_mw: Optional[float] = None
    block_duration_s: float = 1.0
    d_ps: float = 3.0
    d_sr: float = 3.0
    d_pr: float = 8.0
    alpha_ps: float = 2.7
    alpha_sr: float = 2.7
    alpha_pr: float = 3.0
    fading: str = "rayleigh"
    cs_distribution: str = "complex-gaussian"
    sweep_axis: str = "p0"
    sweep_from: float = 0.1
    sweep_to: float = 100.0
    sweep_points: int = 50
    sweep_log: bool = True
    sweep_dbm: bool = False
    n_samples: int = 10000
    n_channel_draws: int = 100
    n_symbols: int = 1000000
    seed: int = 1
    chunk_size: int = CHUNK_SIZE
    workers: int = 1
    output_path: str = ""
    format_version: str = FORMAT_VERSION

    def __post_init__(self):
        _validate(self)

    # -- derived objects ---------------------------------------------------

    @property
    def noise_power(self) -> float:
        if self.noise_power_mw is not None:
            return self.noise_power_mw
        return dbm_to_mw(self.noise_psd_dbm_hz) * self.bandwidth_hz

    def system_params(self) -> SystemParams:
        return SystemParams(
            p0=self.p0_mw,
            bandwidth_hz=self.bandwidth_hz,
            spreading_factor=self.spreading_factor,
            beta=self.beta,
            noise_power=self.noise_power,
            impairments=ImpairmentLevels(self.kappa_p, self.kappa_r),
            block_duration_s=self.block_duration_s,
        )

    def geometry(self) -> Geometry:
        return Geometry(self.d_ps, self.d_sr, self.d_pr, self.alpha_ps, self.alpha_sr, self.alpha_pr)

    def fading_model(self) -> FadingModel:
        return FadingModel(self.fading)

    def cs(self) -> CsDistribution:
        return CsDistribution.parse(self.cs_distribution)

    def sweep_values(self) -> np.ndarray:
        lo, hi = self.sweep_from, self.sweep_to
        if self.sweep_log:
            vals = np.logspace(math.log10(lo), math.log10(hi), self.sweep_points)
        else:
            vals = np.linspace(lo, hi, self.sweep_points)
        if self.sweep_axis == "L":
            vals = np.round(vals)
        return vals

    def at(self, value: float) -> "CampaignConfig":
        """This config with the sweep axis set to ``value``."""
        axis = self.sweep_axis
        if axis == "p0":
            return replace(self, p0_mw=dbm_to_mw(value) if self.sweep_dbm else float(value))
        if axis == "kappa":
            return replace(self, kappa_p=float(value), kappa_r=float(value))
        if axis == "L":
            return replace(self, spreading_factor=int(round(value)))
        if axis == "beta":
            return replace(self, beta=float(value))
        return replace(self, d_ps=float(value))

    def resolved_lines(self) -> List[str]:
        """``key = value`` lines of every setting that can change results."""
        out = []
        for k, v in asdict(self).items():
            if v is None or k in EXECUTION_KEYS:
                continue
            out.append(f"{k} = {_render(v)}")
        return out


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELD_TYPES = {f.name: f.type for f in fields(CampaignConfig)}
_ALIASES = {"p0_dbm"}


def _bound(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _validate(c: CampaignConfig) -> None:
    pos = ("p0_mw", "bandwidth_hz", "block_duration_s", "d_ps", "d_sr", "d_pr", "alpha_ps", "alpha_sr", "alpha_pr")
    for k in pos:
        v = getattr(c, k)
        _bound(math.isfinite(v) and v > 0, k, f"must be > 0, got {v}")
    _bound(c.spreading_factor >= 1, "spreading_factor", f"must be an integer >= 1, got {c.spreading_factor}")
    _bound(0.0 <= c.beta <= 1.0, "beta", f"must lie in [0, 1], got {c.beta}")
    for k in ("kappa_p", "kappa_r"):
        v = getattr(c, k)
        _bound(math.isfinite(v) and v >= 0, k, f"must be >= 0, got {v}")
    if c.noise_power_mw is not None:
        _bound(c.noise_power_mw > 0, "noise_power_mw", f"must be > 0, got {c.noise_power_mw}")
    _bound(math.isfinite(c.noise_psd_dbm_hz), "noise_psd_dbm_hz", "must be finite")
    try:
        FadingModel(c.fading)
    except DomainError as e:
        raise ConfigError(f"fading: {e}") from None
    try:
        CsDistribution.parse(c.cs_distribution)
    except (DomainError, ValueError) as e:
        raise ConfigError(f"cs_distribution: {e}") from None
    _bound(c.sweep_axis in SWEEP_AXES, "sweep_axis", f"must be one of {SWEEP_AXES}, got {c.sweep_axis!r}")
    _bound(c.sweep_from < c.sweep_to, "sweep_from", f"must be < sweep_to ({c.sweep_from} >= {c.sweep_to})")
    _bound(c.sweep_points >= 2, "sweep_points", f"must be >= 2, got {c.sweep_points}")
    if c.sweep_log:
        _bound(c.sweep_from > 0, "sweep_from", "must be > 0 for a log sweep")
    lo, hi = c.sweep_from, c.sweep_to
    if c.sweep_axis == "kappa":
        _bound(lo >= 0, "sweep_from", "kappa must be >= 0")
    if c.sweep_axis == "beta":
        _bound(lo >= 0 and hi <= 1, "sweep_to" if hi > 1 else "sweep_from", "beta sweep must stay within [0, 1]")
    if c.sweep_axis == "L":
        _bound(lo >= 1, "sweep_from", "L must be >= 1")
    if c.sweep_axis in ("p0", "distance") and not (c.sweep_axis == "p0" and c.sweep_dbm):
        _bound(lo > 0, "sweep_from", f"{c.sweep_axis} must be > 0")
    for k in ("n_samples", "n_channel_draws", "n_symbols", "chunk_size", "workers"):
        _bound(getattr(c, k) >= 1, k, f"must be >= 1, got {getattr(c, k)}")
    _bound(0 <= c.seed < 2 ** 64, "seed", "must be an unsigned 64-bit integer")


def _coerce(key: str, raw: str):
    t = _FIELD_TYPES[key]
    try:
        if t in ("bool",):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if t == "int":
            return int(raw)
        if t in ("float", "Optional[float]"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {t}") from None


def parse_config(text: str) -> CampaignConfig:
    values: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key in values or (key == "p0_dbm" and "p0_mw" in values) or (key == "p0_mw" and "p0_dbm" in values):
            raise ConfigError(f"{key}: given more than once")
        if key == "p0_dbm":
            try:
                values["p0_dbm"] = float(raw)
            except ValueError:
                raise ConfigError(f"p0_dbm: cannot parse {raw!r} as float") from None
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{key}: unknown key")
        values[key] = _coerce(key, raw)
    if "p0_dbm" in values:
        values["p0_mw"] = dbm_to_mw(values.pop("p0_dbm"))
    return CampaignConfig(**values)


def load_config(path) -> CampaignConfig:
    """Read and validate a config file; a missing path yields the defaults."""
    if path is None:
        return CampaignConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_from_header(text: str) -> CampaignConfig:
    """Rebuild the config recorded in the comment header of an output file."""
    lines = [ln[len(CONFIG_PREFIX):] for ln in text.splitlines() if ln.startswith(CONFIG_PREFIX)]
    return parse_config("\n".join(lines))
