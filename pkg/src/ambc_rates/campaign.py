"""Sweep, validation and waveform runs driven by a :class:`CampaignConfig`.

Every sweep point re-uses the same channel and c_s random streams (common
random numbers), so curves are smooth in the swept parameter and any run is
a pure function of (config, seed).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import List, Optional

import numpy as np

from . import model
from .analytic import CLOSED_FORM_DISTRIBUTION, ClosedFormInputs, mutualism_gain
from .config import CONFIG_PREFIX, CampaignConfig
from .montecarlo import (
    CsDistribution,
    estimate_primary_rate,
    expected_cooperation_gain,
    expected_primary_rate,
    sample_channels,
    verify_ceilings,
    verify_ideal_dominance,
    verify_theorem1,
)
from .params import ChannelState
from .waveform import (
    measure_backscatter_sinr,
    measure_primary_sinr,
    noise_variances,
    simulate_blocks,
    spreading_gain_check,
)

# |MC - analytic| beyond this many standard errors is flagged on the row
MC_FLAG_SIGMAS = 4.0
# transmit powers (mW) for ceiling verification: 8 decades
CEILING_GRID = np.logspace(-2, 6, 81)
WAVEFORM_L_VALUES = (8, 32, 128)


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def _derive_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(97,) + tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def channels_for(cfg: CampaignConfig) -> ChannelState:
    """Channel realizations of one campaign (a single one for fixed-unit fading)."""
    if cfg.fading == "fixed-unit":
        return cfg.geometry().nominal_channel()
    return sample_channels(cfg.geometry(), cfg.fading_model(), cfg.n_channel_draws, cfg.seed)


def _mean(values) -> float:
    v = np.atleast_1d(np.asarray(values, dtype=float))
    return math.fsum(v) / v.size


@dataclass
class SweepRow:
    axis_value: float
    c_p_coop_analytic: float
    c_p_coop_mc: float
    c_p_mc_stderr: float
    c_p_noncoop: float
    c_s: float
    c_p_ideal: float
    c_s_ideal: float
    ceiling_p: float
    ceiling_s: float
    theorem1_holds: bool
    warning: str = ""

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> List[str]:
        return [fmt(getattr(self, c)) for c in self.columns()]


def compute_row(cfg: CampaignConfig, axis_value: float) -> SweepRow:
    params = cfg.system_params()
    cs = cfg.cs()
    chans = channels_for(cfg)
    analytic = _mean(expected_primary_rate(params, chans, cs))
    ideal = _mean(expected_primary_rate(params.ideal(), chans, cs))
    noncoop = _mean(model.noncooperation_rate(params, chans))
    c_s = _mean(model.backscatter_rate(params, chans))
    c_s_id = _mean(model.ideal_backscatter_rate(params, chans))
    if params.kappa > 0:
        ceil_p = model.primary_rate_ceiling(params)
        ceil_s = _mean(model.backscatter_rate_ceiling(params, chans))
    else:
        ceil_p = ceil_s = math.inf

    n_ch = len(chans)
    means, var = [], []
    for j in range(n_ch):
        ch = chans[j] if n_ch > 1 or np.ndim(chans.h) else chans
        est = estimate_primary_rate(params, ch, cs, cfg.n_samples, _derive_seed(cfg.seed, j), cfg.chunk_size)
        means.append(est.mean)
        var.append(est.std_error ** 2)
    mc = math.fsum(means) / n_ch
    se = math.sqrt(math.fsum(var)) / n_ch
    warning = ""
    if abs(mc - analytic) > MC_FLAG_SIGMAS * se and se > 0:
        warning = "mc_deviation"
    elif se == 0 and cs.kind == CLOSED_FORM_DISTRIBUTION:
        warning = "mc_zero_variance"
    return SweepRow(
        axis_value=float(axis_value),
        c_p_coop_analytic=analytic,
        c_p_coop_mc=mc,
        c_p_mc_stderr=se,
        c_p_noncoop=noncoop,
        c_s=c_s,
        c_p_ideal=ideal,
        c_s_ideal=c_s_id,
        ceiling_p=ceil_p,
        ceiling_s=ceil_s,
        theorem1_holds=analytic > noncoop,
        warning=warning,
    )


def _row_task(args):
    cfg, value = args
    return compute_row(cfg.at(value), value)


def run_sweep_rows(cfg: CampaignConfig, workers: Optional[int] = None) -> List[SweepRow]:
    workers = cfg.workers if workers is None else workers
    tasks = [(cfg, float(v)) for v in cfg.sweep_values()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map() yields in submission order regardless of completion order
            return list(pool.map(_row_task, tasks))
    return [_row_task(t) for t in tasks]


def header_lines(cfg: CampaignConfig, kind: str) -> List[str]:
    out = [f"# ambc-rates {kind}", f"# format_version: {cfg.format_version}"]
    if kind in ("sweep", "rate"):
        out.append(f"# closed_form_assumption: {CLOSED_FORM_DISTRIBUTION} c_s")
    out += [CONFIG_PREFIX + ln for ln in cfg.resolved_lines()]
    return out


def render_csv(header: List[str], columns: List[str], rows: List[List[str]]) -> str:
    buf = io.StringIO()
    for ln in header:
        buf.write(ln + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def sweep_csv(cfg: CampaignConfig, workers: Optional[int] = None) -> str:
    rows = run_sweep_rows(cfg, workers)
    cols = SweepRow.columns()
    cols[0] = cfg.sweep_axis
    return render_csv(header_lines(cfg, "sweep"), cols, [r.values() for r in rows])


def rate_csv(cfg: CampaignConfig) -> str:
    row = compute_row(cfg, cfg.p0_mw)
    cols = SweepRow.columns()
    cols[0] = "p0"
    return render_csv(header_lines(cfg, "rate"), cols, [row.values()])


# --------------------------------------------------------------------------
# validation


@dataclass
class PropertyResult:
    name: str
    status: str  # pass | fail | skipped | boundary
    draws: int
    worst_margin: float
    detail: str = ""

    def values(self) -> List[str]:
        return [self.name, self.status, fmt(self.draws), fmt(self.worst_margin), self.detail]


VALIDATE_COLUMNS = ["property", "status", "draws", "worst_margin", "detail"]


def _batch_channels(cfg: CampaignConfig) -> ChannelState:
    if cfg.fading == "fixed-unit":
        h, f, g = cfg.geometry().path_loss()
        n = cfg.n_channel_draws
        return ChannelState(np.full(n, h), np.full(n, f), np.full(n, g))
    return sample_channels(cfg.geometry(), cfg.fading_model(), cfg.n_channel_draws, cfg.seed)


def run_validate(cfg: CampaignConfig) -> List[PropertyResult]:
    params = cfg.system_params()
    chans = _batch_channels(cfg)
    n = len(chans)
    hbg = np.asarray(chans.cascade(params.beta))
    live = hbg > 0
    results = []

    kinds = [cfg.cs()]
    for extra in (CsDistribution("complex-gaussian"), CsDistribution("psk", 4), CsDistribution("constant-envelope")):
        if str(extra) not in {str(k) for k in kinds}:
            kinds.append(extra)
    for cs in kinds:
        margins = np.asarray(expected_cooperation_gain(params, chans, cs))
        name = f"theorem1[{cs}]"
        if not live.any():
            results.append(PropertyResult(name, "boundary", n, 0.0, "h*beta*g = 0: rates coincide (equality branch)"))
            continue
        worst_i = int(np.argmin(np.where(live, margins, np.inf)))
        worst = float(margins[worst_i])
        status = "pass" if worst > 0 else "fail"
        detail = "" if status == "pass" else f"counterexample draw={worst_i} seed={cfg.seed} {_draw_text(chans, worst_i)}"
        results.append(PropertyResult(name, status, n, worst, detail))

    # Monte Carlo route on the first channel draw
    t1 = verify_theorem1(params, chans[0], cfg.cs(), cfg.n_samples, _derive_seed(cfg.seed, 0), cfg.chunk_size)
    if t1.equality:
        results.append(PropertyResult("theorem1_mc", "boundary", cfg.n_samples, 0.0, "h*beta*g = 0: equality"))
    else:
        results.append(
            PropertyResult(
                "theorem1_mc",
                "pass" if t1.holds else "fail",
                cfg.n_samples,
                t1.margin,
                "" if t1.holds else f"counterexample draw=0 seed={cfg.seed} {_draw_text(chans, 0)}",
            )
        )

    if params.kappa <= 0:
        results.append(PropertyResult("ceilings", "skipped", 0, math.nan, "kappa = 0: no finite ceiling"))
        results.append(PropertyResult("ideal_dominance", "skipped", 0, 0.0, "kappa = 0: ideal and impaired rates coincide"))
        results.append(PropertyResult("gain_degradation", "skipped", 0, 0.0, "kappa = 0: nothing to compare"))
        return results

    nominal = cfg.geometry().nominal_channel()
    rep = verify_ceilings(params, nominal, CEILING_GRID, cfg.cs())
    worst = min(rep.worst_margin_p, rep.worst_margin_s)
    detail = f"ceiling_p={fmt(rep.ceiling_p)} ceiling_s={fmt(rep.ceiling_s)} monotone={fmt(rep.monotone)}"
    results.append(PropertyResult("ceilings", "pass" if rep.ok else "fail", len(rep.points), worst, detail))

    dom = verify_ideal_dominance(params, chans, cfg.cs(), n, cfg.seed)
    worst = min(dom.worst_margin_p, dom.worst_margin_s)
    results.append(PropertyResult("ideal_dominance", "pass" if dom.holds else "fail", dom.n_draws, worst))

    if not live.any():
        results.append(PropertyResult("gain_degradation", "boundary", n, 0.0, "h*beta*g = 0: both gains are 0"))
    else:
        margins = np.full(n, np.inf)
        for i in np.flatnonzero(live):
            inp = ClosedFormInputs.from_link(params, chans[i])
            margins[i] = mutualism_gain(inp.with_kappa(0.0)) - mutualism_gain(inp)
        worst_i = int(np.argmin(margins))
        ok = margins[worst_i] > 0
        results.append(
            PropertyResult(
                "gain_degradation",
                "pass" if ok else "fail",
                int(live.sum()),
                float(margins[worst_i]),
                "" if ok else f"counterexample draw={worst_i} seed={cfg.seed} {_draw_text(chans, worst_i)}",
            )
        )
    return results


def _draw_text(chans: ChannelState, i: int) -> str:
    c = chans[i]
    return f"h={fmt(c.h)} f={fmt(c.f)} g={fmt(c.g)}"


def validate_csv(cfg: CampaignConfig, results: List[PropertyResult]) -> str:
    return render_csv(header_lines(cfg, "validate"), VALIDATE_COLUMNS, [r.values() for r in results])


# --------------------------------------------------------------------------
# waveform


WAVEFORM_COLUMNS = ["quantity", "target", "empirical", "rel_dev", "tolerance", "n_symbols", "flagged", "overflow", "pass"]


def _wrow(name, target, value, rel, tol, n, flagged, overflow):
    return [name, fmt(target), fmt(value), fmt(rel), fmt(tol), fmt(n), fmt(flagged), fmt(overflow), fmt(rel <= tol)]


def run_waveform(cfg: CampaignConfig) -> List[List[str]]:
    params = cfg.system_params()
    ch = cfg.geometry().nominal_channel()
    cs = cfg.cs()
    if not cs.constant_modulus:
        # the conditional-SINR target needs one |c_s| across blocks
        cs = CsDistribution("constant-envelope")
    blocks = simulate_blocks(params, ch, cfg.n_symbols, cfg.seed, cs)
    rows = []
    for tol, r in ((0.02, measure_primary_sinr(blocks, params, ch)), (0.03, measure_backscatter_sinr(blocks, params, ch))):
        rows.append(_wrow(f"sinr_{r.kind}", r.target, r.value, r.rel_dev, tol, r.n_symbols, r.flagged, r.overflow))
    n = sum(b.n_symbols for b in blocks)
    for v in noise_variances(blocks, params, ch):
        flagged = 2.0 / math.sqrt(n) > 0.02
        rows.append(_wrow(f"var_{v.name}", v.target, v.empirical, v.rel_dev, 0.02, n, flagged, False))
    rep = spreading_gain_check(params, ch, WAVEFORM_L_VALUES, cfg.n_symbols, cfg.seed, cs)
    for L, r in zip(rep.L_values, rep.sinr):
        rows.append(_wrow(f"sinr_backscatter_L{L}", r.target, r.value, r.rel_dev, 0.03, r.n_symbols, r.flagged, r.overflow))
    flagged = any(r.flagged for r in rep.sinr)
    rows.append(_wrow("spreading_slope", 1.0, rep.slope, abs(rep.slope - 1.0), 0.05, cfg.n_symbols, flagged, False))
    return rows


def waveform_csv(cfg: CampaignConfig, rows: List[List[str]]) -> str:
    return render_csv(header_lines(cfg, "waveform"), WAVEFORM_COLUMNS, rows)
