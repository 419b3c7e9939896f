import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambc_rates import model
from ambc_rates.params import (
    IDEAL,
    ChannelState,
    DomainError,
    ImpairmentLevels,
    RateReport,
    SystemParams,
    aggregate_kappa,
)

# reference values computed with mpmath at 30 digits
SINR_P_K0201 = 1.92270717169775
SINR_S_K0201 = 123.053258988656
RATE_S_K0201 = 54334.4986435593
CEIL_P_K0201 = 5665371.27432466
CEIL_S_K0201 = 90914.9508878625
LOG2_129 = 7.01122725542325
NONCOOP_K0201 = 0.98571612580173165

K0201 = ImpairmentLevels(0.1, 0.1)


def unit(kappa_levels=IDEAL, **kw):
    base = dict(p0=1.0, bandwidth_hz=1.0, spreading_factor=128, beta=1.0, noise_power=1.0, impairments=kappa_levels)
    base.update(kw)
    return SystemParams(**base)


UNIT_CH = ChannelState(h=1.0, f=1.0, g=1.0)


class TestKappa:
    @pytest.mark.parametrize("kp,kr,expected", [(0, 0, 0.0), (0.1, 0.1, 0.0201), (0.2, 0.2, 0.0816)])
    def test_examples(self, kp, kr, expected):
        assert aggregate_kappa(kp, kr) == pytest.approx(expected, rel=1e-14)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            aggregate_kappa(-0.1, 0.1)
        with pytest.raises(DomainError):
            ImpairmentLevels(0.1, -1e-3)

    # levels whose square is representable; smaller ones underflow to 0
    level = st.just(0.0) | st.floats(1e-150, 1.0)

    @given(level, level)
    def test_zero_iff_both_zero(self, kp, kr):
        lv = ImpairmentLevels(kp, kr)
        kp2, kr2 = kp * kp, kr * kr
        assert lv.kappa == kr2 * kp2 + kr2 + kp2
        assert (lv.kappa == 0) == (kp == 0 and kr == 0)


class TestParams:
    def test_defaults(self):
        p = SystemParams()
        assert p.p0 == 3.0 and p.bandwidth_hz == 1e6 and p.spreading_factor == 128
        assert p.beta == 0.8 and p.noise_power == pytest.approx(1e-6)
        assert p.kappa == pytest.approx(0.0201)

    @pytest.mark.parametrize(
        "kw",
        [
            {"p0": 0.0},
            {"p0": -1.0},
            {"bandwidth_hz": 0.0},
            {"spreading_factor": 0},
            {"beta": 1.3},
            {"beta": -0.1},
            {"noise_power": 0.0},
            {"p0": math.inf},
        ],
    )
    def test_bounds_rejected(self, kw):
        with pytest.raises(DomainError):
            SystemParams(**kw)

    @pytest.mark.parametrize("kw", [{"h": -1.0}, {"f": math.nan}, {"g": math.inf}])
    def test_channel_bounds(self, kw):
        vals = {"h": 1.0, "f": 1.0, "g": 1.0}
        vals.update(kw)
        with pytest.raises(DomainError):
            ChannelState(**vals)

    def test_channel_batch_indexing(self):
        ch = ChannelState(h=np.array([1.0, 2.0]), f=np.array([3.0, 4.0]), g=np.array([5.0, 6.0]))
        assert len(ch) == 2
        assert ch[1].h == 2.0 and ch[1].f == 4.0 and ch[1].g == 6.0
        assert np.allclose(ch.cascade(0.5), [2.5, 6.0])

    def test_rate_report_rejects_negative(self):
        with pytest.raises(DomainError):
            RateReport(-1.0, 0.0, 0.0, 0.0, 0.0, ceiling_p=None, ceiling_s=None)


class TestPrimary:
    def test_ideal_unit(self):
        assert model.primary_sinr_conditional(1.0, unit(), UNIT_CH) == 2.0

    def test_hi_unit(self):
        assert model.primary_sinr_conditional(1.0, unit(K0201), UNIT_CH) == pytest.approx(SINR_P_K0201, rel=1e-13)

    def test_zero_cs_is_noncoop_sinr(self):
        p = unit(K0201, p0=2.5, noise_power=0.3)
        ch = ChannelState(h=0.7, f=0.4, g=0.9)
        expect = 2.5 * 0.4 / (2.5 * 0.4 * p.kappa + 0.3)
        assert model.primary_sinr_conditional(0.0, p, ch) == pytest.approx(expect, rel=1e-15)

    def test_rate_log2_3(self):
        assert model.primary_rate_conditional(1.0, unit(), UNIT_CH) == pytest.approx(math.log2(3), rel=1e-15)

    def test_rate_one_bit(self):
        # hbg = 0, f = 1, P0 = sigma^2 = 1, kappa = 0 gives SINR = 1
        ch = ChannelState(h=0.0, f=1.0, g=1.0)
        assert model.primary_rate_conditional(0.7, unit(), ch) == pytest.approx(1.0, rel=1e-15)

    def test_rate_noncoop_mhz(self):
        p = unit(bandwidth_hz=1e6)
        assert model.primary_rate_conditional(0.0, p, UNIT_CH) == pytest.approx(1e6, rel=1e-15)

    def test_broadcasts(self):
        x = np.linspace(0, 3, 7)
        r = model.primary_rate_conditional(x, unit(K0201), UNIT_CH)
        assert r.shape == (7,)
        assert r[0] == model.noncooperation_rate(unit(K0201), UNIT_CH)

    def test_negative_cs_rejected(self):
        with pytest.raises(DomainError):
            model.primary_sinr_conditional(-0.1, unit(), UNIT_CH)


class TestBackscatter:
    def test_ideal(self):
        assert model.backscatter_sinr(unit(), UNIT_CH) == pytest.approx(128.0, rel=1e-15)

    def test_hi(self):
        assert model.backscatter_sinr(unit(K0201), UNIT_CH) == pytest.approx(SINR_S_K0201, rel=1e-13)

    def test_no_path(self):
        ch = ChannelState(h=0.0, f=1.0, g=1.0)
        assert model.backscatter_sinr(unit(K0201), ch) == 0.0
        assert model.backscatter_rate(unit(K0201), ch) == 0.0

    def test_rate_log2_128(self):
        # L P0 beta h g / sigma^2 = 127 with f irrelevant under ideal hardware
        p = unit(bandwidth_hz=1e6, noise_power=128.0 / 127.0)
        assert model.backscatter_rate(p, UNIT_CH) == pytest.approx(54687.5, rel=1e-14)
        assert model.ideal_backscatter_rate(p, UNIT_CH) == pytest.approx(54687.5, rel=1e-14)

    def test_rate_hi(self):
        p = unit(K0201, bandwidth_hz=1e6)
        assert model.backscatter_rate(p, UNIT_CH) == pytest.approx(RATE_S_K0201, rel=1e-13)


class TestIdealAndCeilings:
    @given(st.floats(0, 5), st.floats(0.01, 0.3), st.floats(0.01, 0.3))
    def test_ideal_is_zero_impairment(self, x, kp, kr):
        p = unit(ImpairmentLevels(kp, kr))
        ch = ChannelState(h=0.3, f=0.2, g=0.5)
        assert model.ideal_primary_rate_conditional(x, p, ch) == model.primary_rate_conditional(x, p.ideal(), ch)
        assert model.ideal_backscatter_rate(p, ch) == model.backscatter_rate(p.ideal(), ch)
        assert model.ideal_primary_rate_conditional(x, p, ch) > model.primary_rate_conditional(x, p, ch)

    def test_primary_ceiling(self):
        assert model.primary_rate_ceiling(unit(ImpairmentLevels(1.0, 0.0))) == pytest.approx(1.0, rel=1e-15)
        p = unit(K0201, bandwidth_hz=1e6)
        assert model.primary_rate_ceiling(p) == pytest.approx(CEIL_P_K0201, rel=1e-13)

    def test_ceiling_ideal_raises(self):
        with pytest.raises(DomainError):
            model.primary_rate_ceiling(unit())
        with pytest.raises(DomainError):
            model.backscatter_rate_ceiling(unit(), UNIT_CH)

    def test_backscatter_ceiling(self):
        p = unit(ImpairmentLevels(1.0, 0.0), bandwidth_hz=128.0)
        ch = ChannelState(h=1.0, f=0.0, g=1.0)
        assert model.backscatter_rate_ceiling(p, ch) == pytest.approx(LOG2_129, rel=1e-14)
        p = unit(K0201, bandwidth_hz=1e6)
        assert model.backscatter_rate_ceiling(p, UNIT_CH) == pytest.approx(CEIL_S_K0201, rel=1e-13)

    def test_backscatter_ceiling_decreasing_in_f(self):
        p = unit(K0201)
        c1 = model.backscatter_rate_ceiling(p, ChannelState(1.0, 0.5, 1.0))
        c2 = model.backscatter_rate_ceiling(p, ChannelState(1.0, 2.0, 1.0))
        assert c1 > c2


class TestNoncooperation:
    def test_examples(self):
        assert model.noncooperation_rate(unit(), ChannelState(1.0, 0.0, 1.0)) == 0.0
        assert model.noncooperation_rate(unit(), UNIT_CH) == pytest.approx(1.0, rel=1e-15)
        assert model.noncooperation_rate(unit(K0201), UNIT_CH) == pytest.approx(NONCOOP_K0201, rel=1e-14)

    def test_degenerate_channel(self):
        ch = ChannelState(0.0, 0.0, 0.0)
        p = unit(K0201)
        assert model.primary_rate_conditional(1.0, p, ch) == 0.0
        assert model.backscatter_rate(p, ch) == 0.0
        assert model.noncooperation_rate(p, ch) == 0.0


links = st.builds(
    lambda p0, bw, L, beta, s2, kp, kr, h, f, g: (
        SystemParams(p0, bw, L, beta, s2, ImpairmentLevels(kp, kr)),
        ChannelState(h, f, g),
    ),
    st.floats(1e-3, 1e3),
    st.floats(1.0, 1e7),
    st.integers(1, 512),
    st.floats(0.01, 1.0),
    st.floats(1e-9, 1.0),
    st.floats(0.0, 0.3),
    st.floats(0.0, 0.3),
    st.floats(1e-4, 1.0),
    st.floats(0.0, 1.0),
    st.floats(1e-4, 1.0),
)


@settings(max_examples=200)
@given(links)
def test_sinr_increasing_in_cs(link):
    p, ch = link
    x = np.linspace(0.0, 4.0, 41)
    s = model.primary_sinr_conditional(x, p, ch)
    # near the 1/kappa asymptote the increments drop below float resolution
    assert np.all(np.diff(s) >= 0)
    assert np.all(model.cooperation_gain_conditional(x[1:], p, ch) > 0)


@settings(max_examples=200)
@given(links, st.floats(0.0, 10.0))
def test_cooperation_gain_matches_difference(link, x):
    p, ch = link
    direct = model.primary_rate_conditional(x, p, ch) - model.noncooperation_rate(p, ch)
    gain = model.cooperation_gain_conditional(x, p, ch)
    assert gain >= 0
    assert gain == pytest.approx(direct, rel=1e-9, abs=1e-15 * model.primary_rate_conditional(x, p, ch) + 1e-300)


def test_cooperation_gain_below_rounding():
    # the gain is far below one ulp of the rate, so plain subtraction returns 0
    p = SystemParams(p0=1.0, bandwidth_hz=1e6, beta=1.0, noise_power=1e-9, impairments=IDEAL)
    ch = ChannelState(h=1e-12, f=1.0, g=1e-12)
    assert model.primary_rate_conditional(1.0, p, ch) - model.noncooperation_rate(p, ch) == 0.0
    assert model.cooperation_gain_conditional(1.0, p, ch) > 0


@settings(max_examples=200)
@given(links, st.floats(0.0, 50.0))
def test_below_ceilings(link, x):
    p, ch = link
    if p.kappa == 0:
        return
    assert model.primary_rate_conditional(x, p, ch) < model.primary_rate_ceiling(p)
    assert model.backscatter_rate(p, ch) < model.backscatter_rate_ceiling(p, ch)


@given(links)
def test_zero_cs_equals_noncoop_exactly(link):
    p, ch = link
    assert model.primary_rate_conditional(0.0, p, ch) == model.noncooperation_rate(p, ch)


@given(links, st.floats(0.0, 10.0))
def test_pure(link, x):
    p, ch = link
    assert model.primary_rate_conditional(x, p, ch) == model.primary_rate_conditional(x, p, ch)
    assert model.backscatter_rate(p, ch) == model.backscatter_rate(p, ch)
