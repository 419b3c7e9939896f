"""Achievable-rate analysis of mutualistic cooperative ambient backscatter links
with transceiver hardware impairments."""

from .analytic import (
    ClosedFormInputs,
    exp_integral_ei,
    gain_degradation_check,
    mutualism_gain,
    primary_rate_closed_form,
    scaled_ei_product,
)
from .model import (
    backscatter_rate,
    backscatter_rate_ceiling,
    backscatter_sinr,
    cooperation_gain_conditional,
    ideal_backscatter_rate,
    ideal_primary_rate_conditional,
    noncooperation_rate,
    primary_rate_ceiling,
    primary_rate_conditional,
    primary_sinr_conditional,
)
from .params import ChannelState, DomainError, ImpairmentLevels, RateReport, SystemParams, aggregate_kappa

__version__ = "0.1.0"
