"""Decomposition of European call prices under the BNS stochastic-volatility model."""

from __future__ import annotations

from .bns_model import BnsParams, MarketState, ParameterError, avg_future_variance, derive_mu
from .bs_core import BsPoint, bs_partials, bs_price, lbar_bs, lbar_bs_partials
from .decomposition import DecompositionReport, Estimate, decompose, decompose_many
from .levy_measures import LevyMeasureSpec, Variant, assumption2_holds, integrate_against_nu, moment, nu_density
from .path_engine import JumpPath, SimConfig, SmallJumpPolicy, mc_price, sample_jump_path

__all__ = [
    "BnsParams",
    "BsPoint",
    "DecompositionReport",
    "Estimate",
    "JumpPath",
    "LevyMeasureSpec",
    "MarketState",
    "ParameterError",
    "SimConfig",
    "SmallJumpPolicy",
    "Variant",
    "assumption2_holds",
    "avg_future_variance",
    "bs_partials",
    "bs_price",
    "decompose",
    "decompose_many",
    "derive_mu",
    "integrate_against_nu",
    "lbar_bs",
    "lbar_bs_partials",
    "mc_price",
    "moment",
    "nu_density",
    "sample_jump_path",
]
