"""BNS parameterisation and the deterministic variance machinery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .levy_measures import (
    LevyMeasureSpec,
    Variant,
    assumption2_holds,
    epsilon_kernel,
    integrate_against_nu,
    moment,
)

__all__ = [
    "ParameterError",
    "BnsParams",
    "MarketState",
    "derive_mu",
    "epsilon",
    "variance_decay",
    "integrated_variance",
    "avg_future_variance",
]


class ParameterError(ValueError):
    """Model parameters violate an invariant or the admissibility conditions."""


def derive_mu(measure: LevyMeasureSpec, rho: float, tol: float = 1e-12) -> float:
    """Drift correction ``int (1 - e^{rho z}) nu(dz)`` making ``e^{-rt} S_t`` a martingale."""
    if rho > 0.0:
        raise ParameterError("rho must be <= 0")
    if rho == 0.0:
        return 0.0
    if measure.variant is Variant.GAMMA_OU:
        return -measure.lam * measure.a * rho / (measure.b - rho)
    res = integrate_against_nu(measure, lambda z: -math.expm1(rho * z), tol=tol)
    return res.value


def epsilon(lam: float, t):
    """``(1 - e^{-lam t}) / lam``."""
    if np.any(np.asarray(t) < 0.0):
        raise ValueError("t must be >= 0")
    return epsilon_kernel(lam, t)


def variance_decay(sigma2_s, lam: float, dt):
    """OU flow between jumps: ``e^{-lam dt} sigma2_s``."""
    if np.any(np.asarray(dt) < 0.0):
        raise ValueError("dt must be >= 0")
    return np.exp(-lam * np.asarray(dt)) * sigma2_s


@dataclass(frozen=True)
class BnsParams:
    """Full model parameterisation.

    ``lam`` lives only in ``measure``; ``mu`` is derived once at construction.
    Construction fails unless both admissibility conditions hold at ``T``.
    """

    S0: float
    sigma0_sq: float
    rho: float
    r: float
    T: float
    measure: LevyMeasureSpec
    mu: float = field(init=False)

    def __post_init__(self):
        if not self.S0 > 0.0:
            raise ParameterError("S0 must be > 0")
        if not self.sigma0_sq > 0.0:
            raise ParameterError("sigma0_sq must be > 0")
        if self.rho > 0.0:
            raise ParameterError(f"rho must be <= 0, got {self.rho}")
        if self.r < 0.0:
            raise ParameterError("r must be >= 0")
        if not self.T > 0.0:
            raise ParameterError("T must be > 0")
        chk = assumption2_holds(self.measure, self.T)
        if not chk.holds:
            lhs = "b^2/2" if self.measure.variant is Variant.IG_OU else "b"
            raise ParameterError(
                f"exponential-moment condition fails: {lhs} > 2 eps(T) violated (slack {chk.slack:.6g})"
            )
        object.__setattr__(self, "mu", derive_mu(self.measure, self.rho))

    @property
    def lam(self) -> float:
        return self.measure.lam

    @property
    def x0(self) -> float:
        return math.log(self.S0)

    @property
    def variance_floor(self) -> float:
        """``e^{-lam T} sigma0^2``, the pathwise lower bound of the variance."""
        return math.exp(-self.lam * self.T) * self.sigma0_sq

    def initial_state(self) -> "MarketState":
        return MarketState(0.0, self.x0, self.sigma0_sq)

    def with_(self, **kw) -> "BnsParams":
        base = dict(S0=self.S0, sigma0_sq=self.sigma0_sq, rho=self.rho, r=self.r, T=self.T,
                    measure=self.measure)
        base.update(kw)
        return BnsParams(**base)


@dataclass(frozen=True)
class MarketState:
    t: float
    x: float
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise ValueError("sigma2 must be > 0")


def integrated_variance(state: MarketState, jump_times, jump_sizes, T: float, lam: float,
                        drift: float = 0.0) -> float:
    """Exact ``int_t^T sigma^2_u du`` given the jumps on ``(t, T]``.

    ``drift`` is a deterministic rate of variance inflow (used to put back the
    mean of jumps discarded by truncation).
    """
    times = np.asarray(jump_times, dtype=float)
    sizes = np.asarray(jump_sizes, dtype=float)
    if times.size and (times.min() <= state.t or times.max() > T):
        raise ValueError("jump times must lie in (t, T]")
    tau = T - state.t
    eps_tau = float(epsilon_kernel(lam, tau))
    iv = eps_tau * state.sigma2 + float(np.sum(epsilon_kernel(lam, T - times) * sizes))
    if drift:
        iv += drift * (tau - eps_tau) / lam
    return iv


def avg_future_variance(state: MarketState, params: BnsParams) -> float:
    """Average of ``E[sigma^2_u | sigma^2_t]`` over ``[t, T]``."""
    tau = params.T - state.t
    if not tau > 0.0:
        raise ValueError("needs t < T")
    w = float(epsilon_kernel(params.lam, tau)) / tau
    return w * state.sigma2 + (1.0 - w) * moment(params.measure, 1) / params.lam
