"""Black-Scholes call function, its greeks and the jump operators built on it.

Scalar entry points take a :class:`BsPoint`. The ``*_n`` kernels are the
vectorised strike-normalised versions (``K = 1``, ``m = x - log K``) used to
build integrand tables; every call price scales linearly in ``K`` at fixed
moneyness, so multiplying by ``K`` recovers price units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .levy_measures import (
    LevyMeasureSpec,
    QuadratureResult,
    Variant,
    decay_rate,
    integrate_against_nu,
    nu_rule,
)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class MaturityError(ValueError):
    """A derivative was requested at tau = 0, where only the price is defined."""


def norm_pdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def norm_cdf(x):
    return ndtr(x)


def phi_diff(a, h):
    """``Phi(a + h) - Phi(a)`` evaluated on whichever tail keeps precision."""
    a = np.asarray(a, dtype=float)
    h = np.asarray(h, dtype=float)
    upper = ndtr(-a) - ndtr(-a - h)
    lower = ndtr(a + h) - ndtr(a)
    return np.where(a > 0.0, upper, lower)


@dataclass(frozen=True)
class BsPoint:
    t: float
    x: float
    sigma2: float
    K: float
    r: float
    T: float

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise ValueError("sigma2 must be > 0")
        if not self.K > 0.0:
            raise ValueError("K must be > 0")
        if not 0.0 <= self.t <= self.T:
            raise ValueError("need 0 <= t <= T")

    @property
    def tau(self) -> float:
        return self.T - self.t

    @property
    def m(self) -> float:
        return self.x - math.log(self.K)

    def shifted(self, **kw) -> "BsPoint":
        return replace(self, **kw)


@dataclass(frozen=True)
class ShiftedArgs:
    d_plus: float
    d_minus: float
    d_plus_rz: float
    d_minus_rz: float
    d_plus_rzz: float
    d_minus_rzz: float


def d_pm(tau, m, v, r):
    s = np.sqrt(v * tau)
    base = (m + r * tau) / s
    return base + 0.5 * s, base - 0.5 * s, s


def shifted_args(p: BsPoint, rho: float, z: float) -> ShiftedArgs:
    tau = p.tau
    if tau <= 0.0:
        raise MaturityError("shifted arguments need tau > 0")
    dp, dm, s = d_pm(tau, p.m, p.sigma2, p.r)
    dpz, dmz, _ = d_pm(tau, p.m + rho * z, p.sigma2 + z, p.r)
    return ShiftedArgs(float(dp), float(dm), float(dp + rho * z / s), float(dm + rho * z / s),
                       float(dpz), float(dmz))


# ---------------------------------------------------------------------------
# strike-normalised vectorised kernels
# ---------------------------------------------------------------------------

def bs_n(tau, m, v, r):
    """Normalised call value ``BS / K``; ``tau = 0`` gives the payoff."""
    tau = np.asarray(tau, dtype=float)
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    live = tau > 0.0
    tau_s = np.where(live, tau, 1.0)
    dp, dm, _ = d_pm(tau_s, m, v, r)
    val = np.exp(m) * ndtr(dp) - np.exp(-r * tau_s) * ndtr(dm)
    return np.where(live, val, np.maximum(np.expm1(m), 0.0))


def dx_n(tau, m, v, r):
    dp, _, _ = d_pm(tau, m, v, r)
    return np.exp(m) * ndtr(dp)


def dxx_n(tau, m, v, r):
    dp, _, s = d_pm(tau, m, v, r)
    return np.exp(m) * (ndtr(dp) + norm_pdf(dp) / s)


def dxxx_n(tau, m, v, r):
    dp, _, s = d_pm(tau, m, v, r)
    ph = norm_pdf(dp)
    return np.exp(m) * (ndtr(dp) + 2.0 * ph / s - dp * ph / (s * s))


def vega_n(tau, m, v, r):
    """``d BS / d sigma^2`` (normalised)."""
    dp, _, s = d_pm(tau, m, v, r)
    return np.exp(m) * norm_pdf(dp) * tau / (2.0 * s)


def dx_vega_n(tau, m, v, r):
    dp, _, s = d_pm(tau, m, v, r)
    return np.exp(m) * norm_pdf(dp) * tau / (2.0 * s) * (1.0 - dp / s)


def lz_n(tau, m, v, r, rho, z):
    """``L^z BS`` in the Phi-difference form (stable as z -> 0)."""
    dp, dm, s = d_pm(tau, m, v, r)
    h = rho * z / s
    return (np.exp(m + rho * z) * phi_diff(dp, h)
            - np.exp(-r * tau) * phi_diff(dm, h))


def lz_dx_n(tau, m, v, r, rho, z):
    """``L^z d_x BS`` (closed integrand of d_x Lbar BS)."""
    dp, _, s = d_pm(tau, m, v, r)
    h = rho * z / s
    return np.exp(m) * (np.exp(rho * z) * phi_diff(dp, h) - norm_pdf(dp) * np.expm1(rho * z) / s)


def lz_dxx_n(tau, m, v, r, rho, z):
    y = rho * z
    return (dxx_n(tau, m + y, v, r) - dxx_n(tau, m, v, r)
            - dxxx_n(tau, m, v, r) * np.expm1(y))


def lz_vega_n(tau, m, v, r, rho, z):
    """``L^z d_{sigma^2} BS``."""
    y = rho * z
    return (vega_n(tau, m + y, v, r) - vega_n(tau, m, v, r)
            - dx_vega_n(tau, m, v, r) * np.expm1(y))


def i2_total_n(tau, m, v, r, rho, z):
    """``(Delta^{rho z, z} - Delta^{rho z, 0}) BS``."""
    y = rho * z
    return bs_n(tau, m + y, v + z, r) - bs_n(tau, m + y, v, r)


def i2_vol_n(tau, m, v, r, z):
    """``Delta^{0, z} BS``, the pure variance-jump part."""
    return bs_n(tau, m, v + z, r) - bs_n(tau, m, v, r)


def feature_window(tau, m, v, r, rho):
    """Per-point z-interval holding the sharp transitions of the shifted integrands.

    The transitions sit where a shifted ``d^+`` or ``d^-`` crosses zero; for a
    shift ``rho z`` that happens near ``z = (m + r tau)/|rho|`` with a width of
    ``sqrt(v tau)/|rho|``. Returns ``(lo, hi)``; ``lo == hi == 0`` means no
    window is needed.
    """
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), m.shape)
    ar = abs(rho)
    if ar == 0.0:
        z0 = np.zeros_like(m)
        return z0, z0
    base = m + r * tau
    z_a = (base - v * tau) / (ar + tau)
    z_b = (base + v * tau) / np.maximum(ar - tau, 0.5 * ar)
    z_mid = 0.5 * (z_a + z_b)
    w_f = np.sqrt((v + np.maximum(z_b, 0.0)) * tau) / ar
    pad = 0.5 * (z_b - z_a) + 8.0 * w_f
    half = np.minimum(pad, 0.5 * z_mid)
    on = z_mid > 0.0
    lo = np.where(on, z_mid - half, 0.0)
    hi = np.where(on, z_mid + half, 0.0)
    return lo, hi


def dyadic_depth(spec: LevyMeasureSpec, rho: float, tau_min: float, v_min: float) -> int:
    """Number of dyadic panels needed so the first panel sits below every feature."""
    scales = [v_min]
    if rho != 0.0:
        scales.append(math.sqrt(v_min * tau_min) / abs(rho))
    z_floor = 0.05 * min(scales)
    zc = 1.0 / decay_rate(spec)
    return int(min(40, max(8, math.ceil(math.log2(zc / z_floor)))))


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------

def bs_price(p: BsPoint) -> float:
    """Call value; the terminal payoff ``(e^x - K)^+`` at ``t = T``."""
    return float(p.K * bs_n(p.tau, p.m, p.sigma2, p.r))


@dataclass(frozen=True)
class BsPartials:
    d_x: float
    d_xx: float
    d_sigma2: float
    d_t: float


def bs_partials(p: BsPoint) -> BsPartials:
    tau = p.tau
    if tau <= 0.0:
        raise MaturityError("partials of BS are not defined at maturity")
    m, v, r, K = p.m, p.sigma2, p.r, p.K
    d_x = K * float(dx_n(tau, m, v, r))
    d_xx = K * float(dxx_n(tau, m, v, r))
    d_s2 = K * float(vega_n(tau, m, v, r))
    price = bs_price(p)
    # theta from the pricing PDE
    d_t = -(0.5 * v * d_xx + (r - 0.5 * v) * d_x - r * price)
    return BsPartials(d_x, d_xx, d_s2, d_t)


def dbs_residual(p: BsPoint, dt_fd_step: float = 1e-4) -> float:
    """Pricing-PDE residual with a central finite difference in t."""
    if not dt_fd_step > 0.0:
        raise ValueError("step must be > 0")
    if p.tau <= dt_fd_step:
        raise ValueError("finite-difference step too large for the time to maturity")
    up = p.K * float(bs_n(p.tau - dt_fd_step, p.m, p.sigma2, p.r))
    dn = p.K * float(bs_n(p.tau + dt_fd_step, p.m, p.sigma2, p.r))
    d_t = (up - dn) / (2.0 * dt_fd_step)
    g = bs_partials(p)
    return d_t + 0.5 * p.sigma2 * g.d_xx + (p.r - 0.5 * p.sigma2) * g.d_x - p.r * bs_price(p)


def phi_identity_gap(p: BsPoint) -> float:
    """``e^x phi(d+) - K e^{-r tau} phi(d-)`` (zero analytically)."""
    if p.tau <= 0.0:
        raise MaturityError("needs tau > 0")
    dp, dm, _ = d_pm(p.tau, p.m, p.sigma2, p.r)
    return float(math.exp(p.x) * norm_pdf(dp) - p.K * math.exp(-p.r * p.tau) * norm_pdf(dm))


def delta_shift(p: BsPoint, a: float, b: float) -> float:
    """``BS(t, x + a, sigma^2 + b) - BS(t, x, sigma^2)``."""
    if not p.sigma2 + b > 0.0:
        raise ValueError("sigma2 + b must stay positive")
    return float(p.K * (bs_n(p.tau, p.m + a, p.sigma2 + b, p.r) - bs_n(p.tau, p.m, p.sigma2, p.r)))


def l_z_bs(p: BsPoint, rho: float, z: float) -> float:
    """``L^z BS = Delta^{rho z, 0} BS + d_x BS (1 - e^{rho z})``."""
    if not z > 0.0:
        raise ValueError("z must be > 0")
    if p.tau <= 0.0:
        raise MaturityError("L^z BS needs tau > 0")
    return delta_shift(p, rho * z, 0.0) - bs_partials(p).d_x * math.expm1(rho * z)


def l_z_bs_expanded(p: BsPoint, rho: float, z: float) -> float:
    """Same operator written as Phi differences; cancellation-free for small z."""
    if not z > 0.0:
        raise ValueError("z must be > 0")
    if p.tau <= 0.0:
        raise MaturityError("L^z BS needs tau > 0")
    return float(p.K * lz_n(p.tau, p.m, p.sigma2, p.r, rho, z))


def _break_points(p: BsPoint, rho: float) -> list[float]:
    if rho == 0.0:
        return []
    dp, dm, s = d_pm(p.tau, p.m, p.sigma2, p.r)
    pts = [float(d) * float(s) / abs(rho) for d in (dp, dm)]
    return sorted(z for z in pts if z > 0.0)


def lbar_bs(p: BsPoint, rho: float, spec: LevyMeasureSpec, tol: float = 1e-7) -> QuadratureResult:
    """``Lbar BS = int L^z BS nu(dz)`` by adaptive quadrature."""
    if p.tau <= 0.0:
        raise MaturityError("Lbar BS needs tau > 0")
    if rho == 0.0:
        return QuadratureResult(0.0, 0.0, 1)
    tau, m, v, r, K = p.tau, p.m, p.sigma2, p.r, p.K
    return integrate_against_nu(
        spec, lambda z: K * float(lz_n(tau, m, v, r, rho, z)), tol=tol,
        points=_break_points(p, rho), check=False,
    )


@dataclass(frozen=True)
class LbarPartials:
    d_x: QuadratureResult
    d_xx: QuadratureResult
    d_sigma2: QuadratureResult


def lbar_bs_partials(p: BsPoint, rho: float, spec: LevyMeasureSpec, tol: float = 1e-7) -> LbarPartials:
    """Partials of ``Lbar BS`` computed as ``Lbar`` of the partials of BS."""
    if p.tau <= 0.0:
        raise MaturityError("needs tau > 0")
    if rho == 0.0:
        zero = QuadratureResult(0.0, 0.0, 1)
        return LbarPartials(zero, zero, zero)
    tau, m, v, r, K = p.tau, p.m, p.sigma2, p.r, p.K
    pts = _break_points(p, rho)

    def q(fn):
        return integrate_against_nu(spec, lambda z: K * float(fn(tau, m, v, r, rho, z)),
                                    tol=tol, points=pts, check=False)

    return LbarPartials(q(lz_dx_n), q(lz_dxx_n), q(lz_vega_n))


def delta_shift_lbar(p: BsPoint, rho: float, spec: LevyMeasureSpec, z: float, tol: float = 1e-9) -> float:
    """``Lbar BS(t, x + rho z, sigma^2 + z) - Lbar BS(t, x, sigma^2)``."""
    if not z > 0.0:
        raise ValueError("z must be > 0")
    if rho == 0.0:
        return 0.0
    shifted = p.shifted(x=p.x + rho * z, sigma2=p.sigma2 + z)
    return lbar_bs(shifted, rho, spec, tol).value - lbar_bs(p, rho, spec, tol).value


def delta_shift_lbar_double(p: BsPoint, rho: float, spec: LevyMeasureSpec, z: float,
                            inner_nodes: int = 48) -> float:
    """Same quantity via the single-sign double integral over (w, zeta).

    ``rho e^x / sqrt(tau) int nu(dw) int_0^w (e^{rho w} - e^{rho zeta})
    [e^{rho z} phi(d+_{rho z + rho zeta, z}) / sigma_z - phi(d+_{rho zeta}) / sigma] dzeta``
    """
    if p.tau <= 0.0:
        raise MaturityError("needs tau > 0")
    if rho == 0.0:
        return 0.0
    tau, m, v, r = p.tau, p.m, p.sigma2, p.r
    sq = math.sqrt(tau)
    sig, sig_z = math.sqrt(v), math.sqrt(v + z)
    w_nodes, w_wts = nu_rule(spec)
    x, wx = np.polynomial.legendre.leggauss(inner_nodes)
    x, wx = 0.5 * (x + 1.0), 0.5 * wx
    zeta = w_nodes[:, None] * x[None, :]
    dzeta = w_nodes[:, None] * wx[None, :]
    dp_shift_z, _, _ = d_pm(tau, m + rho * z + rho * zeta, v + z, r)
    dp_plain, _, _ = d_pm(tau, m + rho * zeta, v, r)
    kern = math.exp(rho * z) * norm_pdf(dp_shift_z) / sig_z - norm_pdf(dp_plain) / sig
    inner = ((np.exp(rho * w_nodes)[:, None] - np.exp(rho * zeta)) * kern * dzeta).sum(axis=1)
    return float(rho * p.K * math.exp(m) / sq * (inner * w_wts).sum())


# ---------------------------------------------------------------------------
# vectorised nu-integrals (fixed composite rule with feature windows)
# ---------------------------------------------------------------------------

def _rule_for(spec, tau, m, v, r, rho, n_dyadic):
    lo, hi = feature_window(tau, m, v, r, rho)
    return nu_rule(spec, lo, hi, panel_nodes=6, window_panels=12, n_dyadic=n_dyadic)


def lbar_family_n(tau: float, m, v, r: float, rho: float, spec: LevyMeasureSpec,
                  n_dyadic: int = 16, chunk: int = 2048, which=("L", "Lx", "Lv")):
    """Normalised ``Lbar BS`` and its x / sigma^2 partials at many points (one tau)."""
    m = np.ravel(np.asarray(m, dtype=float))
    v = np.ravel(np.asarray(v, dtype=float))
    out = {k: np.zeros_like(m) for k in which}
    if rho == 0.0:
        return out
    fns = {"L": lz_n, "Lx": lz_dx_n, "Lv": lz_vega_n, "Lxx": lz_dxx_n}
    for i in range(0, m.size, chunk):
        sl = slice(i, i + chunk)
        mm, vv = m[sl], v[sl]
        z, w = _rule_for(spec, tau, mm, vv, r, rho, n_dyadic)
        for k in which:
            out[k][sl] = (fns[k](tau, mm[:, None], vv[:, None], r, rho, z) * w).sum(axis=1)
    return out


def i2_family_n(tau: float, m, v, r: float, rho: float, spec: LevyMeasureSpec,
                n_dyadic: int = 16, chunk: int = 2048):
    """Normalised I2 integrand (total and pure-variance part) at many points."""
    m = np.ravel(np.asarray(m, dtype=float))
    v = np.ravel(np.asarray(v, dtype=float))
    tot = np.empty_like(m)
    vol = np.empty_like(m)
    for i in range(0, m.size, chunk):
        sl = slice(i, i + chunk)
        mm, vv = m[sl][:, None], v[sl][:, None]
        z, w = _rule_for(spec, tau, m[sl], v[sl], r, rho, n_dyadic)
        tot[sl] = (i2_total_n(tau, mm, vv, r, rho, z) * w).sum(axis=1)
        vol[sl] = (i2_vol_n(tau, mm, vv, r, z) * w).sum(axis=1)
    return tot, vol
