"""Monte-Carlo estimation of every term of the call-price decomposition

    V_t = BS_t + tau_t Lbar BS_t + I1 + I2 + I3 + I4 + I5

on one set of simulated paths, so that the residual
``V_t - (BS_t + tau_t Lbar BS_t + sum I_k)`` is a single pathwise sample mean.

The time integrals over ``[t, T]`` use Gauss-Legendre nodes in
``s = sqrt(T - u)``; the substitution removes the ``sqrt(tau)`` endpoint
behaviour of the greeks. At every node the exact joint law of
``(X_u, sigma^2_u)`` is simulated and the nu-integrals are read from
strike-normalised spline tables (see :mod:`bnsdecomp.tables`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .bns_model import BnsParams, MarketState
from .bs_core import BsPoint, bs_n, bs_price, lbar_bs, vega_n
from .levy_measures import _gauss_legendre
from .path_engine import SimConfig, conditional_call_values, sample_jump_batch, simulate_states
from .tables import build_node_tables

__all__ = [
    "Estimate",
    "DecompositionReport",
    "time_rule",
    "decompose",
    "decompose_many",
    "estimate_i1",
    "estimate_i2",
    "estimate_i3_i4_i5",
    "grid_refinement",
]

TERMS = ("i1", "i2", "i2_vol_jump", "i3", "i4", "i5", "lbar_integral")


@dataclass(frozen=True)
class Estimate:
    estimate: float
    std_error: float

    @classmethod
    def of(cls, samples: np.ndarray) -> "Estimate":
        n = samples.size
        se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(float(samples.mean()), se)

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.estimate - target) <= k * self.std_error


@dataclass(frozen=True)
class DecompositionReport:
    t: float
    T: float
    K: float
    n_paths: int
    bs_term: float
    jump_principal: float
    i1: Estimate
    i2: Estimate
    i3: Estimate
    i4: Estimate
    i5: Estimate
    i2_vol_jump: Estimate
    i2_joint_jump: Estimate
    reference_price: Estimate
    residual: float
    residual_se: float
    lbar_integral: Estimate
    lbar_gap: Estimate
    lbar_gap_combined_se: float
    samples: dict | None = field(default=None, repr=False, compare=False)

    @property
    def total(self) -> float:
        return (self.bs_term + self.jump_principal + self.i1.estimate + self.i2.estimate
                + self.i3.estimate + self.i4.estimate + self.i5.estimate)

    def identity_holds(self, k: float = 3.0) -> bool:
        return abs(self.residual) <= k * self.residual_se

    def lbar_identity_holds(self, k: float = 3.0) -> bool:
        return abs(self.lbar_gap.estimate) <= k * self.lbar_gap_combined_se

    def row(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "samples":
                continue
            if isinstance(val, Estimate):
                out[f.name] = val.estimate
                out[f.name + "_se"] = val.std_error
            else:
                out[f.name] = val
        return out

    def text(self) -> str:
        lines = [f"K={self.K:g}  T={self.T:g}  t={self.t:g}  paths={self.n_paths}",
                 f"  BS_t                {self.bs_term:14.6f}",
                 f"  tau*LbarBS_t        {self.jump_principal:14.6f}"]
        for name in ("i1", "i2", "i2_vol_jump", "i2_joint_jump", "i3", "i4", "i5"):
            e = getattr(self, name)
            lines.append(f"  {name:<18}  {e.estimate:14.6f}  +- {e.std_error:.6f}")
        lines.append(f"  reference V_t       {self.reference_price.estimate:14.6f}  +- {self.reference_price.std_error:.6f}")
        lines.append(f"  sum of terms        {self.total:14.6f}")
        verdict = "ok" if self.identity_holds() else "FAIL"
        lines.append(f"  residual            {self.residual:14.6f}  +- {self.residual_se:.6f}  [{verdict}]")
        return "\n".join(lines)


def time_rule(tau_t: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``tau_i`` in ``(0, tau_t)`` and weights for ``int_0^tau_t f(tau) dtau``.

    Gauss-Legendre in ``s = sqrt(tau)``, so ``dtau = 2 s ds``.
    """
    x, w = _gauss_legendre(n)  # nodes on (0, 1)
    root = math.sqrt(tau_t)
    s = root * x
    return s * s, 2.0 * w * root * s


@dataclass
class _Accumulator:
    """Per-path running sums of every term, one set per (rule, strike)."""

    n_paths: int
    n_strikes: int
    data: dict = field(default_factory=dict)

    def add(self, key: str, k: int, values: np.ndarray) -> None:
        arr = self.data.setdefault(key, np.zeros((self.n_strikes, self.n_paths)))
        arr[k] += values


def _principal(params: BnsParams, state: MarketState, K: float) -> tuple[float, float]:
    p = BsPoint(state.t, state.x, state.sigma2, K, params.r, params.T)
    bs = bs_price(p)
    if params.rho == 0.0:
        return bs, 0.0
    return bs, p.tau * lbar_bs(p, params.rho, params.measure).value


def _path_sums(params: BnsParams, state: MarketState, strikes: np.ndarray, cfg: SimConfig,
               node_counts: tuple[int, ...], dxi: float, deta: float):
    tau_t = params.T - state.t
    rules = [time_rule(tau_t, n) for n in node_counts]
    taus = np.unique(np.concatenate([r_[0] for r_ in rules]))[::-1]  # increasing u
    grid = params.T - taus
    batch = sample_jump_batch(params, cfg, state.t, params.T)
    ps = simulate_states(params, state, cfg, grid, batch=batch)
    log_k = np.log(strikes)
    lam, mu, rho, r = params.lam, params.mu, params.rho, params.r
    accs = [_Accumulator(cfg.n_paths, strikes.size) for _ in rules]
    weights = []
    for tau_i, w_i in rules:
        weights.append(dict(zip(tau_i.tolist(), w_i.tolist())))
    for j, tau in enumerate(taus):
        x = ps.x[:, j]
        v = ps.sigma2[:, j]
        tabs = build_node_tables(float(tau), r, rho, params.measure,
                                 float(x.min() - log_k.max()), float(x.max() - log_k.min()),
                                 float(v.min()), float(v.max()), dxi=dxi, deta=deta)
        disc = math.exp(-r * (params.T - tau - state.t))
        for k, (K, lk) in enumerate(zip(strikes, log_k)):
            mm = x - lk
            terms = {
                "i1": vega_n(tau, mm, v, r) * (-lam * v),
                "i2": tabs("I2", mm, v),
                "i2_vol_jump": tabs("I2v", mm, v),
            }
            if rho != 0.0:
                terms["i3"] = tau * mu * tabs("Lx", mm, v)
                terms["i4"] = tau * (-lam * v) * tabs("Lv", mm, v)
                terms["i5"] = tau * tabs("J5", mm, v)
                terms["lbar_integral"] = tabs("L", mm, v)
            for acc, wmap in zip(accs, weights):
                w = wmap.get(float(tau))
                if w is None:
                    continue
                for key, val in terms.items():
                    acc.add(key, k, (K * disc * w) * val)
    ref = conditional_call_values(params, state, ps.iv_total, ps.h_total, strikes).T
    return accs, ref


def _report(params, state, K, acc_k: dict, ref: np.ndarray, keep: bool) -> DecompositionReport:
    n = ref.size
    zero = np.zeros(n)
    s = {name: acc_k.get(name, zero) for name in TERMS}
    bs, principal = _principal(params, state, K)
    joint = s["i2"] - s["i2_vol_jump"]
    total = bs + principal + s["i1"] + s["i2"] + s["i3"] + s["i4"] + s["i5"]
    resid = ref - total
    lhs = s["i3"] + s["i4"] + s["i5"]
    rhs = s["lbar_integral"] - principal
    gap = lhs - rhs
    lhs_e, rhs_e = Estimate.of(lhs), Estimate.of(rhs)
    res_e = Estimate.of(resid)
    samples = None
    if keep:
        samples = {**s, "i2_joint_jump": joint, "reference": ref, "residual": resid}
    return DecompositionReport(
        t=state.t, T=params.T, K=float(K), n_paths=n,
        bs_term=bs, jump_principal=principal,
        i1=Estimate.of(s["i1"]), i2=Estimate.of(s["i2"]),
        i3=Estimate.of(s["i3"]), i4=Estimate.of(s["i4"]), i5=Estimate.of(s["i5"]),
        i2_vol_jump=Estimate.of(s["i2_vol_jump"]), i2_joint_jump=Estimate.of(joint),
        reference_price=Estimate.of(ref),
        residual=res_e.estimate, residual_se=res_e.std_error,
        lbar_integral=Estimate.of(s["lbar_integral"]),
        lbar_gap=Estimate.of(gap),
        lbar_gap_combined_se=math.hypot(lhs_e.std_error, rhs_e.std_error),
        samples=samples,
    )


def _degenerate(params: BnsParams, state: MarketState, K: float) -> DecompositionReport:
    payoff = bs_price(BsPoint(state.t, state.x, state.sigma2, K, params.r, params.T))
    z = Estimate(0.0, 0.0)
    return DecompositionReport(state.t, params.T, float(K), 0, payoff, 0.0, z, z, z, z, z, z, z,
                               Estimate(payoff, 0.0), 0.0, 0.0, z, z, 0.0)


def decompose_many(params: BnsParams, state: MarketState, strikes, cfg: SimConfig,
                   keep_samples: bool = False, dxi: float = 0.1, deta: float = 0.1) -> list[DecompositionReport]:
    """Reports for several strikes at the horizon ``params.T``, all on one path set."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes <= 0.0):
        raise ValueError("strikes must be positive")
    if state.t > params.T:
        raise ValueError("state time beyond the horizon")
    if state.t == params.T:
        return [_degenerate(params, state, K) for K in strikes]
    if cfg.n_paths < 2:
        raise ValueError("at least two paths are needed for standard errors")
    accs, ref = _path_sums(params, state, strikes, cfg, (cfg.time_nodes,), dxi, deta)
    acc = accs[0]
    return [_report(params, state, K, {key: arr[k] for key, arr in acc.data.items()}, ref[k], keep_samples)
            for k, K in enumerate(strikes)]


def decompose(params: BnsParams, state: MarketState, K: float, cfg: SimConfig,
              keep_samples: bool = False) -> DecompositionReport:
    """Decomposition report for one strike."""
    return decompose_many(params, state, [K], cfg, keep_samples)[0]


def estimate_i1(params: BnsParams, state: MarketState, K: float, cfg: SimConfig) -> Estimate:
    return decompose(params, state, K, cfg).i1


def estimate_i2(params: BnsParams, state: MarketState, K: float, cfg: SimConfig) -> tuple[Estimate, Estimate, Estimate]:
    """``(I2, vol-jump part, joint-jump part)``."""
    rep = decompose(params, state, K, cfg)
    return rep.i2, rep.i2_vol_jump, rep.i2_joint_jump


def estimate_i3_i4_i5(params: BnsParams, state: MarketState, K: float, cfg: SimConfig) -> tuple[Estimate, Estimate, Estimate]:
    rep = decompose(params, state, K, cfg)
    return rep.i3, rep.i4, rep.i5


@dataclass(frozen=True)
class GridRefinement:
    """Shift of every term when the number of time nodes doubles (same paths)."""

    coarse: int
    fine: int
    shift: dict
    std_error: dict

    def subordinate(self) -> bool:
        return all(abs(self.shift[k]) < self.std_error[k] for k in self.shift)


def grid_refinement(params: BnsParams, state: MarketState, K: float, cfg: SimConfig,
                    dxi: float = 0.1, deta: float = 0.1) -> GridRefinement:
    """Compare ``n`` and ``2n`` time nodes on one simulation of the union grid."""
    n = cfg.time_nodes
    accs, _ = _path_sums(params, state, np.array([float(K)]), cfg, (n, 2 * n), dxi, deta)
    coarse, fine = accs
    shift, se = {}, {}
    for key in ("i1", "i2", "i3", "i4", "i5"):
        if key not in coarse.data:
            continue
        a, b = coarse.data[key][0], fine.data[key][0]
        shift[key] = float(b.mean() - a.mean())
        se[key] = Estimate.of(b).std_error
    return GridRefinement(n, 2 * n, shift, se)
