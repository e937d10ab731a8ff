"""Jump-path sampling, exact state evolution and the reference Monte-Carlo price.

Jumps of ``H_lambda`` are generated by the inverse tail-intensity series:
unit-rate Poisson arrivals ``Gamma_k`` are mapped to sizes
``z_k = U^{-1}(Gamma_k / tau)`` with ``U(z) = nu((z, inf))`` and stopped once
``z_k`` falls below the truncation level. Sizes come out in decreasing order,
so lowering the truncation only appends smaller jumps to the same path.
For the finite gamma-OU measure the series with zero truncation is exact
compound-Poisson sampling. Between jumps the variance follows its OU flow
exactly and the log-price is conditionally Gaussian, so no time-stepping
error enters anywhere.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import rng as rng_mod
from .bns_model import BnsParams, MarketState, integrated_variance
from .levy_measures import Variant, epsilon_kernel, tail_mass, tail_mass_inverse, truncated_first_moment

__all__ = [
    "SmallJumpPolicy",
    "SimConfig",
    "JumpPath",
    "JumpBatch",
    "PathStates",
    "PriceEstimate",
    "sample_jump_path",
    "sample_jump_batch",
    "terminal_state",
    "state_path_on_grid",
    "simulate_states",
    "mc_price",
    "write_path_csv",
]

_CHUNK = 32
_STRIKE_CHUNK = 16


class SmallJumpPolicy(str, enum.Enum):
    DISCARD = "DISCARD"
    ADD_DETERMINISTIC_DRIFT = "ADD_DETERMINISTIC_DRIFT"


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    seed: int = 20240601
    ig_truncation: float = 1e-6
    small_jump_policy: SmallJumpPolicy = SmallJumpPolicy.ADD_DETERMINISTIC_DRIFT
    time_nodes: int = 32
    block_size: int = rng_mod.BLOCK_SIZE

    def __post_init__(self):
        object.__setattr__(self, "small_jump_policy", SmallJumpPolicy(self.small_jump_policy))
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.ig_truncation > 0.0:
            raise ValueError("ig_truncation must be > 0")
        if self.time_nodes < 1:
            raise ValueError("time_nodes must be >= 1")


def _truncation(params: BnsParams, cfg: SimConfig) -> float:
    return cfg.ig_truncation if params.measure.variant is Variant.IG_OU else 0.0


def _drift(params: BnsParams, cfg: SimConfig) -> tuple[float, float]:
    """(compensated small-jump mass per unit time, drift actually applied)."""
    eps = _truncation(params, cfg)
    mass = truncated_first_moment(params.measure, eps) if eps > 0.0 else 0.0
    applied = mass if cfg.small_jump_policy is SmallJumpPolicy.ADD_DETERMINISTIC_DRIFT else 0.0
    return mass, applied


@dataclass(frozen=True)
class JumpPath:
    times: np.ndarray
    sizes: np.ndarray
    truncation_level: float = 0.0
    compensated_small_jump_mass: float = 0.0
    drift: float = 0.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        sizes = np.asarray(self.sizes, dtype=float)
        if times.shape != sizes.shape:
            raise ValueError("times and sizes must align")
        if times.size > 1 and np.any(np.diff(times) <= 0.0):
            raise ValueError("jump times must be strictly increasing")
        if np.any(sizes <= self.truncation_level):
            raise ValueError("jump sizes must exceed the truncation level")
        if self.compensated_small_jump_mass < 0.0:
            raise ValueError("compensated mass must be >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sizes", sizes)

    def total_size(self) -> float:
        return float(self.sizes.sum())


@dataclass(frozen=True)
class JumpBatch:
    """Jumps of many paths in flat arrays sorted by (path, time)."""

    path: np.ndarray
    times: np.ndarray
    sizes: np.ndarray
    n_paths: int
    t0: float
    T: float
    truncation_level: float
    compensated_small_jump_mass: float
    drift: float

    def counts(self) -> np.ndarray:
        return np.bincount(self.path, minlength=self.n_paths)

    def total_sizes(self) -> np.ndarray:
        return np.bincount(self.path, weights=self.sizes, minlength=self.n_paths)

    def h_increment(self) -> np.ndarray:
        """``H_{lambda T} - H_{lambda t0}`` per path, compensation included."""
        return self.total_sizes() + self.drift * (self.T - self.t0)

    def path_jumps(self, i: int) -> JumpPath:
        sel = self.path == i
        return JumpPath(self.times[sel], self.sizes[sel], self.truncation_level,
                        self.compensated_small_jump_mass, self.drift)


def _series_sizes(params: BnsParams, level: np.ndarray, tau: float) -> np.ndarray:
    return tail_mass_inverse(params.measure, level / tau)


def _sample_block(params, eps, tau, t0, gen_arr, gen_time, size):
    """Jumps for one block of paths: returns (row, time, size) arrays."""
    spec = params.measure
    cutoff = tau * (tail_mass(spec, eps) if eps > 0.0 else spec.total_mass)
    gam = np.zeros(size)
    rows, times, sizes = [], [], []
    active = np.ones(size, dtype=bool)
    while active.any():
        e = gen_arr.standard_exponential((_CHUNK, size))
        u = gen_time.random((_CHUNK, size))
        g = gam[None, :] + np.cumsum(e, axis=0)
        gam = g[-1]
        keep = (g < cutoff) & active[None, :]
        k_idx, p_idx = np.nonzero(keep)
        if k_idx.size:
            lev = g[k_idx, p_idx]
            rows.append(p_idx)
            sizes.append(_series_sizes(params, lev, tau))
            times.append(t0 + tau * (1.0 - u[k_idx, p_idx]))
        active &= gam < cutoff
    if not rows:
        return np.zeros(0, int), np.zeros(0), np.zeros(0)
    return np.concatenate(rows), np.concatenate(times), np.concatenate(sizes)


def sample_jump_batch(params: BnsParams, cfg: SimConfig, t0: float = 0.0, T: float | None = None) -> JumpBatch:
    """Jumps on ``(t0, T]`` for paths ``0..n_paths-1`` from the seeded block streams."""
    T = params.T if T is None else T
    tau = T - t0
    if not tau > 0.0:
        raise ValueError("need t0 < T")
    eps = _truncation(params, cfg)
    mass, drift = _drift(params, cfg)
    bs = cfg.block_size
    paths, times, sizes = [], [], []
    for b in range(rng_mod.n_blocks(cfg.n_paths, bs)):
        ga = rng_mod.stream(cfg.seed, rng_mod.Purpose.JUMP_ARRIVALS, b)
        gt = rng_mod.stream(cfg.seed, rng_mod.Purpose.JUMP_TIMES, b)
        row, tm, sz = _sample_block(params, eps, tau, t0, ga, gt, bs)
        pid = row + b * bs
        ok = pid < cfg.n_paths
        paths.append(pid[ok])
        times.append(tm[ok])
        sizes.append(sz[ok])
    path = np.concatenate(paths)
    tm = np.concatenate(times)
    sz = np.concatenate(sizes)
    order = np.lexsort((tm, path))
    return JumpBatch(path[order], tm[order], sz[order], cfg.n_paths, t0, T, eps, mass, drift)


def sample_jump_path(params: BnsParams, cfg: SimConfig, rng_stream: np.random.Generator,
                     t0: float = 0.0, T: float | None = None) -> JumpPath:
    """One jump path on ``(t0, T]`` drawn from ``rng_stream``."""
    T = params.T if T is None else T
    tau = T - t0
    eps = _truncation(params, cfg)
    mass, drift = _drift(params, cfg)
    spec = params.measure
    cutoff = tau * (tail_mass(spec, eps) if eps > 0.0 else spec.total_mass)
    levels, times = [], []
    g = rng_stream.standard_exponential()
    while g < cutoff:
        levels.append(g)
        times.append(t0 + tau * (1.0 - rng_stream.random()))
        g += rng_stream.standard_exponential()
    if not levels:
        return JumpPath(np.zeros(0), np.zeros(0), eps, mass, drift)
    sizes = np.atleast_1d(_series_sizes(params, np.asarray(levels), tau))
    times = np.asarray(times)
    order = np.argsort(times)
    return JumpPath(times[order], sizes[order], eps, mass, drift)


def terminal_state(params: BnsParams, state: MarketState, jumps: JumpPath, gaussian: float,
                   T: float | None = None) -> MarketState:
    """Exact draw of ``(X_T, sigma^2_T)`` given the jump path and one normal."""
    T = params.T if T is None else T
    tau = T - state.t
    lam = params.lam
    iv = integrated_variance(state, jumps.times, jumps.sizes, T, lam, jumps.drift)
    dh = jumps.total_size() + jumps.drift * tau
    x_T = state.x + (params.r + params.mu) * tau - 0.5 * iv + params.rho * dh + math.sqrt(iv) * gaussian
    s2 = (math.exp(-lam * tau) * state.sigma2
          + float(np.sum(np.exp(-lam * (T - jumps.times)) * jumps.sizes))
          + jumps.drift * float(epsilon_kernel(lam, tau)))
    return MarketState(T, x_T, s2)


def state_path_on_grid(params: BnsParams, state: MarketState, jumps: JumpPath,
                       rng_stream: np.random.Generator, grid) -> list[MarketState]:
    """States at every grid time in ``(t, T]``, one Gaussian per grid cell."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0.0) or grid[0] <= state.t:
        raise ValueError("grid must be strictly increasing and lie in (t, T]")
    out = []
    cur = state
    for g in grid:
        sel = (jumps.times > cur.t) & (jumps.times <= g)
        seg = JumpPath(jumps.times[sel], jumps.sizes[sel], jumps.truncation_level,
                       jumps.compensated_small_jump_mass, jumps.drift)
        cur = terminal_state(params, cur, seg, float(rng_stream.standard_normal()), T=g)
        out.append(cur)
    return out


@dataclass(frozen=True)
class PathStates:
    """States of all paths on a common grid (last node is the horizon)."""

    grid: np.ndarray
    x: np.ndarray
    sigma2: np.ndarray
    cum_iv: np.ndarray
    h: np.ndarray

    @property
    def x_T(self) -> np.ndarray:
        return self.x[:, -1]

    @property
    def iv_total(self) -> np.ndarray:
        return self.cum_iv[:, -1]

    @property
    def h_total(self) -> np.ndarray:
        return self.h[:, -1]


def _gaussians(cfg: SimConfig, n_cells: int) -> np.ndarray:
    bs = cfg.block_size
    blocks = []
    for b in range(rng_mod.n_blocks(cfg.n_paths, bs)):
        g = rng_mod.stream(cfg.seed, rng_mod.Purpose.GAUSS, b)
        blocks.append(g.standard_normal((bs, n_cells)))
    return np.concatenate(blocks)[: cfg.n_paths]


def _variance_on_grid(params: BnsParams, state: MarketState, batch: JumpBatch, grid: np.ndarray):
    lam = params.lam
    n, k = batch.n_paths, grid.size
    cell = np.searchsorted(grid, batch.times, side="left")
    flat = batch.path * k + cell
    a = np.bincount(flat, weights=batch.sizes * np.exp(lam * (batch.times - batch.T)), minlength=n * k)
    b = np.bincount(flat, weights=batch.sizes, minlength=n * k)
    cum_a = np.cumsum(a.reshape(n, k), axis=1)
    cum_b = np.cumsum(b.reshape(n, k), axis=1)
    dt = grid - state.t
    back = np.exp(-lam * (grid - batch.T))
    eps = epsilon_kernel(lam, dt)
    decayed_jumps = back[None, :] * cum_a
    sigma2 = (np.exp(-lam * dt) * state.sigma2)[None, :] + decayed_jumps + batch.drift * eps[None, :]
    cum_iv = (eps * state.sigma2)[None, :] + (cum_b - decayed_jumps) / lam
    if batch.drift:
        cum_iv = cum_iv + (batch.drift * (dt - eps) / lam)[None, :]
    h = cum_b + batch.drift * dt[None, :]
    cum_iv = np.maximum.accumulate(np.maximum(cum_iv, 0.0), axis=1)
    return sigma2, cum_iv, h


def simulate_states(params: BnsParams, state: MarketState, cfg: SimConfig, grid,
                    batch: JumpBatch | None = None) -> PathStates:
    """Exact joint law of ``(X, sigma^2)`` at the grid nodes for all paths.

    ``grid`` must be increasing inside ``(t, T]``; the horizon is appended if
    missing. Each cell consumes one standard normal.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or grid[-1] < params.T:
        grid = np.append(grid, params.T)
    if np.any(np.diff(grid) <= 0.0) or grid[0] <= state.t:
        raise ValueError("grid must be strictly increasing inside (t, T]")
    if batch is None:
        batch = sample_jump_batch(params, cfg, state.t, params.T)
    sigma2, cum_iv, h = _variance_on_grid(params, state, batch, grid)
    z = _gaussians(cfg, grid.size)
    d_iv = np.diff(cum_iv, axis=1, prepend=0.0)
    x = (state.x + (params.r + params.mu) * (grid - state.t))[None, :] - 0.5 * cum_iv + params.rho * h
    x = x + np.cumsum(np.sqrt(d_iv) * z, axis=1)
    return PathStates(grid, x, sigma2, cum_iv, h)


@dataclass(frozen=True)
class PriceEstimate:
    price: np.ndarray | float
    std_error: np.ndarray | float
    samples: np.ndarray | None = None


def conditional_call_values(params: BnsParams, state: MarketState, iv, dh, K) -> np.ndarray:
    """Discounted call value given the jump path, Brownian part integrated out.

    Shape ``(n_paths, n_strikes)``.
    """
    tau = params.T - state.t
    iv = np.asarray(iv, dtype=float)[:, None]
    dh = np.asarray(dh, dtype=float)[:, None]
    K = np.atleast_1d(np.asarray(K, dtype=float))[None, :]
    sd = np.sqrt(iv)
    fwd_log = state.x + params.mu * tau + params.rho * dh  # log of e^{-r tau} E[S_T | jumps]
    d1 = (fwd_log + params.r * tau - np.log(K) + 0.5 * iv) / sd
    d2 = d1 - sd
    return np.exp(fwd_log) * ndtr(d1) - K * math.exp(-params.r * tau) * ndtr(d2)


def mc_price(params: BnsParams, state: MarketState, K, cfg: SimConfig, plain: bool = False,
             keep_samples: bool = False, batch: JumpBatch | None = None) -> PriceEstimate:
    """Reference price ``e^{-r tau} E[(S_T - K)^+ | X_t, sigma^2_t]``.

    The default estimator integrates the Brownian part in closed form per jump
    path; ``plain=True`` averages discounted payoffs instead.
    """
    if cfg.n_paths < 2:
        raise ValueError("at least two paths are needed for a standard error")
    tau = params.T - state.t
    if not tau > 0.0:
        raise ValueError("needs t < T")
    scalar = np.ndim(K) == 0
    if batch is None:
        batch = sample_jump_batch(params, cfg, state.t, params.T)
    k_all = np.atleast_1d(np.asarray(K, dtype=float))
    if plain:
        x_T = simulate_states(params, state, cfg, [params.T], batch=batch).x_T
    else:
        iv, dh = _total_iv(params, state, batch), batch.h_increment()
    price, se, kept = [], [], []
    for lo in range(0, k_all.size, _STRIKE_CHUNK):
        k = k_all[lo:lo + _STRIKE_CHUNK]
        if plain:
            vals = math.exp(-params.r * tau) * np.maximum(np.exp(x_T)[:, None] - k[None, :], 0.0)
        else:
            vals = conditional_call_values(params, state, iv, dh, k)
        price.append(vals.mean(axis=0))
        se.append(vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0]))
        if keep_samples:
            kept.append(vals)
    price, se = np.concatenate(price), np.concatenate(se)
    vals = np.concatenate(kept, axis=1) if keep_samples else None
    if scalar:
        return PriceEstimate(float(price[0]), float(se[0]), vals[:, 0] if keep_samples else None)
    return PriceEstimate(price, se, vals)


def _total_iv(params: BnsParams, state: MarketState, batch: JumpBatch) -> np.ndarray:
    _, cum_iv, _ = _variance_on_grid(params, state, batch, np.array([params.T]))
    return cum_iv[:, -1]


def write_path_csv(path, params: BnsParams, cfg: SimConfig, grid, n_dump: int | None = None) -> int:
    """Diagnostic dump: one row per grid time and per jump, for the first paths.

    Columns ``path_id, time, x, sigma2, jump_size``; jump rows carry the
    post-jump state. Returns the number of rows written.
    """
    state = params.initial_state()
    n_dump = cfg.n_paths if n_dump is None else min(n_dump, cfg.n_paths)
    grid = np.asarray(grid, dtype=float)
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "time", "x", "sigma2", "jump_size"])
        for i in range(n_dump):
            gen_j = rng_mod.stream(cfg.seed, rng_mod.Purpose.JUMP_ARRIVALS, 1_000_000 + i)
            gen_g = rng_mod.stream(cfg.seed, rng_mod.Purpose.GAUSS, 1_000_000 + i)
            jp = sample_jump_path(params, cfg, gen_j)
            times = np.union1d(grid[(grid > 0.0) & (grid <= params.T)], jp.times)
            sizes = dict(zip(jp.times.tolist(), jp.sizes.tolist()))
            for t_k, st in zip(times, state_path_on_grid(params, state, jp, gen_g, times)):
                vals = (t_k, st.x, st.sigma2, sizes.get(float(t_k), 0.0))
                w.writerow([i] + [format(float(v), ".17g") for v in vals])
                rows += 1
    return rows
