from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from scipy import stats

from bnsdecomp import rng as rng_mod
from bnsdecomp.bns_model import MarketState
from bnsdecomp.bs_core import BsPoint, bs_price
from bnsdecomp.levy_measures import LevyMeasureSpec, Variant, moment, truncated_first_moment
from bnsdecomp.path_engine import (
    JumpPath,
    SimConfig,
    SmallJumpPolicy,
    conditional_call_values,
    mc_price,
    sample_jump_batch,
    sample_jump_path,
    simulate_states,
    state_path_on_grid,
    terminal_state,
    write_path_csv,
)

from conftest import ref_params


def test_jump_path_invariants():
    with pytest.raises(ValueError):
        JumpPath(np.array([0.2, 0.1]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        JumpPath(np.array([0.1]), np.array([1e-7]), truncation_level=1e-6)
    jp = JumpPath(np.array([0.1, 0.2]), np.array([0.01, 0.02]))
    assert jp.total_size() == pytest.approx(0.03)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n_paths=0)
    with pytest.raises(ValueError):
        SimConfig(ig_truncation=0.0)
    assert SimConfig(small_jump_policy="DISCARD").small_jump_policy is SmallJumpPolicy.DISCARD


def test_gamma_jump_count_and_sizes():
    p = ref_params(T=0.25, variant=Variant.GAMMA_OU)
    cfg = SimConfig(n_paths=100_000, seed=1)
    b = sample_jump_batch(p, cfg)
    counts = b.counts()
    lam_a_T = p.measure.lam * p.measure.a * p.T
    assert abs(counts.mean() - lam_a_T) <= 3 * counts.std(ddof=1) / math.sqrt(counts.size)
    # sizes are Exp(b)
    assert stats.kstest(b.sizes, "expon", args=(0, 1 / p.measure.b)).pvalue > 1e-3
    assert b.truncation_level == 0.0 and b.compensated_small_jump_mass == 0.0


@pytest.mark.parametrize("variant", list(Variant))
def test_mean_and_variance_of_h(variant):
    p = ref_params(T=0.25, variant=variant)
    h = sample_jump_batch(p, SimConfig(n_paths=100_000, seed=2)).h_increment()
    n = h.size
    assert abs(h.mean() - p.T * moment(p.measure, 1)) <= 3 * h.std(ddof=1) / math.sqrt(n)
    var_target = p.T * moment(p.measure, 2)
    c = h - h.mean()
    se_var = math.sqrt(max(np.mean(c**4) - np.mean(c**2) ** 2, 0.0) / n)
    assert abs(h.var(ddof=1) - var_target) <= 3 * se_var


def test_discard_bias_equals_truncated_mass():
    p = ref_params(T=0.25)
    eps = 1e-3
    keep = sample_jump_batch(p, SimConfig(n_paths=4000, seed=3, ig_truncation=eps))
    drop = sample_jump_batch(p, SimConfig(n_paths=4000, seed=3, ig_truncation=eps,
                                          small_jump_policy=SmallJumpPolicy.DISCARD))
    gap = keep.h_increment() - drop.h_increment()
    assert np.allclose(gap, p.T * truncated_first_moment(p.measure, eps), rtol=1e-12)
    assert drop.drift == 0.0 and drop.compensated_small_jump_mass > 0.0


def test_truncation_levels_are_nested():
    p = ref_params(T=0.25)
    coarse = sample_jump_batch(p, SimConfig(n_paths=300, seed=4, ig_truncation=1e-4))
    fine = sample_jump_batch(p, SimConfig(n_paths=300, seed=4, ig_truncation=1e-5))
    for i in range(10):
        a, b = coarse.path_jumps(i), fine.path_jumps(i)
        assert set(a.times.tolist()) <= set(b.times.tolist())


def test_paths_independent_of_batch_size():
    p = ref_params(T=0.25)
    small = sample_jump_batch(p, SimConfig(n_paths=10, seed=9))
    big = sample_jump_batch(p, SimConfig(n_paths=3000, seed=9))
    for i in range(10):
        np.testing.assert_array_equal(small.path_jumps(i).sizes, big.path_jumps(i).sizes)


def test_determinism():
    p = ref_params(T=0.1)
    cfg = SimConfig(n_paths=5000, seed=17)
    a = mc_price(p, p.initial_state(), [440.0, 460.0], cfg)
    b = mc_price(p, p.initial_state(), [440.0, 460.0], cfg)
    np.testing.assert_array_equal(a.price, b.price)
    np.testing.assert_array_equal(a.std_error, b.std_error)


def test_seed_range():
    with pytest.raises(ValueError):
        rng_mod.stream(-1, rng_mod.Purpose.GAUSS, 0)


def test_single_path_sampler_law():
    p = ref_params(T=0.25, variant=Variant.GAMMA_OU)
    gen = np.random.default_rng(5)
    counts = [sample_jump_path(p, SimConfig(), gen).times.size for _ in range(4000)]
    lam_a_T = p.measure.lam * p.measure.a * p.T
    assert abs(np.mean(counts) - lam_a_T) <= 3 * np.std(counts) / math.sqrt(4000)


def test_terminal_state_no_jumps():
    p = ref_params(T=0.25)
    st0 = p.initial_state()
    empty = JumpPath(np.zeros(0), np.zeros(0))
    end = terminal_state(p, st0, empty, 0.0)
    eps = (1 - math.exp(-p.lam * p.T)) / p.lam
    assert end.x == pytest.approx(st0.x + (p.r + p.mu) * p.T - 0.5 * eps * st0.sigma2, rel=1e-15)
    assert end.sigma2 == pytest.approx(math.exp(-p.lam * p.T) * st0.sigma2, rel=1e-15)


@pytest.mark.parametrize("variant", list(Variant))
def test_martingale(variant):
    p = ref_params(T=0.25, variant=variant)
    ps = simulate_states(p, p.initial_state(), SimConfig(n_paths=100_000, seed=6), [0.25])
    disc = np.exp(ps.x_T - p.r * p.T)
    assert abs(disc.mean() - p.S0) <= 3 * disc.std(ddof=1) / math.sqrt(disc.size)


def test_rho_zero_martingale_exact():
    p = ref_params(T=0.25, rho=0.0)
    assert p.mu == 0.0
    ps = simulate_states(p, p.initial_state(), SimConfig(n_paths=50_000, seed=8), [0.25])
    disc = np.exp(ps.x_T - p.r * p.T)
    assert abs(disc.mean() - p.S0) <= 3 * disc.std(ddof=1) / math.sqrt(disc.size)


def test_mc_price_reference_set_qualitative():
    p = ref_params(T=0.25)
    est = mc_price(p, p.initial_state(), 460.0, SimConfig(n_paths=20_000, seed=1))
    assert 0.0 < est.price < p.S0 and est.std_error > 0.0


def test_mc_price_needs_two_paths():
    p = ref_params(T=0.25)
    with pytest.raises(ValueError):
        mc_price(p, p.initial_state(), 460.0, SimConfig(n_paths=1))


def test_mc_price_no_jump_limit():
    spec = LevyMeasureSpec(Variant.GAMMA_OU, 2.0, 1e-12, 10.0)
    p = ref_params(T=0.25).with_(measure=spec)
    st0 = p.initial_state()
    est = mc_price(p, st0, 460.0, SimConfig(n_paths=100, seed=1))
    eps = (1 - math.exp(-p.lam * p.T)) / p.lam
    ref = bs_price(BsPoint(0.0, st0.x, eps * st0.sigma2 / p.T, 460.0, p.r, p.T))
    assert est.price == pytest.approx(ref, rel=1e-10)


def test_conditional_vs_plain_estimator():
    p = ref_params(T=0.25)
    cfg = SimConfig(n_paths=100_000, seed=12)
    cond = mc_price(p, p.initial_state(), 460.0, cfg)
    plain = mc_price(p, p.initial_state(), 460.0, cfg, plain=True)
    assert abs(cond.price - plain.price) <= 3 * math.hypot(cond.std_error, plain.std_error)
    assert cond.std_error < plain.std_error


def test_mc_price_strike_chunks_consistent():
    p = ref_params(T=0.1)
    cfg = SimConfig(n_paths=3000, seed=13)
    K = np.linspace(440.0, 480.0, 41)
    vec = mc_price(p, p.initial_state(), K, cfg)
    one = mc_price(p, p.initial_state(), float(K[20]), cfg)
    assert vec.price[20] == pytest.approx(one.price, rel=1e-13)
    assert np.all(np.diff(vec.price) < 0)


def test_truncation_halving_within_one_se():
    p = ref_params(T=0.25)
    a = mc_price(p, p.initial_state(), 460.0, SimConfig(n_paths=100_000, seed=14, ig_truncation=1e-6))
    b = mc_price(p, p.initial_state(), 460.0, SimConfig(n_paths=100_000, seed=14, ig_truncation=5e-7))
    assert abs(a.price - b.price) < a.std_error


def test_grid_simulation_matches_single_path_route():
    p = ref_params(T=0.25)
    st0 = p.initial_state()
    gen = np.random.default_rng(21)
    jp = sample_jump_path(p, SimConfig(), gen)
    states = state_path_on_grid(p, st0, jp, np.random.default_rng(22), [0.1, 0.2, 0.25])
    assert states[-1].t == 0.25
    assert all(s.sigma2 >= p.variance_floor for s in states)
    one = state_path_on_grid(p, st0, jp, np.random.default_rng(22), [0.25])[0]
    z = np.random.default_rng(22).standard_normal()
    assert one.x == pytest.approx(terminal_state(p, st0, jp, z).x, rel=1e-15)
    assert states[-1].sigma2 == pytest.approx(one.sigma2, rel=1e-12)
    with pytest.raises(ValueError):
        state_path_on_grid(p, st0, jp, gen, [0.2, 0.1])


def test_grid_refinement_preserves_law_of_xT():
    p = ref_params(T=0.25)
    coarse = simulate_states(p, p.initial_state(), SimConfig(n_paths=10_000, seed=31), [0.25]).x_T
    fine = simulate_states(p, p.initial_state(), SimConfig(n_paths=10_000, seed=32),
                           np.linspace(0.0125, 0.25, 20)).x_T
    res = stats.ks_2samp(coarse, fine)
    assert res.statistic < 1.63 * math.sqrt(2 / 10_000)  # 1% critical value


def test_conditional_values_shape():
    p = ref_params(T=0.25)
    vals = conditional_call_values(p, p.initial_state(), np.full(5, 0.001), np.zeros(5), [440.0, 460.0])
    assert vals.shape == (5, 2)


def test_path_csv(tmp_path):
    p = ref_params(T=0.1)
    out = tmp_path / "paths.csv"
    n = write_path_csv(out, p, SimConfig(n_paths=3, seed=1), np.linspace(0.02, 0.1, 5))
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["path_id", "time", "x", "sigma2", "jump_size"]
    assert len(rows) == n + 1
    assert out.read_bytes().count(b"\r") == 0
    ids = {r[0] for r in rows[1:]}
    assert ids == {"0", "1", "2"}
