import math

import numpy as np
import pytest

from wcsnet.asymptotics import mean_arrival_rate
from wcsnet.chain import analyze
from wcsnet.config import default_config, transmission_range
from wcsnet.kernel import transmit_probability
from wcsnet.montecarlo import (IN_REGION, OFFERED, World, default_warmup, empirical_kernel, run)


def test_same_seed_same_statistics():
    c = default_config(v=0.5)
    a, b = run(c, 20_000, 500), run(c, 20_000, 500)
    assert a.summary() == b.summary()
    assert np.array_equal(a.intermeeting, b.intermeeting)
    assert np.array_equal(a.transition_counts, b.transition_counts)
    assert np.array_equal(a.active_series, b.active_series)
    assert run(c, 20_000, 500, seed=1).summary() != a.summary()


def test_stationary_nodes_do_not_move():
    w = World.create(default_config(v=0.0, M=1), seed=4)
    before = w.pos.copy()
    for _ in range(50):
        w.step()
    assert np.array_equal(w.pos, before)
    assert w.slot == 50


def test_every_step_has_length_v():
    c = default_config(v=0.7)
    w = World.create(c, seed=5)
    side = c.side
    for _ in range(200):
        before = w.pos.copy()
        w.step()
        d = np.abs(w.pos - before)
        d = np.minimum(d, side - d)
        assert np.abs(np.hypot(d[:, 0], d[:, 1]) - c.v).max() < 1e-9
        assert np.all((w.pos >= 0) & (w.pos < side))


def test_capacity_above_population_charges_everyone():
    s = run(default_config(u=10), 20_000, 100)
    assert s.p_c == 1.0


def test_energy_stays_in_range():
    rng = np.random.default_rng(8)
    for _ in range(4):
        c = default_config(n=int(rng.integers(2, 15)), m=int(rng.integers(1, 4)), L=int(rng.integers(1, 6)),
                           u=int(rng.integers(1, 3)), v=float(rng.uniform(0.2, 2.0)))
        w = World.create(c, seed=int(rng.integers(1 << 30)))
        for _ in range(25):
            w.advance(10_000)
            assert w.energy.min() >= 0 and w.energy.max() <= c.L


def test_long_run_energy_inflow():
    c = default_config(L=10**6)
    s = run(c, 400_000, 1000)
    lam = mean_arrival_rate(c)
    assert s.energy_offered == pytest.approx(lam, rel=0.02)
    assert s.energy_accepted == pytest.approx(lam, rel=0.02)
    # per in-region node-slot: p_c times the mean batch size
    per_node = s.tallies[:, OFFERED].sum() / s.tallies[:, IN_REGION].sum()
    assert per_node == pytest.approx(s.p_c * c.profile.mean_units, rel=0.02)


def test_fast_nodes_meet_like_fresh_draws():
    c = default_config(v=6.0)
    s = run(c, 200_000, 1000)
    assert s.intermeeting.mean() == pytest.approx(18.7174, rel=0.10)


def test_default_run_matches_analytic_kernel(cfg, kernel, default_sim):
    emp = empirical_kernel(default_sim)
    assert not emp.undersampled.any()
    assert np.allclose(emp.P.sum(1), 1)
    tv = 0.5 * np.abs(emp.P - kernel.P).sum(1)
    assert tv.max() < 0.02
    assert abs(emp.p_t - kernel.p_t) < 3 * emp.p_t_se
    assert abs(emp.p_c - kernel.p_c) < 3 * emp.p_c_se
    assert abs(emp.p_c - kernel.p_c) < 0.01
    r = transmission_range(cfg.n, cfg.S)
    assert abs(emp.p_t - transmit_probability(cfg.n, cfg.S, cfg.q, r)) < 0.005


def test_active_conditioned_transmit_rate_is_biased_low(kernel, default_sim):
    # empty-battery nodes cannot spend, so active nodes sit more often where
    # they just transmitted; the selection effect is several standard errors
    s = default_sim
    assert s.p_t_active < kernel.p_t - 3 * s.p_t_active_se


def test_default_activity_and_throughput(cfg, default_sim):
    _, _, ss = analyze(cfg)
    assert abs(default_sim.P_on - ss.P_on) < 0.01
    assert default_sim.Lambda == pytest.approx(ss.Lambda, rel=0.15)
    assert default_sim.delivered.sum() / (cfg.n * default_sim.slots) == pytest.approx(default_sim.Lambda)
    assert 0 <= default_sim.active_series.min() and default_sim.active_series.max() <= 1


def test_rare_rows_are_flagged():
    s = run(default_config(v=0.3), 2000, 0)
    emp = empirical_kernel(s)
    assert emp.undersampled.any()
    assert np.all(np.isnan(emp.P[emp.undersampled]))


def test_default_warmup():
    from wcsnet.intermeeting import inner_kernel, mean_intermeeting, spectral_decomposition
    from wcsnet.kernel import build_kernel

    assert default_warmup(default_config()) == 1000
    slow = default_config(v=0.1)
    mean = mean_intermeeting(spectral_decomposition(inner_kernel(build_kernel(slow))))[1]
    assert mean > 100
    assert default_warmup(slow) == math.ceil(10 * mean)
    assert default_warmup(default_config(v=0.0, M=1)) == 1000
