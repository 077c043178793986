from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from cdme.errors import NumericalAbort
from cdme.particles import (
    ParticleSystemState,
    bootstrap_l2_band,
    reflect,
    rejection_sample,
    sample_from_density,
    simulate_ensemble,
    step,
)
from cdme.rates import RateFunctions, constant, cosine_series


def test_reflect_exact_values():
    x = np.array([-0.3, 0.0, 0.4, 1.0, 1.2, 2.3, -1.7])
    np.testing.assert_allclose(reflect(x), [0.3, 0.0, 0.4, 1.0, 0.8, 0.3, 0.3], atol=1e-15)


def test_rejection_sampler_mean():
    f = cosine_series([1.0, 0.5])
    x, _ = rejection_sample(f, f.sup, np.random.default_rng(0), 200_000)
    assert abs(x.mean() - (0.5 - 1 / math.pi**2)) < 4 * x.std() / math.sqrt(x.size)
    assert np.all((x >= 0) & (x <= 1))


def test_rejection_sampler_acceptance_rate():
    def bump(x):
        return np.exp(-0.5 * ((x - 0.5) / 0.01) ** 2)

    size = 20_000
    _, proposals = rejection_sample(bump, 1.0, np.random.default_rng(1), size)
    rate, expected = size / proposals, 0.01 * math.sqrt(2 * math.pi)
    assert abs(rate - expected) < 4 * math.sqrt(expected * (1 - expected) / proposals)


def test_rejection_sampler_rejects_bad_bound():
    with pytest.raises(NumericalAbort):
        sample_from_density(cosine_series([1.0, 0.5]), 1.0, np.random.default_rng(2), 100)
    with pytest.raises(ValueError):
        sample_from_density(constant(1.0), 0.0, np.random.default_rng(2))


def test_no_reactions_conserve_particles():
    rates = RateFunctions.constant_rates(0.0, 0.0)
    state = ParticleSystemState(0.0, np.array([0.0, 0.5, 1.0]), np.random.default_rng(3))
    for _ in range(200):
        state = step(state, 1e-2, rates)
    assert state.count == 3 and state.t == pytest.approx(2.0)
    assert np.all((state.positions >= 0) & (state.positions <= 1))


def test_step_rejects_large_dt():
    rates = RateFunctions.constant_rates(1.0, 0.0)
    state = ParticleSystemState(0.0, np.array([0.5]), np.random.default_rng(4))
    with pytest.raises(ValueError):
        step(state, 0.05, rates)
    with pytest.raises(ValueError):
        simulate_ensemble(RateFunctions.constant_rates(200.0, 0.0), None, [1.0], 10, dt=1e-3)


def test_pure_death_survival_and_conditional_density():
    stats_ = simulate_ensemble(RateFunctions.constant_rates(1.0, 0.0), None, [1.0], 100_000, dt=1e-2, seed=5)
    p, _ = stats_.probabilities(0)
    sigma = math.sqrt(math.exp(-1) * (1 - math.exp(-1)) / 100_000)
    assert abs(p[1] - math.exp(-1)) < 3 * sigma
    assert stats_.counts[0].sum() == 100_000
    # the projected single-particle density divided by P_1 is the constant 1 here
    assert bootstrap_l2_band(stats_.positions[0, 1], stats_.edges, constant(1.0))["pass"]


def test_uniform_sampler():
    x = sample_from_density(constant(1.0), 1.0, np.random.default_rng(12), 50_000)
    assert stats.kstest(x, "uniform").pvalue > 0.01


def test_diffusion_relaxes_to_uniform():
    stats_ = simulate_ensemble(
        RateFunctions.constant_rates(0.0, 0.0), cosine_series([1.0, 0.9]), [5.0], 5000, dt=1e-2, seed=6, bins=10
    )
    hist = stats_.positions[0, 1]
    assert hist.sum() == 5000
    assert stats.chisquare(hist).pvalue > 0.01


def test_single_run_without_reactions():
    stats_ = simulate_ensemble(RateFunctions.constant_rates(0.0, 0.0), None, [0.0, 0.1], 1, seed=7)
    np.testing.assert_array_equal(stats_.counts, [[0, 1], [0, 1]])


def test_immigration_counts_are_poisson_without_death():
    stats_ = simulate_ensemble(RateFunctions.constant_rates(0.0, 2.0), None, [0.5], 20_000, dt=1e-2, seed=8)
    p, se = stats_.probabilities(0)
    law = stats.poisson.pmf(np.arange(p.size) - 1, 1.0)
    mask = law * 20_000 >= 5
    assert np.all(np.abs(p - law)[mask] <= 3 * np.sqrt(law * (1 - law) / 20_000)[mask])


def test_counts_consistent_with_birth_death_chain():
    from cdme.galerkin import immigration_death_analytic

    runs, cps = 20_000, [0.2, 0.6]
    s = simulate_ensemble(RateFunctions.constant_rates(1.0, 2.0), None, cps, runs, dt=1e-3, seed=13)
    for i, t in enumerate(cps):
        law = immigration_death_analytic(1.0, 2.0, t, np.arange(40))
        obs = np.zeros(40)
        obs[: s.counts[i].size] = s.counts[i]
        # pool the sparse tail into one cell so every expected count is >= 5
        cut = int(np.flatnonzero(law * runs >= 5)[-1])
        o = np.append(obs[:cut], obs[cut:].sum())
        e = np.append(law[:cut], law[cut:].sum()) * runs
        assert stats.chisquare(o, e * o.sum() / e.sum()).pvalue > 0.01


def test_dt_refinement_within_monte_carlo_error():
    rates = RateFunctions(cosine_series([1.5, 1.0]), cosine_series([1.0, 0.5]), constant(1.0))
    runs = 10_000
    coarse = simulate_ensemble(rates, None, [0.5], runs, dt=2e-3, seed=14)
    fine = simulate_ensemble(rates, None, [0.5], runs, dt=1e-3, seed=15)
    width = max(coarse.counts.shape[1], fine.counts.shape[1])
    pc, pf = (np.pad(x.counts[0], (0, width - x.counts.shape[1])) / runs for x in (coarse, fine))
    se = np.sqrt((pc * (1 - pc) + pf * (1 - pf)) / runs)
    mask = (pc + pf) * runs >= 10
    assert np.all(np.abs(pc - pf)[mask] <= 3 * se[mask])


def test_determinism_across_threads():
    rates = RateFunctions(constant(1.0), cosine_series([2.0, 1.0]), cosine_series([1.0, 0.5]))
    a = simulate_ensemble(rates, None, [0.1, 0.2], 10_000, seed=9, threads=1)
    b = simulate_ensemble(rates, None, [0.1, 0.2], 10_000, seed=9, threads=4)
    np.testing.assert_array_equal(a.counts, b.counts)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_csv_writers(tmp_path):
    s = simulate_ensemble(RateFunctions.constant_rates(1.0, 1.0), None, [0.1], 100, seed=10, bins=4, n_track=2)
    rows = s.write_counts_csv(tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "t,n,count,runs" and len(rows) == 1 + s.counts.shape[1]
    rows = s.write_positions_csv(tmp_path / "p.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 4


def test_bootstrap_band_accepts_truth_and_rejects_wrong_density():
    f = cosine_series([1.0, 0.5])
    x = sample_from_density(f, f.sup, np.random.default_rng(11), 50_000)
    edges = np.linspace(0, 1, 21)
    hist = np.histogram(x, edges)[0]
    assert bootstrap_l2_band(hist, edges, f)["pass"]
    assert not bootstrap_l2_band(hist, edges, constant(1.0))["pass"]
    with pytest.raises(ValueError):
        bootstrap_l2_band(np.zeros(20, int), edges, f)
