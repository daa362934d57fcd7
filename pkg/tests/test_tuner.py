import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from distdesign import tuner
from distdesign.errors import InvalidInputError
from distdesign.tuner import (
    SHAPE_CATALOG,
    RimseConfig,
    TuneResult,
    catalog_lookup,
    derimse,
    detrend_from_samples,
    ei_scalar,
    expected_improvement,
    quadratic_oracle,
    rmse_at,
    rmse_curve,
    tune_shapes,
)

SMALL = RimseConfig(8, 2, T=6, R=5, D=2, S=200)


def test_ei_symmetric_case():
    assert expected_improvement(0.3, 1.0, 0.3) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)


def test_ei_unit_gap():
    assert expected_improvement(0.0, 1.0, 1.0) == pytest.approx(1.083316, abs=1e-6)


def test_ei_zero_sigma():
    assert expected_improvement(2.0, 0.0, 1.0) == 0.0
    assert expected_improvement(0.25, 0.0, 1.0) == 0.75


def test_ei_monte_carlo_small():
    rng = np.random.default_rng(0)
    mu, sigma, mu_min = 0.4, 0.7, 0.1
    draws = np.maximum(mu_min - rng.normal(mu, sigma, 400_000), 0)
    se = draws.std() / math.sqrt(draws.size)
    assert abs(expected_improvement(mu, sigma, mu_min) - draws.mean()) < 3 * se


@given(st.floats(-5, 5), st.floats(0, 5), st.floats(-5, 5))
@settings(max_examples=200, deadline=None)
def test_ei_nonnegative_and_scalar_agrees(mu, sigma, mu_min):
    v = expected_improvement(mu, sigma, mu_min)
    assert v >= 0.0
    assert ei_scalar(mu, sigma, mu_min) == pytest.approx(v, rel=1e-12, abs=1e-15)


def test_ei_vectorized():
    out = expected_improvement(np.array([0.0, 1.0]), np.array([1.0, 0.0]), 0.0)
    np.testing.assert_allclose(out, [1 / math.sqrt(2 * math.pi), 0.0])


def test_catalog_has_exactly_the_nine_entries():
    assert SHAPE_CATALOG == {
        (8, 2): (1.5, 5.0), (16, 2): (2.0, 4.0), (16, 3): (2.5, 5.0),
        (32, 3): (3.0, 5.0), (32, 4): (1.5, 3.5), (64, 4): (3.0, 6.0),
        (64, 5): (2.0, 6.0), (128, 5): (1.0, 3.0), (128, 6): (2.0, 4.0),
    }
    for key, shape in SHAPE_CATALOG.items():
        hit = catalog_lookup(*key)
        assert (hit.alpha, hit.beta) == shape and not hit.extrapolated


def test_catalog_nearest_key():
    hit = catalog_lookup(20, 2)
    assert (hit.alpha, hit.beta) == (2.0, 4.0)
    assert hit.key == (16, 2) and hit.extrapolated


def test_config_grid():
    cfg = RimseConfig(16, 3)
    assert (cfg.T, cfg.R, cfg.D) == (30, 30, 5)
    g = cfg.theta_grid
    assert g[0] == 0.1 and g[-1] == pytest.approx(math.sqrt(3), abs=1e-15)
    assert np.all(np.diff(g) > 0)


def test_rmse_injected_truth_is_zero():
    assert rmse_at(SMALL, 2, 5, 3, seed=1, estimator=lambda X, Y, th, b: th) == 0.0


def test_rmse_single_design_is_absolute_error():
    cfg = RimseConfig(8, 2, T=4, D=1, S=100)
    assert rmse_at(cfg, 2, 5, 2, seed=2, estimator=lambda X, Y, th, b: th + 0.125) == 0.125


def test_rmse_at_matches_curve():
    curve = rmse_curve(SMALL, 2.5, 4, seed=3)
    assert rmse_at(SMALL, 2.5, 4, 4, seed=3) == curve[3]
    with pytest.raises(InvalidInputError):
        rmse_at(SMALL, 2.5, 4, 0, seed=3)


def test_constant_replicates_give_floor():
    grid = np.linspace(0.1, 1.4, 7)
    surf = detrend_from_samples(grid, np.full((7, 5), 0.3))
    np.testing.assert_array_equal(surf.mu_t, 0.3)
    np.testing.assert_array_equal(surf.sigma_t, tuner.SIGMA_FLOOR)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_detrend_scale_positive(seed):
    rng = np.random.default_rng(seed)
    surf = detrend_from_samples(np.linspace(0.1, 1.4, 8), rng.gamma(2.0, size=(8, 6)))
    assert np.all(surf.sigma_t >= tuner.SIGMA_FLOOR)


@given(st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_derimse_linear_in_injected_offset(c):
    grid = SMALL.theta_grid
    surf = detrend_from_samples(grid, np.random.default_rng(1).gamma(2, size=(grid.size, 5)))
    fn = lambda a, b, s: surf.mu_t + c * surf.sigma_t  # noqa: E731
    assert derimse(SMALL, surf, 2, 4, 0, rmse_fn=fn) == pytest.approx(c, abs=1e-12)


def test_build_detrend_needs_five_shapes():
    with pytest.raises(InvalidInputError):
        tuner.build_detrend(RimseConfig(8, 2, R=4))


def test_budget_zero_uses_seed_stage_only():
    res = tune_shapes(SMALL, 0, seed=1, criterion=quadratic_oracle())
    assert len(res.evaluations) == 200
    assert {e["stage"] for e in res.evaluations} == {"seed"}
    assert len(res.sites()) == 20 and all(c == 10 for _, _, c in res.sites())
    with pytest.raises(InvalidInputError):
        tune_shapes(SMALL, -1, seed=1, criterion=quadratic_oracle())


def test_quadratic_oracle_recovered_and_in_box():
    res = tune_shapes(SMALL, 15, seed=2, criterion=quadratic_oracle())
    ab = np.array([(e["alpha"], e["beta"]) for e in res.evaluations])
    assert np.all((ab >= 1.0) & (ab <= 10.0))
    assert abs(res.best[0] - 3.0) <= 0.5 and abs(res.best[1] - 6.5) <= 0.5
    assert res.near_optimal in [(a, b) for a, b, _ in res.band]


def test_noisy_criterion_reuses_seeds_across_sites():
    seen = {}

    def crit(a, b, seed):
        seen.setdefault(tuple(seed.spawn_key), set()).add((a, b))
        return float(np.random.default_rng(seed).normal())

    tune_shapes(SMALL, 0, seed=5, criterion=crit, n_sites=6, site_reps=3)
    assert len(seen) == 3 and all(len(v) == 6 for v in seen.values())


def test_json_round_trip():
    res = tune_shapes(SMALL, 2, seed=3, criterion=quadratic_oracle())
    back = TuneResult.from_json(res.to_json())
    assert back.best == res.best and back.near_optimal == res.near_optimal
    assert back.evaluations == json.loads(json.dumps(res.evaluations))
    assert back.to_json() == res.to_json()


@pytest.fixture(scope="module")
def detrend16():
    # default swap length: short searches leave designs too close to random
    cfg = RimseConfig(16, 2)
    return cfg, tuner.build_detrend(cfg, seed=11)


@pytest.mark.slow
def test_detrend_location_trends_up(detrend16):
    cfg, surf = detrend16
    assert stats.kendalltau(cfg.theta_grid, surf.mu_t).statistic > 0.3


@pytest.mark.slow
def test_catalog_shape_beats_random_baseline(detrend16):
    cfg, surf = detrend16
    vals = [derimse(cfg, surf, 2, 4, seed=100 + s) for s in range(20)]
    assert np.mean(vals) < 0


@pytest.mark.slow
def test_rmse_grows_with_lengthscale():
    cfg = RimseConfig(16, 2, D=200, S=2000)
    curve = rmse_curve(cfg, 2, 4, seed=4)
    assert stats.spearmanr(cfg.theta_grid, curve).statistic > 0.5
