import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distdesign import _backend
from distdesign.designs import (
    METHODS,
    Design,
    dist_targeted_design,
    generate,
    lhs_design,
    lhsbeta_design,
    maximin_design,
    min_distance,
    one_d_uniform,
    phi_p,
    phi_p_design,
    random_design,
)
from distdesign.distances import DistanceSet, DistanceTarget, ksd, pairwise_distances
from distdesign.errors import DesignParseError, InvalidInputError

BACKENDS = _backend.available()


def test_random_design_range_and_determinism():
    D = random_design(2, 1, seed=3)
    assert D.X.shape == (2, 1)
    assert np.all((D.X >= 0) & (D.X <= 1))
    np.testing.assert_array_equal(D.X, random_design(2, 1, seed=3).X)


def test_random_design_mean():
    assert abs(random_design(100_000, 1, seed=0).X.mean() - 0.5) < 0.005


def test_lhs_one_per_bin():
    for seed in range(20):
        assert one_d_uniform(lhs_design(9, 4, seed).X)


def test_lhs_single_point():
    X = lhs_design(1, 3, seed=0).X
    assert X.shape == (1, 3) and np.all((X >= 0) & (X <= 1))


def test_lhs_column_histogram_over_seeds():
    n = 16
    counts = np.zeros(n, int)
    for seed in range(200):
        col = lhs_design(n, 2, seed).X[:, 0]
        counts += np.bincount(np.floor(col * n).astype(int), minlength=n)
    np.testing.assert_array_equal(counts, np.full(n, 200))


def test_maximin_two_points_on_interval():
    assert min_distance(maximin_design(2, 1, 10_000, seed=1).X) > 0.95


def test_maximin_four_points_in_square():
    assert min_distance(maximin_design(4, 2, 100_000, seed=2).X) >= 0.95


def test_maximin_improves_on_start():
    D = maximin_design(10, 2, 500, seed=4)
    assert D.trace[-1] >= D.trace[0]
    assert np.all(np.diff(D.trace) >= 0)


@pytest.mark.parametrize("p", [1.0, 2.0, 7.5])
def test_phi_p_single_pair(p):
    assert phi_p([[0.1, 0.2], [0.4, 0.6]], p) == pytest.approx(1 / 0.5, rel=1e-12)


def test_phi_p_two_unit_distances():
    assert phi_p(DistanceSet(np.array([1.0, 1.0])), 2) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_phi_p_large_p_approaches_inverse_min():
    assert phi_p(DistanceSet(np.array([0.5, 1.0])), 64) == pytest.approx(2.0, rel=0.01)


def test_phi_p_duplicates_infinite():
    assert phi_p([[0.3], [0.3], [0.9]], 2) == math.inf


def test_phi_p_search_monotone():
    D = phi_p_design(8, 2, 2.0, 1000, seed=5)
    assert np.all(np.diff(D.trace) <= 0)
    assert D.trace[-1] == pytest.approx(phi_p(D.X, 2.0), rel=1e-12)


def test_zero_iterations_return_start():
    t = DistanceTarget.beta_target(2, 4, 2)
    D = dist_targeted_design(6, 2, t, 0, seed=9)
    np.testing.assert_array_equal(D.X, np.random.default_rng(9).random((6, 2)))
    L = lhsbeta_design(6, 3, DistanceTarget.beta_target(2, 4, 3), 0, seed=9)
    assert one_d_uniform(L.X)


def test_betadist_beats_random_designs():
    t = DistanceTarget.beta_target(2, 4, 2)
    D = dist_targeted_design(16, 2, t, 100_000, seed=0)
    ref = [ksd(pairwise_distances(random_design(16, 2, s).X), t) for s in range(100)]
    assert D.trace[-1] < np.median(ref)
    assert D.trace[-1] == pytest.approx(ksd(pairwise_distances(D.X), t), abs=1e-12)


def test_lhsbeta_beats_plain_lhs():
    t = DistanceTarget.beta_target(2.5, 5, 3)
    D, sq = lhsbeta_design(16, 3, t, 100_000, seed=0, return_squares=True)
    ref = [ksd(pairwise_distances(lhs_design(16, 3, s).X), t) for s in range(100)]
    assert D.trace[-1] < np.median(ref)
    assert sq.is_valid()
    np.testing.assert_allclose(sq.X, D.X, atol=1e-15)


def _mean_abs_gap(X, target):
    x = pairwise_distances(X).values
    return np.mean(np.abs(np.arange(1, x.size + 1) / x.size - target.cdf(x)))


def test_unifdist_closer_to_uniform_than_random():
    t = DistanceTarget.uniform(2)
    a = [_mean_abs_gap(generate("unifdist", 12, 2, s, S=5000).X, t) for s in range(50)]
    b = [_mean_abs_gap(random_design(12, 2, s).X, t) for s in range(50)]
    assert np.mean(a) < np.mean(b)


@pytest.mark.parametrize("method", ["betadist", "lhsbeta"])
def test_ksd_traces_nonincreasing(method):
    D = generate(method, 10, 2, seed=1, S=3000, alpha=2, beta=5)
    assert np.all(np.diff(D.trace) <= 0)


@given(st.integers(2, 12), st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_lhsbeta_keeps_latin_property(n, d, seed):
    D, sq = lhsbeta_design(n, d, DistanceTarget.beta_target(2, 5, d), 300, seed=seed, return_squares=True)
    assert sq.is_valid()
    assert one_d_uniform(D.X)


@given(st.sampled_from(METHODS), st.integers(2, 8), st.integers(1, 3), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_generators_in_unit_cube_and_reproducible(method, n, d, seed):
    a = generate(method, n, d, seed, S=50, alpha=2, beta=4)
    b = generate(method, n, d, seed, S=50, alpha=2, beta=4)
    assert np.all((a.X >= 0) & (a.X <= 1))
    np.testing.assert_array_equal(a.X, b.X)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")
@pytest.mark.parametrize("method", ["maximin", "phip", "betadist", "unifdist", "lhsbeta"])
def test_backends_agree_bit_for_bit(method):
    py = _backend.get("python")
    cy = _backend.get("cython")
    a = generate(method, 9, 3, 11, S=400, alpha=2.5, beta=5, backend=py)
    b = generate(method, 9, 3, 11, S=400, alpha=2.5, beta=5, backend=cy)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.trace, b.trace)


def test_pure_python_switch():
    code = "from distdesign import _backend; print(_backend.kernels.NAME)"
    env = dict(os.environ, DISTDESIGN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_method():
    with pytest.raises(InvalidInputError):
        generate("sobol", 4, 2)
    with pytest.raises(InvalidInputError):
        generate("betadist", 4, 2)


def test_bad_sizes():
    with pytest.raises(InvalidInputError):
        random_design(1, 2)
    with pytest.raises(InvalidInputError):
        maximin_design(4, 0, 10)


def test_json_round_trip_bit_exact():
    D = generate("betadist", 7, 3, seed=5, S=200, alpha=1.5, beta=5)
    E = Design.from_json(D.to_json())
    np.testing.assert_array_equal(D.X, E.X)
    assert E.provenance() == json.loads(json.dumps(D.provenance()))
    assert E.provenance()["params"]["target"] == {"family": "beta", "alpha": 1.5, "beta": 5.0, "d": 3}


def test_csv_round_trip_bit_exact():
    D = random_design(9, 4, seed=8)
    E = Design.from_csv(D.to_csv())
    np.testing.assert_array_equal(D.X, E.X)
    assert len(D.to_csv().splitlines()) == 9


@pytest.mark.parametrize(
    "text, line",
    [
        ("0.1,0.2\n0.3,abc\n", 2),
        ("0.1,0.2\n0.3\n", 2),
        ("0.1,nan\n", 1),
        ("0.1,0.2\n0.3,0.4\n1.5,0.2\n", 3),
        ("", 1),
    ],
)
def test_csv_parse_errors_carry_line(text, line):
    with pytest.raises(DesignParseError) as info:
        Design.from_csv(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_design_rejects_points_outside_cube():
    with pytest.raises(InvalidInputError):
        Design(np.array([[0.5, 1.2]]), "manual")
