import json
import math
import os

import numpy as np
import pytest

from distdesign import bench
from distdesign.bench import StudyConfig, alm_study, bo_study, logmse_study, run_study
from distdesign.errors import InvalidInputError


def _cfg(**kw):
    base = dict(name="logmse", dims=(2,), reps=2, seed=3, design_iters=50, T=5)
    base.update(kw)
    return StudyConfig(**base)


def test_injected_truth_hits_log_floor():
    res = logmse_study(_cfg(methods=("random", "lhs")), estimator=lambda X, Y, th, b: th)[0]
    np.testing.assert_array_equal(res.raw, bench.LOG_FLOOR)
    assert bench.LOG_FLOOR == math.log(1e-12)


def test_design_size_rule():
    cfg = _cfg()
    assert [cfg.size(d) for d in range(2, 7)] == [8, 16, 32, 64, 128]
    assert StudyConfig("bo").size(2) == 8 and StudyConfig("bo", n=12).size(3) == 12


def test_config_validation():
    with pytest.raises(InvalidInputError):
        StudyConfig("logmse", reps=1)
    with pytest.raises(InvalidInputError):
        StudyConfig("bo", methods=("sobol",))
    with pytest.raises(InvalidInputError):
        StudyConfig("nope")
    StudyConfig("alm", reps=1)


def test_shapes_default_from_catalog_and_alm_text():
    assert StudyConfig("logmse").shape("betadist", 8, 2) == (1.5, 5.0)
    assert StudyConfig("bo").shape("lhsbeta", 16, 3) == (2.5, 5.0)
    assert StudyConfig("alm").shape("betadist", 8, 2) == (2.0, 5.0)
    assert StudyConfig("alm", shapes={"betadist": (3, 4)}).shape("betadist", 8, 2) == (3.0, 4.0)


def test_logmse_pairs_responses_across_methods():
    seen = []

    def spy(X, Y, theta, bounds):
        seen.append((theta, tuple(np.round(Y, 12))))
        return theta * 1.1

    logmse_study(_cfg(methods=("lhs", "lhs"), T=3), estimator=spy)
    # identical designs and shared draws -> identical responses for paired methods
    assert seen[0::2] == seen[1::2]


def test_logmse_shapes_and_ranking():
    res = logmse_study(_cfg(methods=("random", "maximin", "betadist")))[0]
    assert res.raw.shape == (3, 5) and res.standardized.shape == (3, 5)
    assert [r[0] for r in res.ranking] == sorted(res.methods, key=lambda m: res.mean_standardized()[m])
    assert res.ranking[-1][2] is None
    p = res.p_value("random", "maximin")
    assert p + res.p_value("maximin", "random") == pytest.approx(1.0, abs=1e-12)


def test_logmse_drops_failed_reps_for_all_methods():
    calls = {"n": 0}

    def flaky(X, Y, theta, bounds):
        calls["n"] += 1
        if calls["n"] == 1:
            from distdesign.errors import DegenerateDataError

            raise DegenerateDataError("flat")
        return theta + 0.5

    res = logmse_study(_cfg(methods=("random", "lhs"), T=2), estimator=flaky)[0]
    assert res.failures == 1
    # first grid point keeps one rep per method, the second keeps two
    np.testing.assert_allclose(res.raw[:, 0], math.log(0.25))
    np.testing.assert_allclose(res.raw[:, 1], math.log(0.5))


def test_alm_single_rep_quantile_is_trace():
    res = alm_study(StudyConfig("alm", reps=1, methods=("lhs",), seed=1, design_iters=50))
    trace = res.rmspe["lhs"][0]
    assert trace.shape == (57,)
    np.testing.assert_array_equal(res.q90("lhs"), trace)
    np.testing.assert_array_equal(res.mean("lhs"), trace)
    assert list(res.tables()) == ["study-alm-d2-n64.csv"]


@pytest.fixture(scope="module")
def small_bo():
    cfg = StudyConfig("bo", reps=4, methods=("maximin", "lhs", "lhs", "lhsbeta"), seed=2,
                      design_iters=200, checkpoints=(10, 12))
    return bo_study(cfg)[0]


def test_identical_traces_give_one_half(small_bo):
    for c in small_bo.checkpoints:
        assert small_bo.pvalues[c][1, 2] == 0.5 and small_bo.pvalues[c][2, 1] == 0.5


def test_pvalue_matrix_complements(small_bo):
    P = small_bo.pvalues[12]
    for i, j in [(0, 1), (0, 3), (1, 3)]:
        assert P[i, j] + P[j, i] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.isnan(np.diag(P)))


def test_bo_bounds_shared_and_in_range(small_bo):
    assert small_bo.bounds.shape == (4,)
    assert np.all((small_bo.bounds > 0) & (small_bo.bounds < 10))
    b0 = float(bench.stream(2, bench._K_SCALE, 2, 0).uniform(0, 10))
    assert small_bo.bounds[0] == b0


def test_bo_best_nonincreasing_across_checkpoints(small_bo):
    for m in ("maximin", "lhsbeta"):
        assert np.all(small_bo.best[12][m] <= small_bo.best[10][m])


def test_bo_rejects_early_checkpoint():
    with pytest.raises(InvalidInputError):
        bo_study(StudyConfig("bo", reps=2, checkpoints=(5,)))


def test_threads_do_not_change_results():
    cfg = _cfg(methods=("random", "betadist"), T=4)
    a = logmse_study(cfg)[0]
    b = logmse_study(StudyConfig(**{**cfg.__dict__, "threads": 2}))[0]
    np.testing.assert_array_equal(a.raw, b.raw)


def test_run_study_files_and_reproducibility(tmp_path):
    cfg = _cfg(methods=("random", "lhs"), dims=(2, 3))
    _, files = run_study(cfg, tmp_path / "a")
    run_study(cfg, tmp_path / "b")
    assert set(files) == {
        f"study-logmse{kind}-d{d}-n{n}.csv"
        for d, n in ((2, 8), (3, 16)) for kind in ("", "-standardized", "-ranking")
    }
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest-logmse.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest-logmse.json").read_text())
    ma.pop("created"), mb.pop("created")
    assert ma == mb and ma["complete"] and ma["seed"] == 3
    raw = (tmp_path / "a" / "study-logmse-d2-n8.csv").read_text().splitlines()
    assert raw[0] == "t,theta,random,lhs" and len(raw) == 6


def test_interrupted_study_still_writes_manifest(tmp_path, monkeypatch):
    def boom(config, estimator=None):
        raise KeyboardInterrupt

    monkeypatch.setattr(bench, "logmse_study", boom)
    with pytest.raises(KeyboardInterrupt):
        run_study(_cfg(), tmp_path)
    doc = json.loads((tmp_path / "manifest-logmse.json").read_text())
    assert doc["complete"] is False and doc["files"] == []


def test_table_floats_round_trip(tmp_path):
    path = os.path.join(tmp_path, "t.csv")
    bench.write_table(path, [["x"], [0.1 + 0.2], [1 / 3]])
    vals = [float(v) for v in open(path).read().split()[1:]]
    assert vals == [0.1 + 0.2, 1 / 3]
