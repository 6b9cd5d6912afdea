import math
import random

import pytest

import crossrec


def test_metrics_example():
    m = crossrec.metrics_at_k([0, 1, 2, 3], [1], 3)
    assert m["hr"] == 1.0
    assert m["mrr"] == 0.5
    assert m["precision"] == pytest.approx(1 / 3)


def test_rank_and_post_filter():
    assert crossrec.rank_items([0.5, 0.9, 0.5]) == [1, 0, 2]
    assert crossrec.apply_post_filter([0.9, 0.2], [True, False]) == [0.9, pytest.approx(-0.8)]


def test_weibull_tail_identity():
    for y in range(20):
        gap = crossrec.weibull_tail(y - 1, 2.0, 0.5) - crossrec.weibull_tail(y, 2.0, 0.5)
        assert crossrec.weibull_pmf(y, 2.0, 0.5) == pytest.approx(gap, abs=1e-12)


def test_gmm_recovers_means():
    rng = random.Random(1)
    xs = [rng.gauss(0.0, 1.0) for _ in range(3000)] + [rng.gauss(6.0, 1.0) for _ in range(3000)]
    fit = crossrec.fit_gmm(xs)
    assert fit["means"][0] == pytest.approx(0.0, abs=0.15)
    assert fit["means"][1] == pytest.approx(6.0, abs=0.15)
    assert 0.0 < fit["threshold"] < 6.0


def test_synth_is_deterministic():
    a = crossrec.generate_synth(n_users=50, seed=3)
    b = crossrec.generate_synth(n_users=50, seed=3)
    assert a["events"] == b["events"]
    assert a["events"].startswith("user_id,session_id,timestamp,section,object,type")


def test_config_errors_map_to_python():
    with pytest.raises(crossrec.ConfigError):
        crossrec.generate_synth(rho=2.0)
    with pytest.raises(crossrec.CrossrecError):
        crossrec.metrics_at_k([0, 1], [], 1)


def test_train_and_evaluate(tmp_path):
    crossrec.write_synth(tmp_path, n_users=400, seed=9)
    report = crossrec.train_and_evaluate(tmp_path, {"baseline": {"model": "popular"}})
    assert report["model"] == "popular"
    assert 0.0 <= report["metrics"]["hr"] <= 1.0
    assert math.isfinite(report["metrics"]["mrr"])


def test_cli_exit_codes(tmp_path):
    assert crossrec.run_cli("bogus") == 2
    assert crossrec.run_cli("synth", "-o", tmp_path, "-c", tmp_path / "missing.json") == 2
    assert len(crossrec.config_hash({"seed": 1})) == 16
