import csv
import json
import math

import numpy as np
import pytest

from wishart_cpc import McConfig, McReport, run_clt_cpc, run_clt_quartet, run_moment_validation, run_size_power
from wishart_cpc.exceptions import InvalidParameterError
from wishart_cpc.harness import PRESETS, build_pair, build_sigma, run_experiment, summarize


def small(kind, **kw):
    base = {
        "clt_quartet": dict(p=6, ns=(3, 4, 3, 4)),
        "clt_cpc": dict(p=8, ns=(5, 5), pair={"family": "rotated"}),
        "size_power": dict(p=10, ns=(6, 6)),
        "moment_validation": dict(p=2, ns=(1, 2, 2, 1)),
    }[kind]
    base.update(kw)
    base.setdefault("replications", 300)
    return McConfig(kind=kind, **base)


# ----------------------------------------------------------------- config

def test_config_validation():
    with pytest.raises(InvalidParameterError):
        McConfig(kind="nope", p=2, replications=100, delta=0.5)
    with pytest.raises(InvalidParameterError):
        McConfig(kind="clt_quartet", p=2, replications=99, delta=0.5)
    with pytest.raises(InvalidParameterError):
        McConfig(kind="clt_quartet", p=2, replications=100)
    with pytest.raises(InvalidParameterError):
        McConfig(kind="clt_cpc", p=2, replications=100, ns=(1, 4))
    with pytest.raises(InvalidParameterError):
        McConfig.from_dict({"kind": "clt_quartet", "p": 2, "replications": 100, "delta": 0.5, "typo": 1})


def test_sizes_from_delta():
    assert McConfig(kind="clt_quartet", p=200, replications=100, delta=0.7).sizes() == (41,) * 4
    assert McConfig(kind="clt_cpc", p=100, replications=100, delta=0.6).sizes() == (16, 16)


def test_config_round_trip():
    cfg = small("clt_cpc")
    assert McConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    McConfig.from_dict(PRESETS[name]())


def test_build_sigma_families():
    np.testing.assert_array_equal(build_sigma(None, 3), np.eye(3))
    np.testing.assert_array_equal(build_sigma("identity", 2), np.eye(2))
    np.testing.assert_allclose(build_sigma({"family": "scaled", "scale": 2}, 2), 2 * np.eye(2))
    assert build_sigma({"family": "ar1", "rho": 0.5}, 3)[0, 2] == pytest.approx(0.25)
    a = build_sigma({"family": "random", "seed": 4}, 5)
    assert np.all(np.linalg.eigvalsh(a) >= 0.5 - 1e-12)
    with pytest.raises(InvalidParameterError):
        build_sigma({"family": "mystery"}, 2)
    with pytest.raises(InvalidParameterError):
        build_sigma({"entries": [[1.0]]}, 2)


def test_build_pair_families():
    from wishart_cpc import commutator_theta

    assert commutator_theta(build_pair({"family": "null"}, 4)) == 0.0
    rotated = build_pair({"family": "rotated", "high": 3, "low": 1}, 100)
    # 45 degree rotations of every (i, i + p/2) plane with eigenvalues 3 and 1
    assert commutator_theta(rotated) == pytest.approx(2.0, rel=1e-12)


# ---------------------------------------------------------------- reports

def test_summarize_matches_numpy():
    v = np.random.default_rng(0).standard_normal(1000)
    s = summarize(v)
    assert s["mean"] == pytest.approx(v.mean())
    assert s["variance"] == pytest.approx(v.var(ddof=1))
    assert s["se_mean"] == pytest.approx(v.std(ddof=1) / math.sqrt(1000))


@pytest.mark.parametrize("kind", ["clt_quartet", "clt_cpc", "size_power", "moment_validation"])
def test_worker_count_does_not_change_results(kind):
    one = run_experiment(small(kind, replications=1100, workers=1))
    many = run_experiment(small(kind, replications=1100, workers=4))
    a, b = one.numeric_payload(), many.numeric_payload()
    a["config"].pop("workers")
    b["config"].pop("workers")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_report_round_trip_and_ranges():
    rep = run_clt_quartet(small("clt_quartet"))
    back = McReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back.to_dict() == rep.to_dict()
    assert 0.0 <= rep.ks_distance <= 1.0
    assert "runtime_seconds" in rep.metadata
    assert "replication_index" in rep.seed_rule


def test_base_seed_changes_output():
    a = run_clt_quartet(small("clt_quartet", base_seed=1))
    b = run_clt_quartet(small("clt_quartet", base_seed=2))
    assert a.mean != b.mean


def test_kind_mismatch():
    with pytest.raises(InvalidParameterError):
        run_clt_cpc(small("clt_quartet"))


def test_raw_csv(tmp_path):
    path = tmp_path / "raw.csv"
    rep = run_experiment(small("clt_cpc"), raw_csv=str(path))
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["replication", "z", "theta_hat", "theta_hat_alt"]
    assert len(rows) == 301
    z = np.array([float(r[1]) for r in rows[1:]])
    assert z.mean() == pytest.approx(rep.mean, rel=1e-12)


# ------------------------------------------------------ statistical checks

def test_exact_standardization_small_p():
    rep = run_clt_quartet(McConfig(kind="clt_quartet", p=2, ns=(1, 1, 1, 1), replications=20_000))
    assert abs(rep.z_scores["mean_zero"]) <= 4
    assert abs(rep.z_scores["variance_one"]) <= 4


def test_exact_standardization_unequal_sizes():
    cfg = McConfig(kind="clt_quartet", p=3, ns=(2, 5, 3, 4), replications=20_000,
                   sigmas=[{"family": "random", "seed": s} for s in range(4)])
    rep = run_clt_quartet(cfg)
    assert abs(rep.z_scores["mean_zero"]) <= 4
    assert abs(rep.z_scores["variance_one"]) <= 4


def test_moment_validation_scalar_short():
    cfg = McConfig(kind="moment_validation", p=1, ns=(1, 1, 1, 1), replications=20_000)
    rep = run_moment_validation(cfg)
    assert rep.extra["exact_variance_trace"] == 80.0
    assert all(abs(z) <= 4 for z in rep.z_scores.values())
    assert rep.extra["max_telescoping_error"] < 1e-9


def test_clt_cpc_unbiased_small():
    rep = run_clt_cpc(small("clt_cpc", replications=4000))
    assert abs(rep.z_scores["theta_hat_unbiased"]) <= 4
    assert abs(rep.z_scores["theta_hat_alt_unbiased"]) <= 4


def test_half_level_sanity():
    cfg = McConfig(kind="size_power", p=100, ns=(40, 40), replications=1000, alpha=0.5,
                   pair={"family": "null"}, workers=4)
    rep = run_size_power(cfg)
    assert abs(rep.rejection_rate - 0.5) <= 0.03
