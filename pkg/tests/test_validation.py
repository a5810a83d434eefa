"""Out-of-sample checks, the 1-D synthetic problem, and experiment plumbing."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from ccopf import (
    ExperimentConfig,
    ExperimentReport,
    FeasibilityPolytope,
    GaussianSpec,
    RepetitionRecord,
    out_of_sample_confidence,
    run_experiment,
    solve_1d_synthetic,
    sweep_1d,
)
from ccopf.kernels import norm_cdf, norm_isf
from ccopf.validation import load_case_ref, resolve_scenario_count
from ccopf.scenario import sample_size_cc
from conftest import TRIANGLE_TEXT, iid_gaussian

Z_95 = 1.6448536269514722


def one_row(offset: float) -> FeasibilityPolytope:
    return FeasibilityPolytope(
        normals=np.array([[1.0]]),
        offsets=np.array([offset]),
        labels=(("injection-upper", 0),),
    )


# ---------------------------------------------------------------------------
# out-of-sample confidence

def test_confidence_matches_closed_form():
    poly = one_row(2.0)
    g = iid_gaussian(1)
    x = np.array([0.2])  # headroom 1.8
    want = float(norm_cdf(1.8))
    prob, stderr = out_of_sample_confidence(x, poly, g, 100_000, seed=0)
    assert stderr == pytest.approx(np.sqrt(prob * (1 - prob) / 100_000))
    assert abs(prob - want) < 4 * stderr


def test_confidence_saturates_for_safe_dispatch():
    poly = one_row(100.0)
    prob, stderr = out_of_sample_confidence(np.array([0.0]), poly, iid_gaussian(1), 1000, seed=1)
    assert prob == 1.0
    assert stderr == 0.0


def test_confidence_reproducible():
    poly = one_row(2.0)
    g = iid_gaussian(1)
    a = out_of_sample_confidence(np.array([0.3]), poly, g, 5000, seed=9)
    b = out_of_sample_confidence(np.array([0.3]), poly, g, 5000, seed=9)
    assert a == b


def test_confidence_requires_samples():
    with pytest.raises(ValueError, match="n_test"):
        out_of_sample_confidence(np.array([0.0]), one_row(1.0), iid_gaussian(1), 0, seed=0)


# ---------------------------------------------------------------------------
# 1-D synthetic problem

def test_sa_solution_reconstructs_from_draws():
    a, n, seed = 2.0, 40, 77
    x_hat, gap = solve_1d_synthetic(a, 0.05, "sa", n, seed)
    draws = np.random.default_rng(seed).standard_normal((n, 1))[:, 0]
    assert x_hat == pytest.approx(a - float(np.max(draws)), abs=1e-12)
    assert gap == pytest.approx(x_hat - (a - Z_95), abs=1e-12)


def test_sa_is_never_anti_conservative():
    # the margin caps the offset at the exact optimum, so the gap cannot
    # be positive regardless of the draws
    for seed in range(30):
        _, gap = solve_1d_synthetic(0.0, 0.05, "sa-is", 25, seed)
        assert gap <= 1e-12


def test_sa_small_samples_overshoot_sometimes():
    # with 5 draws the plain method often lands above the exact optimum
    gaps = [solve_1d_synthetic(0.0, 0.05, "sa", 5, seed)[1] for seed in range(20)]
    assert max(gaps) > 0


def test_sa_is_zero_scenarios_hits_exact_optimum():
    x_hat, gap = solve_1d_synthetic(3.0, 0.05, "sa-is", 0, seed=0)
    assert gap == 0.0
    assert x_hat == pytest.approx(3.0 - Z_95, rel=1e-12)


def test_eta_half_zero_scenarios():
    x_hat, gap = solve_1d_synthetic(1.0, 0.5, "sa-is", 0, seed=0)
    assert x_hat == 1.0
    assert gap == 0.0


def test_unknown_method_rejected():
    with pytest.raises(ValueError, match="unknown method"):
        solve_1d_synthetic(0.0, 0.05, "dc-opf", 10, seed=0)
    with pytest.raises(ValueError, match="non-negative"):
        solve_1d_synthetic(0.0, 0.05, "sa", -2, seed=0)


def test_sweep_matches_frozen_run():
    rows = sweep_1d(2.0, 0.05, 0.01, 5, 10, 123)
    assert [n for _, _, n in rows] == [13, 29, 58, 101, 155]
    assert [rate for _, rate, _ in rows] == [1.0] * 5
    b = [row[0] for row in rows]
    assert b[0] == pytest.approx(2.0 - Z_95, rel=1e-12)
    assert b[-1] == 2.0
    np.testing.assert_allclose(np.diff(b), b[1] - b[0], rtol=1e-9)


def test_sweep_counts_grow_with_offset():
    # larger hard offset covers less mass, so the certified count grows
    rows = sweep_1d(1.0, 0.1, 0.05, 6, 2, 0)
    counts = [n for _, _, n in rows]
    assert counts == sorted(counts)
    assert counts[0] < counts[-1]


def test_sweep_argument_validation():
    with pytest.raises(ValueError, match="grid"):
        sweep_1d(1.0, 0.05, 0.01, 1, 5, 0)
    with pytest.raises(ValueError, match="repetition"):
        sweep_1d(1.0, 0.05, 0.01, 3, 0, 0)


# ---------------------------------------------------------------------------
# experiment configuration and report

def test_config_defaults():
    config = ExperimentConfig(case="case30")
    assert config.methods == ("sa-is",)
    assert config.scenarios == "auto"
    assert config.eta == 0.05


@pytest.mark.parametrize(
    "kwargs",
    [
        {"methods": ("sa", "bootstrap")},
        {"methods": ()},
        {"eta": 0.0},
        {"eta": 0.51},
        {"scenarios": "many"},
        {"scenarios": -1},
        {"reps": 0},
        {"sigma_frac": -0.1},
        {"n_test": 0},
        {"delta": 0.0},
        {"delta": 1.0},
        {"jobs": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(case="case30", **kwargs)


def sample_report() -> ExperimentReport:
    config = ExperimentConfig(case="case30", methods=("dc-opf", "sa"), reps=2, scenarios=10)
    records = (
        RepetitionRecord("dc-opf", 0, 0, 0, "optimal", 100.0, 0.5, 0.01),
        RepetitionRecord("dc-opf", 1, 1, 0, "optimal", 110.0, 0.6, 0.01),
        RepetitionRecord("sa", 0, 0, 10, "optimal", 130.0, 0.95, 0.01),
        RepetitionRecord("sa", 1, 1, 10, "infeasible", math.nan, math.nan, math.nan),
    )
    return ExperimentReport(
        config=config, case_name="case30", resolved={"dc-opf": 0, "sa": 10}, records=records
    )


def test_summary_aggregates():
    summary = sample_report().summary()
    assert summary["dc-opf"]["reps"] == 2
    assert summary["dc-opf"]["optimal"] == 2
    assert summary["dc-opf"]["mean_objective"] == pytest.approx(105.0)
    assert summary["dc-opf"]["min_confidence"] == pytest.approx(0.5)
    assert summary["sa"]["optimal"] == 1
    assert summary["sa"]["mean_objective"] == pytest.approx(130.0)
    assert summary["sa"]["n_scenarios"] == 10


def test_report_round_trips_through_json():
    report = sample_report()
    data = json.loads(json.dumps(report.to_dict()))
    back = ExperimentReport.from_dict(data)
    assert back.config == report.config
    assert back.case_name == report.case_name
    assert back.resolved == report.resolved
    assert back.records[:3] == report.records[:3]
    # nan became null and back
    assert data["records"][3]["objective"] is None
    assert math.isnan(back.records[3].objective)


def test_load_case_ref(tmp_path, case30):
    assert load_case_ref("case30").n == case30.n
    path = tmp_path / "tri.m"
    path.write_text(TRIANGLE_TEXT)
    assert load_case_ref(str(path)).name == "tri"
    with pytest.raises(FileNotFoundError, match="neither on disk"):
        load_case_ref("case999")


def test_resolve_scenario_counts(tmp_path):
    path = tmp_path / "tri.m"
    path.write_text(TRIANGLE_TEXT)
    case = load_case_ref(str(path))
    fixed = ExperimentConfig(case=str(path), scenarios=25)
    assert resolve_scenario_count(fixed, case, "sa-is") == 25
    assert resolve_scenario_count(fixed, case, "dc-opf") == 0
    auto = ExperimentConfig(case=str(path), scenarios="auto", eta=0.05, delta=0.01)
    assert resolve_scenario_count(auto, case, "sa") == sample_size_cc(0.05, 0.01, 1)
    n_is = resolve_scenario_count(auto, case, "sa-is")
    assert 0 < n_is < resolve_scenario_count(auto, case, "sa")
    # degenerate uncertainty needs no scenarios at all
    rigid = ExperimentConfig(case=str(path), scenarios="auto", sigma_frac=0.0)
    assert resolve_scenario_count(rigid, case, "sa-is") == 0


def test_run_experiment_smoke(tmp_path):
    path = tmp_path / "tri.m"
    path.write_text(TRIANGLE_TEXT)
    config = ExperimentConfig(
        case=str(path),
        methods=("dc-opf", "sa", "sa-is"),
        scenarios=20,
        reps=3,
        sigma_frac=0.05,
        n_test=500,
        seed=11,
    )
    report = run_experiment(config)
    assert report.case_name == "tri"
    assert len(report.records) == 9
    for rec in report.records:
        assert rec.status == "optimal"
        assert rec.seed == 11 + rec.rep
        assert 0.0 <= rec.confidence <= 1.0
    summary = report.summary()
    # scenario methods hedge, so they cost at least the nominal dispatch
    assert summary["sa"]["mean_objective"] >= summary["dc-opf"]["mean_objective"] - 1e-9
    assert summary["sa-is"]["mean_objective"] >= summary["dc-opf"]["mean_objective"] - 1e-9
    assert summary["sa-is"]["mean_confidence"] > summary["dc-opf"]["mean_confidence"]


def test_run_experiment_parallel_matches_serial(tmp_path):
    path = tmp_path / "tri.m"
    path.write_text(TRIANGLE_TEXT)
    base = dict(
        case=str(path),
        methods=("sa", "sa-is"),
        scenarios=15,
        reps=2,
        sigma_frac=0.05,
        n_test=200,
        seed=5,
    )
    serial = run_experiment(ExperimentConfig(**base, jobs=1))
    parallel = run_experiment(ExperimentConfig(**base, jobs=2))
    assert serial.records == parallel.records
    assert serial.resolved == parallel.resolved


def test_experiment_records_infeasible_runs(tmp_path):
    # a load beyond total capacity cannot be dispatched
    path = tmp_path / "heavy.m"
    path.write_text(TRIANGLE_TEXT.replace("\t3\t1\t80;", "\t3\t1\t200;"))
    config = ExperimentConfig(case=str(path), methods=("dc-opf",), reps=1, n_test=10)
    report = run_experiment(config)
    rec = report.records[0]
    assert rec.status == "infeasible"
    assert math.isnan(rec.objective)
    assert math.isnan(rec.confidence)
    assert report.summary()["dc-opf"]["optimal"] == 0
