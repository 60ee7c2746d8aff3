import json

import numpy as np
import pytest

from plankton_qso import Constraint, Family, Parameters, SamplingError, validate_parameters
from plankton_qso.dynamics import PredictedLimit
from plankton_qso.harness import (
    ExperimentSpec,
    Target,
    predicted_limit,
    run_experiment,
    sample_initial_point,
    sample_parameters,
    target_constraints,
    target_zero_coordinates,
)


class TestSampling:
    def test_plain_draws_are_valid(self, rng):
        for _ in range(200):
            assert validate_parameters(sample_parameters((), rng)).valid

    def test_infeasible_constraints_fail_with_count(self, rng):
        tight = (
            Constraint("a2≥0.9", lambda r: r.a2 - 0.9),
            Constraint("a4≥0.9", lambda r: r.a4 - 0.9),
        )
        with pytest.raises(SamplingError, match="rejections"):
            sample_parameters(tight, rng, max_rejections=50_000)

    def test_conjecture_hypotheses_hold_with_margin(self, rng):
        for _ in range(50):
            p = sample_parameters(target_constraints(Target.CONJECTURE1A), rng)
            assert p.a4 < p.a1
            assert p.a12 * p.a1 - p.a11 * p.a4 > 1e-6
            assert p.a10 * p.a1 - p.a10 * p.a4 - p.a12 * p.a1 + p.a11 * p.a4 > 1e-6
            assert p.a11 > p.a12 + 1e-6
            assert p.a3 <= p.a7 <= p.a8 + p.a9

    def test_initial_points_respect_zeros(self, rng):
        for _ in range(100):
            x = sample_initial_point(rng, (1, 2))
            assert x[1] == x[2] == 0.0
            assert x.min() >= 0.0 and x.sum() == pytest.approx(1.0)

    def test_target_faces(self):
        assert target_zero_coordinates(Target.PROP51) == (1, 2, 3, 5)
        assert target_zero_coordinates(Target.PROP52) == (0, 1, 2, 4)
        assert target_zero_coordinates(Target.CONJECTURE1A, "x3=0") == (2,)
        assert target_zero_coordinates(Target.CONJECTURE2, "x1=0") == (0,)

    def test_conjecture_prediction_uses_closed_form(self, rng):
        p = sample_parameters(target_constraints(Target.CONJECTURE1B), rng)
        pred = predicted_limit(Target.CONJECTURE1B, p, rng.dirichlet(np.ones(6)))
        r = p.a12 / p.a11
        np.testing.assert_allclose(pred.point, [0, 0, 0, 1 - r, 0, r])
        assert pred.family is Family.LAMBDA2


class TestSpec:
    @pytest.mark.parametrize("draws, points", [(0, 10), (10, 0), (-1, 1)])
    def test_counts_must_be_positive(self, draws, points):
        with pytest.raises(ValueError):
            ExperimentSpec(Target.PROP51, draws, points)

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="variant"):
            ExperimentSpec(Target.PROP52, variant="sideways")
        with pytest.raises(ValueError):
            ExperimentSpec(Target.PROP51, variant="a11>a12")

    def test_default_variant(self):
        assert ExperimentSpec("Conjecture2").variant == "params"
        assert ExperimentSpec("Prop53").variant is None


class TestRunExperiment:
    @pytest.mark.parametrize("target", ["Prop51", "Prop53", "PropK1"])
    def test_small_proved_runs_match(self, target):
        report = run_experiment(ExperimentSpec(target, 5, 3, seed=11))
        assert report.n_runs == 15
        assert report.n_matched_prediction == report.n_converged == 15
        assert report.passed and report.counterexamples == ()

    def test_counts_are_ordered(self):
        report = run_experiment(ExperimentSpec("Conjecture1b", 5, 3, seed=2))
        assert report.n_matched_prediction <= report.n_converged <= report.n_runs
        assert report.passed  # conjecture reports never fail
        assert sum(report.stop_reasons.values()) == report.n_runs

    def test_reproducible_and_independent_of_workers(self):
        spec = ExperimentSpec("Prop52", 4, 3, seed=5, variant="a11>a12")
        a = run_experiment(spec).to_json()
        b = run_experiment(spec).to_json()
        c = run_experiment(spec, workers=2).to_json()
        assert a == b == c

    def test_wrong_prediction_is_captured(self):
        def wrong(pred, params, x0):
            return PredictedLimit("wrong", np.eye(6)[0], pred.family)

        spec = ExperimentSpec("Prop52", 30, 1, seed=3)
        report = run_experiment(spec, prediction_hook=wrong)
        assert not report.passed
        assert report.n_counterexamples == 30
        assert len(report.counterexamples) == 20  # capped
        doc = json.loads(report.to_json())
        ce = doc["counterexamples"][0]
        assert ce["rerun"].startswith("plankton-qso simulate --a1 ")
        rates = Parameters.from_mapping(ce["config"])
        assert rates.valid
        assert len(ce["config"]["x0"]) == 6

    def test_timing_is_excluded_by_default(self):
        report = run_experiment(ExperimentSpec("Prop51", 1, 1))
        assert "wall_time" not in report.to_dict()
        assert report.to_dict(include_timing=True)["wall_time"] >= 0.0
