import numpy as np
import pytest

from conftest import random_parameters
from plankton_qso import (
    Family,
    HypothesisError,
    InvalidParametersError,
    Parameters,
    ReducedBacteriaMap,
    Scenario,
    SimplexError,
    StopReason,
    apply_v,
    iterate,
    orbit,
    reduced_bacteria_map,
    scenario,
    vertex,
)
from plankton_qso.dynamics import HISTORY_CAPACITY


def python_orbit(p, x0, n):
    xs = [np.asarray(x0, dtype=float)]
    for _ in range(n):
        xs.append(apply_v(p, xs[-1]))
    return np.array(xs)


class TestIterate:
    def test_no_dim_example(self, tenth):
        p = tenth.replace(a4=0.5)
        traj, verdict = iterate(p, [0.5, 0, 0, 0, 0.5, 0])
        assert verdict.converged
        np.testing.assert_allclose(verdict.limit, vertex(5), atol=1e-12)
        # x1 decays exactly geometrically while the other consumers are absent
        for n, x in zip(traj.history_steps[:20], traj.history[:20]):
            assert x[0] == pytest.approx(0.5 * 0.5**n, rel=1e-12, abs=1e-300)

    def test_bacteria_reduction_example(self):
        p = Parameters.uniform(0.1, a11=0.4, a12=0.2)
        _, verdict = iterate(p, [0, 0, 0, 0.9, 0, 0.1])
        np.testing.assert_allclose(verdict.limit, [0, 0, 0, 0.5, 0, 0.5], atol=1e-6)
        assert verdict.matched_family is Family.LAMBDA2
        assert verdict.stop_reason is StopReason.STEP_BELOW_TOL

    def test_bacteria_coordinate_follows_reduced_map(self):
        p = Parameters.uniform(0.1, a11=0.4, a12=0.2)
        f = ReducedBacteriaMap(p.a11, p.a12)
        xs = orbit(p, [0, 0, 0, 0.9, 0, 0.1], 50)
        x4 = 0.9
        for row in xs[1:]:
            x4 = f(x4)
            assert row[3] == pytest.approx(x4, rel=1e-13)

    def test_fixed_start_converges_within_k_steps(self, rng):
        p = random_parameters(rng)
        for x0 in (vertex(5), vertex(6), [0, 0, 0, 0, 0.3, 0.7]):
            _, verdict = iterate(p, x0)
            assert verdict.converged and verdict.iterations_used <= 10
            np.testing.assert_array_equal(verdict.limit, x0)
            assert verdict.matched_family is Family.LAMBDA1
            assert verdict.lambda_bar == pytest.approx(x0[4])

    def test_matches_step_by_step_application(self, rng):
        p = random_parameters(rng)
        x0 = rng.dirichlet(np.ones(6))
        expected = python_orbit(p, x0, 300)
        np.testing.assert_allclose(orbit(p, x0, 300), expected, rtol=0, atol=1e-15)
        traj, _ = iterate(p, x0, max_iterations=300, step_tol=0.0)
        np.testing.assert_allclose(traj.final, expected[-1], atol=1e-15)

    def test_max_iterations_is_reported(self, rng):
        p = random_parameters(rng)
        traj, verdict = iterate(p, rng.dirichlet(np.ones(6)), max_iterations=5)
        assert verdict.stop_reason is StopReason.MAX_ITERATIONS
        assert not verdict.converged
        assert traj.n_steps == 5
        assert traj.history_steps.tolist() == [0, 1, 2, 3, 4, 5]

    def test_zero_iterations(self, tenth):
        traj, verdict = iterate(tenth, vertex(1), max_iterations=0)
        assert traj.n_steps == 0 and not verdict.converged
        np.testing.assert_array_equal(traj.final, vertex(1))

    def test_deterministic(self, rng):
        p = random_parameters(rng)
        x0 = rng.dirichlet(np.ones(6))
        a, va = iterate(p, x0)
        b, vb = iterate(p, x0)
        assert a.to_csv() == b.to_csv()
        assert va.to_dict() == vb.to_dict()

    def test_adaptive_history_is_bounded_and_ordered(self):
        # a11 == a12 makes bacteria decay like 1/n: a long run
        p = Parameters.uniform(0.1, a11=0.3, a12=0.3)
        traj, verdict = iterate(p, [0, 0, 0, 0.5, 0, 0.5], max_iterations=100_000)
        assert len(traj.history) <= HISTORY_CAPACITY
        steps = traj.history_steps
        assert steps[0] == 0 and steps[-1] == traj.n_steps
        assert np.all(np.diff(steps) > 0)
        assert traj.stride > 1
        full = orbit(p, [0, 0, 0, 0.5, 0, 0.5], int(steps[-1]))
        np.testing.assert_array_equal(traj.history, full[steps])

    def test_fixed_stride_keeps_latest_points(self, rng):
        p = Parameters.uniform(0.1, a11=0.3, a12=0.3)
        traj, _ = iterate(p, [0, 0, 0, 0.5, 0, 0.5], max_iterations=50_000, stride=7)
        steps = traj.history_steps
        assert len(steps) == HISTORY_CAPACITY
        assert steps[-1] == traj.n_steps
        assert np.all(np.diff(steps[:-1]) == 7)

    def test_stored_points_lie_on_the_simplex(self, rng):
        p = random_parameters(rng)
        traj, _ = iterate(p, rng.dirichlet(np.ones(6)), stride=1)
        assert traj.history.min() >= 0.0
        np.testing.assert_allclose(traj.history.sum(axis=1), 1.0, atol=1e-12)

    def test_csv_layout(self, tenth):
        traj, _ = iterate(tenth, [0.5, 0, 0, 0, 0.5, 0], max_iterations=3)
        lines = traj.to_csv().splitlines()
        assert lines[0] == "n,x1,x2,x3,x4,x5,x6,step_norm"
        assert lines[1].startswith("0,0.5,0,0,0,0.5,0,nan")
        row = lines[2].split(",")
        assert float(row[1]) == traj.history[1][0]  # 17 digits round-trip exactly

    def test_rejects_bad_inputs(self, tenth):
        with pytest.raises(SimplexError):
            iterate(tenth, [0.5, 0.6, 0, 0, 0, 0])
        with pytest.raises(InvalidParametersError):
            iterate(Parameters.uniform(0.1, a2=0.9, a4=0.5), vertex(5))
        with pytest.raises(ValueError):
            iterate(tenth, vertex(5), K=0)
        with pytest.raises(ValueError):
            iterate(tenth, vertex(5), stride=0)


class TestReducedMap:
    def test_examples(self):
        f = ReducedBacteriaMap(0.4, 0.2)
        assert f(0.0) == 0.0
        assert f(0.5) == pytest.approx(0.5)
        assert f.fixed_points == (0.0, 0.5)
        assert reduced_bacteria_map(0.4, 0.2, 0.5) == pytest.approx(0.5)

    def test_equal_rates_are_non_hyperbolic_at_zero(self):
        assert ReducedBacteriaMap(0.3, 0.3).derivative(0.0) == 1.0

    def test_rejects_out_of_range_rates(self):
        with pytest.raises(ValueError):
            ReducedBacteriaMap(0.0, 0.2)


class TestScenario:
    def test_no_dim(self, tenth):
        pred = scenario(tenth, [0.3, 0, 0, 0, 0.7, 0], Scenario.NO_DIM)
        np.testing.assert_array_equal(pred.point, vertex(5))

    def test_no_dim_needs_image_without_dim(self, tenth):
        with pytest.raises(HypothesisError, match="V\\(x\\)6=0"):
            scenario(tenth, [0.3, 0.1, 0, 0, 0.6, 0], Scenario.NO_DIM)

    def test_no_dom_branches(self):
        x0 = [0, 0, 0, 0.4, 0, 0.6]
        low = scenario(Parameters.uniform(0.1, a11=0.2, a12=0.3), x0, "NoDOM")
        np.testing.assert_array_equal(low.point, vertex(6))
        high = scenario(Parameters.uniform(0.1, a11=0.4, a12=0.2), x0, "NoDOM")
        np.testing.assert_allclose(high.point, [0, 0, 0, 0.5, 0, 0.5])
        assert high.family is Family.LAMBDA2

    def test_no_bacteria_predicts_segment(self, tenth):
        pred = scenario(tenth, [0.2, 0.2, 0.2, 0, 0.2, 0.2], Scenario.NO_BACTERIA)
        assert pred.on_segment and pred.family is Family.LAMBDA1
        assert pred.distance([0, 0, 0, 0, 0.4, 0.6]) == 0.0

    def test_named_hypothesis_failure(self, tenth):
        with pytest.raises(HypothesisError, match="a10\\+a11≤a12"):
            scenario(tenth, [0.2] * 5 + [0.0], Scenario.ALL_SPECIES)

    def test_refuses_fixed_start(self, tenth):
        with pytest.raises(HypothesisError, match="fixed point"):
            scenario(tenth, vertex(5), Scenario.NO_BACTERIA)


class TestProofInvariants:
    def test_dom_is_monotone_without_bacteria(self, rng):
        for _ in range(20):
            p = random_parameters(rng)
            x0 = rng.dirichlet(np.ones(6))
            x0[3] = 0.0
            x0 /= x0.sum()
            xs = orbit(p, x0, 5000)
            assert np.all(np.diff(xs[:, 4]) >= 0.0)

    def test_zooplankton_decays_geometrically_without_phyto(self, rng):
        p = random_parameters(rng)
        x0 = rng.dirichlet(np.ones(6))
        x0[0] = 0.0
        x0 /= x0.sum()
        xs = orbit(p, x0, 200)
        ratio = 1.0 - p.a5 - p.a6
        np.testing.assert_allclose(xs[1:, 1], xs[:-1, 1] * ratio, rtol=1e-12, atol=1e-300)
