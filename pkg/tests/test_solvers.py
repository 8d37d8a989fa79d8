import numpy as np
import pytest
from sklearn.base import clone

from initik import (
    DiagonalOperator,
    FistaSolver,
    InertialIteratedTikhonov,
    IteratedTikhonov,
    NesterovSolver,
    Problem,
    discrepancy_reached,
    extrapolate,
    gaussian_psf,
    inertial_weight,
    lambda_value,
    make_deblurring_problem,
    make_dense_problem,
    make_phantom_image,
    normalize_lambda_schedule,
    theta_weight,
    tikhonov_step,
)

# frozen with mpmath at 30 digits: 2**(-1.1)
TWO_POW_MINUS_1P1 = 0.466516495768403708


def scalar_problem():
    """A = (1), y = (1): iterates follow x_{k+1} = (x_k + 1) / 2."""
    op = DiagonalOperator([1.0])
    one = np.array([1.0])
    return Problem(op, one, one, one.copy(), 0.0)


class TestSchedules:
    def test_theta_at_one(self):
        assert theta_weight(1, 1.1) == 1.0

    def test_theta_high_precision_value(self):
        assert theta_weight(2, 1.1) == pytest.approx(TWO_POW_MINUS_1P1,
                                                     abs=1e-15)
        assert theta_weight(2, 1.1) == pytest.approx(0.466516, abs=1e-6)

    def test_theta_exact_power(self):
        assert theta_weight(4, 2.0) == 0.0625

    def test_theta_undefined_at_zero(self):
        with pytest.raises(ValueError):
            theta_weight(0, 1.1)

    def test_geometric_schedule_values(self):
        sched = ("geometric", 2.0 / 3.0)
        assert lambda_value(0, sched) == 1.0
        assert lambda_value(1, sched) == pytest.approx(0.666667, abs=1e-6)
        assert lambda_value(2, sched) == pytest.approx(0.444444, abs=1e-6)

    def test_geometric_with_scale(self):
        assert lambda_value(2, ("geometric", (1.5, 20.0))) == pytest.approx(45.0)
        assert lambda_value(0, "geometric 1.5 20") == pytest.approx(20.0)

    def test_constant_schedule(self):
        assert lambda_value(17, ("constant", 1.0)) == 1.0
        assert lambda_value(3, 2.5) == 2.5

    def test_custom_schedule_and_clamping(self):
        sched = ("custom", [3.0, 2.0, 1.0])
        assert lambda_value(1, sched) == 2.0
        assert lambda_value(9, sched) == 1.0

    def test_string_forms(self):
        assert normalize_lambda_schedule("geometric 2/3") == ("geometric", 2.0 / 3.0)
        assert normalize_lambda_schedule("constant(1.5)") == ("constant", 1.5)
        assert normalize_lambda_schedule("custom 3,2,1") == ("custom", [3.0, 2.0, 1.0])

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            lambda_value(0, ("geometric", -1.0))
        with pytest.raises(ValueError):
            lambda_value(0, ("constant", 0.0))
        with pytest.raises(ValueError):
            lambda_value(0, ("custom", [1.0, 0.0]))


class TestInertialWeight:
    def test_step_zero_returns_cap(self):
        assert inertial_weight(0, 0.0, None, 0.45) == 0.45
        assert inertial_weight(0, 123.0, None, 0.0) == 0.0

    def test_zero_difference_gives_zero(self):
        assert inertial_weight(3, 0.0, 0.3, 0.9) == 0.0

    def test_three_way_minimum(self):
        assert inertial_weight(2, 0.25, 0.5, 0.9) == 0.5  # min(2, 0.5, 0.9)
        assert inertial_weight(2, 4.0, 0.5, 0.9) == 0.125  # theta / diff
        assert inertial_weight(2, 0.25, 0.8, 0.3) == 0.3  # cap binds

    def test_cap_must_be_below_one(self):
        with pytest.raises(ValueError):
            inertial_weight(1, 1.0, 0.5, 1.0)


class TestExtrapolate:
    def test_zero_weight_returns_current(self):
        x = np.array([1.0, 2.0])
        np.testing.assert_array_equal(extrapolate(x, np.array([5.0, -1.0]), 0.0), x)

    def test_equal_points_fixed(self):
        x = np.array([3.0, 4.0])
        np.testing.assert_array_equal(extrapolate(x, x, 0.7), x)

    def test_arithmetic(self):
        got = extrapolate(np.array([2.0, 0.0]), np.array([0.0, 0.0]), 0.5)
        np.testing.assert_array_equal(got, [3.0, 0.0])

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            extrapolate(np.ones(3), np.ones(2), 0.1)


class TestDiscrepancy:
    def test_boundary_inclusive(self):
        assert discrepancy_reached(0.3, 1.5, 0.2)

    def test_just_above(self):
        assert not discrepancy_reached(0.31, 1.5, 0.2)

    def test_exact_data_limit(self):
        assert discrepancy_reached(0.0, 1.5, 0.0)
        assert not discrepancy_reached(1e-300, 1.5, 0.0)

    def test_tau_constraint(self):
        with pytest.raises(ValueError, match="tau"):
            discrepancy_reached(1.0, 1.0, 0.1)


class TestTikhonovStep:
    def test_scalar_closed_form(self):
        # x = (lam*a*y + w) / (lam*a^2 + 1) = (1*2*2 + 0) / 5
        op = DiagonalOperator([2.0])
        x, _ = tikhonov_step(op, np.zeros(1), 1.0, np.array([2.0]), tol=1e-14)
        np.testing.assert_allclose(x, [0.8], atol=1e-12)

    def test_fixed_point_at_solution(self):
        op = DiagonalOperator(np.ones(4))
        truth = np.array([1.0, -2.0, 0.5, 3.0])
        x, _ = tikhonov_step(op, truth, 1.0, truth, tol=1e-14)
        np.testing.assert_allclose(x, truth, atol=1e-10)

    def test_tiny_lambda_returns_w(self):
        rng = np.random.default_rng(0)
        op = DiagonalOperator(rng.standard_normal(5))
        w = rng.standard_normal(5)
        data = rng.standard_normal(5)
        x, _ = tikhonov_step(op, w, 1e-12, data, tol=1e-14)
        assert np.linalg.norm(x - w) <= 1e-10

    def test_warm_and_cold_start_agree(self):
        rng = np.random.default_rng(1)
        from initik import DenseOperator

        op = DenseOperator(rng.standard_normal((6, 5)))
        w = rng.standard_normal(5)
        data = rng.standard_normal(6)
        cold, _ = tikhonov_step(op, w, 0.8, data, tol=1e-12)
        warm, _ = tikhonov_step(op, w, 0.8, data, tol=1e-12,
                                x_anchor=rng.standard_normal(5))
        assert np.linalg.norm(cold - warm) <= 1e-8

    def test_unknown_solver_rejected(self):
        with pytest.raises(ValueError, match="solver"):
            tikhonov_step(DiagonalOperator([1.0]), np.zeros(1), 1.0,
                          np.zeros(1), solver="lu")


class TestImplicitSolvers:
    def test_scalar_recursion_oracle(self):
        est = InertialIteratedTikhonov(
            alpha_bar=0.0, lam=("constant", 1.0), max_outer=4, inner_tol=1e-14
        )
        est.fit_problem(scalar_problem(), x0=0.0)
        values = [float(x[0]) for x in est.trace_.iterates]
        np.testing.assert_allclose(values, [0.0, 0.5, 0.75, 0.875, 0.9375],
                                   atol=1e-12)

    def test_alpha_zero_reduces_to_iterated_tikhonov(self):
        problem = make_dense_problem(rows=12, cols=10, noise_level=0.02, seed=3)
        kwargs = dict(tau=1.5, lam=("constant", 1.0), inner_tol=1e-8,
                      max_outer=30, exact_data_tol=0.0)
        ini = InertialIteratedTikhonov(alpha_bar=0.0, **kwargs)
        ini.fit(problem.operator, problem.noisy_data, delta=0.0,
                true_solution=problem.ground_truth)
        it = IteratedTikhonov(**kwargs)
        it.fit(problem.operator, problem.noisy_data, delta=0.0,
               true_solution=problem.ground_truth)
        assert ini.n_iter_ == it.n_iter_ == 30
        for a, b in zip(ini.trace_.iterates, it.trace_.iterates):
            assert np.linalg.norm(a - b) <= 1e-10
        assert ini.inner_iterations_ == it.inner_iterations_

    def test_discrepancy_semantics_on_trace(self):
        problem = make_dense_problem(rows=12, cols=10, noise_level=0.05, seed=7)
        est = IteratedTikhonov(tau=1.5, lam=("constant", 1.0), max_outer=400,
                               inner_tol=1e-10)
        est.fit_problem(problem, x0=0.0)
        assert est.stop_reason_ == "discrepancy"
        k_star = est.stop_index_
        threshold = 1.5 * problem.delta
        assert est.trace_.residual_norm[k_star] <= threshold
        assert est.trace_.residual_norm[k_star - 1] > threshold

    def test_residual_monotone_through_step(self):
        image = make_phantom_image(32, 32)
        problem = make_deblurring_problem(image, gaussian_psf(9, 1.5), 0.01,
                                          seed=2)
        est = InertialIteratedTikhonov(tau=1.1, alpha_bar=0.45,
                                       lam=("geometric", 1.5), max_outer=60)
        est.fit_problem(problem, x0=0.0)
        trace = est.trace_
        scale = np.linalg.norm(problem.noisy_data)
        for k in range(trace.n_steps):
            res_w = np.linalg.norm(
                problem.operator.apply(trace.extrapolants[k])
                - problem.noisy_data)
            res_next = np.linalg.norm(
                problem.operator.apply(trace.iterates[k + 1])
                - problem.noisy_data)
            assert res_next <= res_w + 1e-8 * scale

    def test_error_contraction_toward_extrapolant(self):
        problem = make_dense_problem(rows=12, cols=10, noise_level=0.05, seed=5)
        est = InertialIteratedTikhonov(tau=1.5, alpha_bar=0.45,
                                       lam=("constant", 1.0), inner_tol=1e-10,
                                       max_outer=100)
        est.fit_problem(problem, x0=0.0)
        trace = est.trace_
        truth = problem.ground_truth
        for k in range(trace.n_steps):
            res_next = np.linalg.norm(
                problem.operator.apply(trace.iterates[k + 1])
                - problem.noisy_data)
            if res_next < problem.delta:
                continue
            err_next = np.linalg.norm(trace.iterates[k + 1] - truth)
            err_w = np.linalg.norm(trace.extrapolants[k] - truth)
            assert err_next <= err_w + 1e-8

    def test_inertia_budget_respected(self):
        problem = make_dense_problem(rows=12, cols=10, noise_level=0.01, seed=9)
        est = InertialIteratedTikhonov(tau=1.5, alpha_bar=0.45,
                                       lam=("constant", 1.0), inner_tol=1e-10,
                                       max_outer=100)
        est.fit_problem(problem, x0=0.0)
        assert est.trace_.sum_eta <= est.trace_.sum_theta + 1e-12

    def test_finite_stopping_with_constant_multiplier(self):
        problem = make_dense_problem(rows=12, cols=10, noise_level=0.05, seed=1)
        est = InertialIteratedTikhonov(tau=1.5, lam=("constant", 1.0),
                                       max_outer=500, inner_tol=1e-10)
        est.fit_problem(problem, x0=0.0)
        assert est.stop_reason_ == "discrepancy"

    def test_exact_data_stop(self):
        op = DiagonalOperator(np.ones(3))
        truth = np.array([1.0, 2.0, 3.0])
        problem = Problem(op, truth, truth.copy(), truth.copy(), 0.0)
        est = IteratedTikhonov(lam=("constant", 1.0), max_outer=200,
                               inner_tol=1e-14, exact_data_tol=1e-10)
        est.fit_problem(problem, x0=0.0)
        assert est.stop_reason_ == "exact_tol"
        assert est.trace_.residual_norm[-1] <= 1e-10 * np.linalg.norm(truth)

    def test_max_outer_zero_records_start_only(self):
        est = IteratedTikhonov(lam=("constant", 1.0), max_outer=0)
        est.fit_problem(scalar_problem(), x0=0.0)
        assert est.stop_reason_ == "max_outer"
        assert est.n_iter_ == 0
        assert len(est.trace_.k) == 1

    def test_row_semantics(self):
        problem = make_dense_problem(rows=10, cols=8, noise_level=0.05, seed=4)
        est = InertialIteratedTikhonov(tau=1.5, lam=("geometric", 1.5),
                                       inner_tol=1e-10, max_outer=50)
        est.fit_problem(problem, x0=0.0)
        trace = est.trace_
        assert trace.inner_iterations[0] == 0
        assert trace.alpha[0] == est.alpha_bar
        np.testing.assert_allclose(trace.lam,
                                   [1.5**k for k in trace.k], rtol=1e-15)

    def test_invalid_tau_named(self):
        est = InertialIteratedTikhonov(tau=0.5)
        with pytest.raises(ValueError, match="tau must be > 1"):
            est.fit_problem(scalar_problem())

    def test_cold_start_agrees_with_warm_start(self):
        problem = make_dense_problem(rows=12, cols=10, noise_level=0.02,
                                     seed=13)
        runs = []
        for warm in (True, False):
            est = InertialIteratedTikhonov(tau=1.5, lam=("constant", 2.0),
                                           inner_tol=1e-10, warm_start=warm,
                                           max_outer=60)
            est.fit_problem(problem, x0=0.0)
            runs.append(est)
        assert runs[0].stop_index_ == runs[1].stop_index_
        for a, b in zip(runs[0].trace_.iterates, runs[1].trace_.iterates):
            assert np.linalg.norm(a - b) <= 1e-7

    def test_forced_cg_agrees_with_spectral_default(self):
        image = make_phantom_image(16, 16)
        problem = make_deblurring_problem(image, gaussian_psf(5, 1.0), 0.01,
                                          seed=1)
        spectral = IteratedTikhonov(tau=1.5, lam=("geometric", 1.5),
                                    max_outer=30)
        spectral.fit_problem(problem, x0=0.0)
        assert spectral.inner_iterations_ == 0  # exact solves, no iterations
        cg = IteratedTikhonov(tau=1.5, lam=("geometric", 1.5), max_outer=30,
                              inner_solver="cg", inner_tol=1e-12)
        cg.fit_problem(problem, x0=0.0)
        assert cg.stop_index_ == spectral.stop_index_
        assert cg.inner_iterations_ > 0
        for a, b in zip(spectral.trace_.iterates, cg.trace_.iterates):
            assert np.linalg.norm(a - b) <= 1e-8


class TestExplicitSolvers:
    def test_nesterov_momentum_values(self):
        est = NesterovSolver(momentum_alpha=3.0)
        assert est._momentum(0, None)[0] == 0.0  # clamped
        assert est._momentum(1, None)[0] == 0.0
        assert est._momentum(4, None)[0] == pytest.approx(0.5)

    def test_nesterov_alpha_constraint(self):
        est = NesterovSolver(momentum_alpha=2.0)
        with pytest.raises(ValueError, match="momentum_alpha"):
            est.fit_problem(scalar_problem())

    def test_first_extrapolant_equals_start(self):
        problem = make_dense_problem(rows=10, cols=8, noise_level=0.05, seed=6)
        est = NesterovSolver(tau=1.5, max_outer=500)
        est.fit_problem(problem, x0=0.0)
        trace = est.trace_
        np.testing.assert_array_equal(trace.extrapolants[0], trace.iterates[0])

    def test_fista_t_sequence(self):
        est = FistaSolver()
        alpha0, t2 = est._momentum(0, est._init_state())
        assert alpha0 == 0.0
        assert t2 == pytest.approx(1.618033988749895, abs=1e-12)

    def test_zero_residual_start_stops_immediately(self):
        op = DiagonalOperator(np.ones(2))
        truth = np.array([1.0, 2.0])
        problem = Problem(op, truth, truth.copy(), truth.copy(), 0.0)
        est = FistaSolver(max_outer=100)
        est.fit_problem(problem, x0=truth)
        assert est.stop_index_ == 0
        assert est.stop_reason_ == "exact_tol"

    def test_explicit_methods_reach_discrepancy(self):
        problem = make_dense_problem(rows=12, cols=10, noise_level=0.05, seed=8)
        for est in (NesterovSolver(tau=1.5, max_outer=20000),
                    FistaSolver(tau=1.5, max_outer=20000)):
            est.fit_problem(problem, x0=0.0)
            assert est.stop_reason_ == "discrepancy"

    def test_zero_operator_step_size_rejected(self):
        op = DiagonalOperator(np.zeros(2))
        problem = Problem(op, np.ones(2), np.zeros(2), np.ones(2), 1.0)
        with pytest.raises(ValueError, match="zero operator"):
            NesterovSolver(tau=1.5).fit_problem(problem)

    def test_divergence_aborts_with_partial_trace(self):
        from initik import NonFiniteIterationError

        problem = make_dense_problem(rows=10, cols=8, noise_level=0.001,
                                     seed=10)
        est = NesterovSolver(tau=1.5, gamma=1e6, max_outer=5000)
        with pytest.raises(NonFiniteIterationError) as excinfo:
            est.fit_problem(problem, x0=0.0)
        assert excinfo.value.trace is not None
        assert excinfo.value.trace.n_steps >= 1


class TestEstimatorProtocol:
    def test_get_set_clone_roundtrip(self):
        est = InertialIteratedTikhonov(tau=1.2, alpha_bar=0.3,
                                       lam=("geometric", 1.5))
        params = est.get_params()
        assert params["tau"] == 1.2
        assert params["alpha_bar"] == 0.3
        twin = clone(est)
        assert twin.get_params() == params
        twin.set_params(tau=2.0)
        assert twin.tau == 2.0 and est.tau == 1.2

    def test_all_methods_clonable(self):
        for est in (InertialIteratedTikhonov(), IteratedTikhonov(),
                    NesterovSolver(), FistaSolver()):
            assert clone(est).get_params() == est.get_params()

    def test_fit_returns_self_and_sets_attributes(self):
        problem = make_dense_problem(rows=8, cols=6, noise_level=0.05, seed=2)
        est = IteratedTikhonov(tau=1.5, lam=("constant", 1.0), max_outer=50)
        assert est.fit_problem(problem) is est
        for attr in ("solution_", "trace_", "stop_index_", "stop_reason_",
                     "n_iter_", "inner_iterations_"):
            assert hasattr(est, attr)
        assert est.solution_.shape == (6,)
