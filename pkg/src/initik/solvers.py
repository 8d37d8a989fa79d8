"""Outer iterations: inertial iterated Tikhonov, iterated Tikhonov, and the
explicit two-point baselines (Nesterov, FISTA).

All solvers follow the scikit-learn estimator protocol: hyperparameters go
into ``__init__`` (so ``get_params``/``set_params``/``clone`` work), data goes
into ``fit(operator, data, ...)``, and results land in trailing-underscore
attributes (``solution_``, ``trace_``, ``stop_index_``, ...).

The implicit step solves ``(lam_k A*A + I) x = w_k + lam_k A* y`` where
``w_k = x_k + alpha_k (x_k - x_{k-1})`` is the extrapolation point; the
explicit methods take a gradient step at ``w_k`` instead.  All methods stop
by the discrepancy principle ``norm(A x_k - y) <= tau * delta`` for noisy
data, or when the residual falls below ``exact_data_tol * norm(y)`` for
exact data.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .inner import InnerSolveError, cg_solve, spectral_solve
from .operators import Convolution2D, operator_norm_estimate
from .validation import (
    as_vector,
    check_dim,
    check_finite,
    check_in_range,
    check_nonnegative,
    check_positive,
)

__all__ = [
    "theta_weight",
    "normalize_lambda_schedule",
    "lambda_value",
    "inertial_weight",
    "extrapolate",
    "discrepancy_reached",
    "tikhonov_step",
    "IterationTrace",
    "NonFiniteIterationError",
    "InertialIteratedTikhonov",
    "IteratedTikhonov",
    "NesterovSolver",
    "FistaSolver",
    "METHODS",
]

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# parameter schedules and step primitives


def theta_weight(k, exponent):
    """Summable inertial budget ``(1/k)**exponent`` for ``k >= 1``.

    ``exponent`` must exceed 1 so the series over k converges; ``k = 0`` is
    undefined (the weight at step 0 is set directly to the cap).
    """
    if k < 1:
        raise ValueError(f"theta_weight needs k >= 1, got {k}")
    if not exponent > 1:
        raise ValueError(f"exponent must be > 1, got {exponent}")
    return float((1.0 / k) ** exponent)


def normalize_lambda_schedule(schedule):
    """Normalize a multiplier-schedule descriptor to a ``(kind, value)`` pair.

    Accepted forms: a positive number (constant schedule), a sequence of
    positive numbers (custom per-step values, clamped to the last entry
    beyond the end), a ``("geometric", r)`` / ``("constant", c)`` /
    ``("custom", values)`` pair, or a string such as ``"geometric 1.5"``,
    ``"constant 1.0"``, ``"custom 3,2,1"`` (``:``, ``(...)`` and ``=``
    separators are also accepted, and ratios may be written as fractions
    like ``"3/2"``).  A geometric schedule takes an optional scale factor,
    ``("geometric", (r, base))`` or ``"geometric 1.5 20"``, giving
    ``base * r**k``.
    """
    if isinstance(schedule, str):
        schedule = _parse_schedule_string(schedule)
    if isinstance(schedule, (int, float)):
        schedule = ("constant", float(schedule))
    elif isinstance(schedule, (list, np.ndarray)) or (
        isinstance(schedule, tuple) and schedule and not isinstance(schedule[0], str)
    ):
        schedule = ("custom", [float(v) for v in schedule])
    if not (isinstance(schedule, tuple) and len(schedule) == 2):
        raise ValueError(f"unrecognized multiplier schedule: {schedule!r}")
    kind, value = schedule
    if kind == "geometric":
        if isinstance(value, (tuple, list)):
            ratio, base = (float(value[0]), float(value[1]))
        else:
            ratio, base = float(value), 1.0
        if not (ratio > 0 and base > 0):
            raise ValueError(
                f"geometric schedule needs positive ratio and scale, got "
                f"({ratio}, {base})"
            )
        value = (ratio, base) if base != 1.0 else ratio
    elif kind == "constant":
        value = float(value)
        if not value > 0:
            raise ValueError(f"constant schedule needs a positive value, got {value}")
    elif kind == "custom":
        value = [float(v) for v in value]
        if not value or any(not v > 0 for v in value):
            raise ValueError("custom schedule needs a non-empty list of positive values")
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return (kind, value)


def _parse_number(text):
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _parse_schedule_string(text):
    body = text.strip().replace("(", " ").replace(")", " ")
    for sep in (":", "="):
        body = body.replace(sep, " ")
    parts = body.split(None, 1)
    if len(parts) == 1:
        return ("constant", _parse_number(parts[0]))
    kind, args = parts[0].lower(), parts[1]
    if kind == "custom":
        return ("custom", [_parse_number(v) for v in args.replace(",", " ").split()])
    values = [_parse_number(v) for v in args.replace(",", " ").split()]
    if kind == "geometric" and len(values) == 2:
        return ("geometric", (values[0], values[1]))
    if len(values) != 1:
        raise ValueError(f"cannot parse schedule {body!r}")
    return (kind, values[0])


def lambda_value(k, schedule):
    """Evaluate a data-term multiplier schedule at step ``k``.

    ``geometric(r)`` returns ``r**k`` (times the optional scale factor),
    ``constant(c)`` returns ``c`` and a custom list indexes into its values
    (clamping to the last entry).
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    kind, value = normalize_lambda_schedule(schedule)
    if kind == "geometric":
        if isinstance(value, tuple):
            ratio, base = value
            return float(base * ratio**k)
        return float(value**k)
    if kind == "constant":
        return float(value)
    return float(value[min(k, len(value) - 1)])


def inertial_weight(k, diff_norm_sq, theta_k, alpha_bar):
    """Adaptive extrapolation weight ``alpha_k``.

    Step 0 always returns the cap ``alpha_bar``.  Later steps return 0 when
    the last two iterates coincide and otherwise
    ``min(theta_k / diff_norm_sq, theta_k, alpha_bar)``, which keeps the
    running sum of ``alpha_k * diff_norm_sq`` below the summable theta
    series.
    """
    check_in_range(alpha_bar, 0.0, 1.0, "alpha_bar", high_open=True)
    if k == 0:
        return float(alpha_bar)
    check_nonnegative(diff_norm_sq, "diff_norm_sq")
    if diff_norm_sq == 0.0:
        return 0.0
    check_nonnegative(theta_k, "theta_k")
    return float(min(theta_k / diff_norm_sq, theta_k, alpha_bar))


def extrapolate(x_curr, x_prev, alpha_k):
    """Two-point extrapolation ``x_curr + alpha_k * (x_curr - x_prev)``."""
    x_curr = as_vector(x_curr, "x_curr")
    x_prev = as_vector(x_prev, "x_prev")
    check_dim(x_prev, x_curr.shape[0], "x_prev")
    return x_curr + alpha_k * (x_curr - x_prev)


def discrepancy_reached(residual_norm, tau, delta):
    """Discrepancy principle test ``residual_norm <= tau * delta``."""
    if not tau > 1:
        raise ValueError(f"tau must be > 1, got {tau}")
    check_nonnegative(delta, "delta")
    check_nonnegative(residual_norm, "residual_norm")
    return bool(residual_norm <= tau * delta)


def tikhonov_step(op, w, lam, data, solver="auto", tol=1e-6, x_anchor=None,
                  max_iter=None):
    """One implicit step: minimize ``lam*|Ax - data|^2 + |x - w|^2``.

    Equivalently solves ``(lam A*A + I) x = w + lam A* data``.  Circular
    convolutions are solved exactly in the frequency domain (0 reported
    inner iterations); otherwise CG runs on the difference system
    ``(lam A*A + I) s = (w - x_anchor) + lam A*(data - A x_anchor)`` with a
    zero initial guess, which warm-starts the step from ``x_anchor``
    (pass ``None`` for a cold start from zero).

    Returns
    -------
    (x_next, inner_iterations)
    """
    check_positive(lam, "lam")
    w = as_vector(w, "w")
    check_dim(w, op.domain_dim, "w")
    data = as_vector(data, "data")
    check_dim(data, op.range_dim, "data")
    if solver == "auto":
        solver = "spectral" if isinstance(op, Convolution2D) else "cg"
    if solver == "spectral":
        rhs = w + lam * op.apply_adjoint(data)
        return spectral_solve(op, lam, rhs), 0
    if solver != "cg":
        raise ValueError(f"unknown inner solver {solver!r}")
    try:
        if x_anchor is None:
            rhs = w + lam * op.apply_adjoint(data)
            report = cg_solve(op, lam, rhs, tol=tol, max_iter=max_iter)
            x_next = report.solution
        else:
            x_anchor = as_vector(x_anchor, "x_anchor")
            check_dim(x_anchor, op.domain_dim, "x_anchor")
            rhs = (w - x_anchor) + lam * op.apply_adjoint(data - op.apply(x_anchor))
            report = cg_solve(op, lam, rhs, tol=tol, max_iter=max_iter)
            x_next = x_anchor + report.solution
    except InnerSolveError as exc:
        raise InnerSolveError(f"Tikhonov step with lam={lam} failed: {exc}") from exc
    if not report.converged:
        logger.warning(
            "inner CG hit its %d-iteration cap (residual %.3e)",
            report.iterations,
            report.final_residual_norm,
        )
    return x_next, report.iterations


# ---------------------------------------------------------------------------
# iteration trace


@dataclass
class IterationTrace:
    """Per-iterate history of one solver run.

    Row ``j`` describes iterate ``x_j``: its residual and error norms, the
    extrapolation weight ``alpha[j]`` and multiplier ``lam[j]`` chosen *at*
    step ``j`` (the values the step leaving ``x_j`` uses; the last row holds
    the values the next step would have used), and ``inner_iterations[j]``,
    the inner-solver work spent *producing* ``x_j`` (0 for the start vector;
    for explicit methods 1 per step, the cost of one A plus one A* apply).

    The ``term_*`` arrays hold one entry per step actually taken: the
    summands of the four running series (data-fit, gradient, step-from-
    extrapolant, step), the inertial terms ``eta_k = alpha_k |x_k -
    x_{k-1}|^2`` and the theta budget.  For explicit methods the data-fit
    and gradient terms are evaluated at the extrapolation point.
    """

    k: np.ndarray
    residual_norm: np.ndarray
    error_norm: np.ndarray | None
    alpha: np.ndarray
    lam: np.ndarray
    inner_iterations: np.ndarray
    stop_index: int
    stop_reason: str
    delta: float
    data_norm: float
    truth_norm: float | None = None
    term_lambda_residual_sq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    term_gradient_sq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    term_step_from_w_sq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    term_step_sq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    term_eta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    term_theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterates: list | None = None
    extrapolants: list | None = None

    @property
    def n_steps(self):
        return len(self.k) - 1

    @property
    def total_inner_iterations(self):
        return int(np.sum(self.inner_iterations))

    def rel_residual(self):
        scale = self.data_norm if self.data_norm > 0 else 1.0
        return self.residual_norm / scale

    def rel_error(self):
        if self.error_norm is None:
            return None
        scale = self.truth_norm if self.truth_norm else 1.0
        return self.error_norm / scale

    @property
    def sum_alpha_steps(self):
        """Sum of the extrapolation weights over the steps actually taken."""
        return float(np.sum(self.alpha[: self.n_steps]))

    @property
    def alpha_non_increasing(self):
        """Whether the weights were monotone non-increasing over the run.

        The convergence theory assumes this; the adaptive rule does not
        guarantee it, so runs record the outcome instead of enforcing it.
        """
        steps = self.alpha[: self.n_steps]
        if steps.size < 2:
            return True
        return bool(np.all(np.diff(steps) <= 1e-15))

    @property
    def sum_eta(self):
        return float(np.sum(self.term_eta))

    @property
    def sum_theta(self):
        return float(np.sum(self.term_theta))


class NonFiniteIterationError(RuntimeError):
    """Raised when an outer iterate leaves the representable range.

    Carries the partial :class:`IterationTrace` recorded so far in the
    ``trace`` attribute.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class _TraceRecorder:
    """Accumulates trace rows and step terms while a solver runs."""

    def __init__(self, delta, data_norm, truth, store_iterates):
        self.delta = delta
        self.data_norm = data_norm
        self.truth = truth
        self.truth_norm = float(np.linalg.norm(truth)) if truth is not None else None
        self.rows = {name: [] for name in
                     ("k", "residual", "error", "alpha", "lam", "inner")}
        self.terms = {name: [] for name in
                      ("lam_res", "grad", "step_w", "step", "eta", "theta")}
        self.iterates = [] if store_iterates else None
        self.extrapolants = [] if store_iterates else None

    def add_row(self, k, x, residual, alpha, lam, inner):
        r = self.rows
        r["k"].append(k)
        r["residual"].append(residual)
        r["error"].append(
            float(np.linalg.norm(x - self.truth)) if self.truth is not None else np.nan
        )
        r["alpha"].append(alpha)
        r["lam"].append(lam)
        r["inner"].append(inner)
        if self.iterates is not None:
            self.iterates.append(x.copy())

    def add_step_terms(self, lam_res, grad, step_w, step, eta, theta, w=None):
        t = self.terms
        t["lam_res"].append(lam_res)
        t["grad"].append(grad)
        t["step_w"].append(step_w)
        t["step"].append(step)
        t["eta"].append(eta)
        t["theta"].append(theta)
        if self.extrapolants is not None and w is not None:
            self.extrapolants.append(w.copy())

    def build(self, stop_index, stop_reason):
        r, t = self.rows, self.terms
        return IterationTrace(
            k=np.array(r["k"], dtype=int),
            residual_norm=np.array(r["residual"]),
            error_norm=None if self.truth is None else np.array(r["error"]),
            alpha=np.array(r["alpha"]),
            lam=np.array(r["lam"]),
            inner_iterations=np.array(r["inner"], dtype=int),
            stop_index=stop_index,
            stop_reason=stop_reason,
            delta=self.delta,
            data_norm=self.data_norm,
            truth_norm=self.truth_norm,
            term_lambda_residual_sq=np.array(t["lam_res"]),
            term_gradient_sq=np.array(t["grad"]),
            term_step_from_w_sq=np.array(t["step_w"]),
            term_step_sq=np.array(t["step"]),
            term_eta=np.array(t["eta"]),
            term_theta=np.array(t["theta"]),
            iterates=self.iterates,
            extrapolants=self.extrapolants,
        )


# ---------------------------------------------------------------------------
# estimators


class _BaseSolver(BaseEstimator):
    """Shared fit plumbing: input checking, stopping rule, trace assembly."""

    def _validate_common(self):
        if not self.tau > 1:
            raise ValueError(f"tau must be > 1, got {self.tau}")
        check_nonnegative(self.exact_data_tol, "exact_data_tol")
        if self.max_outer < 0:
            raise ValueError(f"max_outer must be >= 0, got {self.max_outer}")

    def _prepare_fit(self, operator, data, delta, x0, true_solution):
        self._validate_common()
        data = as_vector(data, "data")
        check_dim(data, operator.range_dim, "data")
        check_finite(data, "data")
        check_nonnegative(delta, "delta")
        if x0 is None:
            x0 = np.zeros(operator.domain_dim)
        elif np.isscalar(x0):
            x0 = np.full(operator.domain_dim, float(x0))
        else:
            x0 = as_vector(x0, "x0").copy()
            check_dim(x0, operator.domain_dim, "x0")
        check_finite(x0, "x0")
        if true_solution is not None:
            true_solution = as_vector(true_solution, "true_solution")
            check_dim(true_solution, operator.domain_dim, "true_solution")
        data_norm = float(np.linalg.norm(data))
        if delta > 0:
            threshold = self.tau * delta
        else:
            threshold = self.exact_data_tol * data_norm
        return data, float(delta), x0, true_solution, data_norm, threshold

    def _finish_fit(self, recorder, stop_index, stop_reason, x):
        self.trace_ = recorder.build(stop_index, stop_reason)
        self.solution_ = x
        self.stop_index_ = stop_index
        self.stop_reason_ = stop_reason
        self.n_iter_ = self.trace_.n_steps
        self.inner_iterations_ = self.trace_.total_inner_iterations
        return self

    def fit_problem(self, problem, x0=None):
        """Fit on a benchmark :class:`~initik.problems.Problem`."""
        return self.fit(
            problem.operator,
            problem.noisy_data,
            delta=problem.delta,
            x0=x0,
            true_solution=problem.ground_truth,
        )

    @staticmethod
    def _check_iterate(x, recorder, k):
        if not np.all(np.isfinite(x)):
            trace = recorder.build(k, "max_outer")
            raise NonFiniteIterationError(
                f"iterate {k} contains non-finite values", trace=trace
            )


class InertialIteratedTikhonov(_BaseSolver):
    """Implicit two-point solver for ``A x = y`` with noisy right-hand sides.

    Each step extrapolates ``w_k = x_k + alpha_k (x_k - x_{k-1})`` and then
    minimizes ``lam_k |A x - y|^2 + |x - w_k|^2``.  The weight ``alpha_k``
    follows the adaptive rule of :func:`inertial_weight` (or stays constant,
    see ``alpha_mode``); iteration stops by the discrepancy principle.

    Parameters
    ----------
    tau : float, default=1.5
        Discrepancy multiplier, must exceed 1.
    alpha_bar : float, default=0.45
        Cap (and step-0 value) of the extrapolation weight, in [0, 1).
    alpha_mode : {"adaptive", "constant"}, default="adaptive"
        "adaptive" uses the theta-budgeted rule; "constant" uses
        ``alpha_bar`` at every step (not covered by the convergence theory,
        provided for experimentation).
    theta_exponent : float, default=1.1
        Exponent of the summable budget ``theta_k = (1/k)**p``, p > 1.
    lam : schedule descriptor, default=("geometric", 1.5)
        Data-term multiplier schedule, see :func:`normalize_lambda_schedule`.
        Larger multipliers make a step fit the data more aggressively; the
        default grows geometrically, equivalent to a proximal weight
        decaying by 2/3 per step.
    inner_tol : float, default=1e-6
        Relative CG tolerance of the inner solve.
    inner_solver : {"auto", "cg", "spectral"}, default="auto"
        "auto" picks the exact frequency-domain solve for convolution
        operators and CG otherwise.
    warm_start : bool, default=True
        Warm-start each inner CG solve from the current outer iterate
        (solves for the step increment); False solves from zero.
    max_outer : int, default=200
        Cap on outer iterations.
    exact_data_tol : float, default=1e-12
        Relative residual threshold replacing the discrepancy rule when
        ``delta == 0``.
    store_iterates : bool, default=True
        Keep all iterates and extrapolation points on the trace (needed by
        the diagnostics that re-derive residuals).

    Attributes
    ----------
    solution_ : ndarray
        Final iterate.
    trace_ : IterationTrace
    stop_index_ : int
        Stopping step (the discrepancy index when triggered).
    stop_reason_ : {"discrepancy", "exact_tol", "max_outer"}
    n_iter_ : int
    inner_iterations_ : int
        Accumulated inner-solver iterations.
    """

    def __init__(self, tau=1.5, alpha_bar=0.45, alpha_mode="adaptive",
                 theta_exponent=1.1, lam=("geometric", 1.5), inner_tol=1e-6,
                 inner_solver="auto", warm_start=True, max_outer=200,
                 exact_data_tol=1e-12, store_iterates=True):
        self.tau = tau
        self.alpha_bar = alpha_bar
        self.alpha_mode = alpha_mode
        self.theta_exponent = theta_exponent
        self.lam = lam
        self.inner_tol = inner_tol
        self.inner_solver = inner_solver
        self.warm_start = warm_start
        self.max_outer = max_outer
        self.exact_data_tol = exact_data_tol
        self.store_iterates = store_iterates

    def _alpha_at(self, k, diff_sq):
        if self.alpha_mode == "constant":
            return float(self.alpha_bar)
        theta_k = theta_weight(k, self.theta_exponent) if k >= 1 else None
        return inertial_weight(k, diff_sq, theta_k, self.alpha_bar)

    def _theta_at(self, k):
        return theta_weight(k, self.theta_exponent) if k >= 1 else 0.0

    def _validate(self):
        self._validate_common()
        check_in_range(self.alpha_bar, 0.0, 1.0, "alpha_bar", high_open=True)
        if self.alpha_mode not in ("adaptive", "constant"):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        if not self.theta_exponent > 1:
            raise ValueError(
                f"theta_exponent must be > 1, got {self.theta_exponent}"
            )
        check_positive(self.inner_tol, "inner_tol")
        normalize_lambda_schedule(self.lam)

    def fit(self, operator, data, delta=0.0, x0=None, true_solution=None):
        """Run the iteration on ``operator`` and right-hand side ``data``.

        Parameters
        ----------
        operator : LinearOperator
        data : array of length ``operator.range_dim``
            Measured (possibly noisy) data.
        delta : float, default=0.0
            Noise level; 0 selects the exact-data stopping rule.
        x0 : None, scalar or array, default=None
            Initial guess (None means zero; a scalar fills a constant
            vector).
        true_solution : array, optional
            Ground truth for error tracking in the trace.
        """
        self._validate()
        data, delta, x0, truth, data_norm, threshold = self._prepare_fit(
            operator, data, delta, x0, true_solution
        )
        schedule = normalize_lambda_schedule(self.lam)
        recorder = _TraceRecorder(delta, data_norm, truth, self.store_iterates)

        x_prev = x0.copy()
        x_curr = x0
        residual = float(np.linalg.norm(operator.apply(x_curr) - data))
        k = 0
        diff_sq = 0.0
        alpha_k = self._alpha_at(0, diff_sq)
        recorder.add_row(0, x_curr, residual, alpha_k, lambda_value(0, schedule), 0)

        while True:
            if residual <= threshold:
                stop_reason = "discrepancy" if delta > 0 else "exact_tol"
                break
            if k >= self.max_outer:
                stop_reason = "max_outer"
                break
            lam_k = lambda_value(k, schedule)
            w = extrapolate(x_curr, x_prev, alpha_k)
            x_next, n_inner = tikhonov_step(
                operator, w, lam_k, data,
                solver=self.inner_solver, tol=self.inner_tol,
                x_anchor=x_curr if self.warm_start else None,
            )
            self._check_iterate(x_next, recorder, k)
            res_vec = operator.apply(x_next) - data
            residual_next = float(np.linalg.norm(res_vec))
            grad = lam_k * operator.apply_adjoint(res_vec)
            recorder.add_step_terms(
                lam_res=lam_k * residual_next**2,
                grad=float(np.linalg.norm(grad) ** 2),
                step_w=float(np.linalg.norm(x_next - w) ** 2),
                step=float(np.linalg.norm(x_next - x_curr) ** 2),
                eta=alpha_k * diff_sq,
                theta=self._theta_at(k),
                w=w,
            )
            x_prev, x_curr = x_curr, x_next
            k += 1
            diff_sq = float(np.linalg.norm(x_curr - x_prev) ** 2)
            alpha_k = self._alpha_at(k, diff_sq)
            residual = residual_next
            recorder.add_row(
                k, x_curr, residual, alpha_k, lambda_value(k, schedule), n_inner
            )
            if not np.isfinite(residual):
                raise NonFiniteIterationError(
                    f"residual became non-finite at step {k}",
                    trace=recorder.build(k, "max_outer"),
                )

        return self._finish_fit(recorder, k, stop_reason, x_curr)


class IteratedTikhonov(InertialIteratedTikhonov):
    """Classical iterated Tikhonov: the implicit step taken from ``x_k``.

    Independent single-point loop (no extrapolation state); used as the
    baseline the inertial variant is measured against.  Accepts the same
    parameters as :class:`InertialIteratedTikhonov` except the inertial
    ones.
    """

    def __init__(self, tau=1.5, lam=("geometric", 1.5), inner_tol=1e-6,
                 inner_solver="auto", warm_start=True, max_outer=200,
                 exact_data_tol=1e-12, store_iterates=True):
        super().__init__(
            tau=tau, alpha_bar=0.0, alpha_mode="adaptive", theta_exponent=1.1,
            lam=lam, inner_tol=inner_tol, inner_solver=inner_solver,
            warm_start=warm_start, max_outer=max_outer,
            exact_data_tol=exact_data_tol, store_iterates=store_iterates,
        )

    def fit(self, operator, data, delta=0.0, x0=None, true_solution=None):
        self._validate()
        data, delta, x0, truth, data_norm, threshold = self._prepare_fit(
            operator, data, delta, x0, true_solution
        )
        schedule = normalize_lambda_schedule(self.lam)
        recorder = _TraceRecorder(delta, data_norm, truth, self.store_iterates)

        x_curr = x0
        residual = float(np.linalg.norm(operator.apply(x_curr) - data))
        k = 0
        recorder.add_row(0, x_curr, residual, 0.0, lambda_value(0, schedule), 0)

        while True:
            if residual <= threshold:
                stop_reason = "discrepancy" if delta > 0 else "exact_tol"
                break
            if k >= self.max_outer:
                stop_reason = "max_outer"
                break
            lam_k = lambda_value(k, schedule)
            x_next, n_inner = tikhonov_step(
                operator, x_curr, lam_k, data,
                solver=self.inner_solver, tol=self.inner_tol,
                x_anchor=x_curr if self.warm_start else None,
            )
            self._check_iterate(x_next, recorder, k)
            res_vec = operator.apply(x_next) - data
            residual_next = float(np.linalg.norm(res_vec))
            grad = lam_k * operator.apply_adjoint(res_vec)
            step_sq = float(np.linalg.norm(x_next - x_curr) ** 2)
            recorder.add_step_terms(
                lam_res=lam_k * residual_next**2,
                grad=float(np.linalg.norm(grad) ** 2),
                step_w=step_sq,
                step=step_sq,
                eta=0.0,
                theta=self._theta_at(k),
                w=x_curr,
            )
            x_curr = x_next
            k += 1
            residual = residual_next
            recorder.add_row(
                k, x_curr, residual, 0.0, lambda_value(k, schedule), n_inner
            )
            if not np.isfinite(residual):
                raise NonFiniteIterationError(
                    f"residual became non-finite at step {k}",
                    trace=recorder.build(k, "max_outer"),
                )

        return self._finish_fit(recorder, k, stop_reason, x_curr)


class _ExplicitSolver(_BaseSolver):
    """Shared loop of the explicit two-point (momentum gradient) methods.

    One step is ``x_{k+1} = w_k - gamma * A*(A w_k - y)`` with the method's
    momentum rule providing ``w_k``; ``gamma`` defaults to the reciprocal
    spectral-norm estimate of A.
    """

    def __init__(self, tau=1.5, gamma=None, norm_iters=100, seed=0,
                 max_outer=10000, exact_data_tol=1e-12, store_iterates=True):
        self.tau = tau
        self.gamma = gamma
        self.norm_iters = norm_iters
        self.seed = seed
        self.max_outer = max_outer
        self.exact_data_tol = exact_data_tol
        self.store_iterates = store_iterates

    def _momentum(self, k, state):
        raise NotImplementedError

    def _validate(self):
        self._validate_common()
        if self.gamma is not None:
            check_positive(self.gamma, "gamma")

    def _step_size(self, operator):
        if self.gamma is not None:
            return float(self.gamma)
        norm = operator_norm_estimate(operator, iters=self.norm_iters,
                                      seed=self.seed)
        if norm == 0.0:
            raise ValueError("cannot size the gradient step for a zero operator")
        return 1.0 / norm

    def fit(self, operator, data, delta=0.0, x0=None, true_solution=None):
        """Run the explicit iteration (same contract as the implicit fit)."""
        self._validate()
        data, delta, x0, truth, data_norm, threshold = self._prepare_fit(
            operator, data, delta, x0, true_solution
        )
        gamma = self._step_size(operator)
        recorder = _TraceRecorder(delta, data_norm, truth, self.store_iterates)

        x_prev = x0.copy()
        x_curr = x0
        ax_prev = operator.apply(x_curr)
        ax_curr = ax_prev.copy()
        residual = float(np.linalg.norm(ax_curr - data))
        k = 0
        state = self._init_state()
        alpha_k, state = self._momentum(0, state)
        recorder.add_row(0, x_curr, residual, alpha_k, gamma, 0)

        while True:
            if residual <= threshold:
                stop_reason = "discrepancy" if delta > 0 else "exact_tol"
                break
            if k >= self.max_outer:
                stop_reason = "max_outer"
                break
            w = x_curr + alpha_k * (x_curr - x_prev)
            aw = ax_curr + alpha_k * (ax_curr - ax_prev)
            grad = operator.apply_adjoint(aw - data)
            x_next = w - gamma * grad
            self._check_iterate(x_next, recorder, k)
            ax_next = operator.apply(x_next)
            residual_next = float(np.linalg.norm(ax_next - data))
            recorder.add_step_terms(
                lam_res=gamma * float(np.linalg.norm(aw - data) ** 2),
                grad=float(np.linalg.norm(gamma * grad) ** 2),
                step_w=float(np.linalg.norm(x_next - w) ** 2),
                step=float(np.linalg.norm(x_next - x_curr) ** 2),
                eta=alpha_k * float(np.linalg.norm(x_curr - x_prev) ** 2),
                theta=0.0,
                w=w,
            )
            x_prev, x_curr = x_curr, x_next
            ax_prev, ax_curr = ax_curr, ax_next
            k += 1
            alpha_k, state = self._momentum(k, state)
            residual = residual_next
            recorder.add_row(k, x_curr, residual, alpha_k, gamma, 1)
            if not np.isfinite(residual):
                raise NonFiniteIterationError(
                    f"residual became non-finite at step {k}",
                    trace=recorder.build(k, "max_outer"),
                )

        return self._finish_fit(recorder, k, stop_reason, x_curr)

    def _init_state(self):
        return None


class NesterovSolver(_ExplicitSolver):
    """Accelerated gradient baseline with momentum ``(k-1)/(k-1+alpha)``.

    The weight is clamped at 0 for ``k < 1`` (it is inert there anyway since
    the two starting iterates coincide).  ``momentum_alpha`` must be >= 3.
    """

    def __init__(self, tau=1.5, momentum_alpha=3.0, gamma=None, norm_iters=100,
                 seed=0, max_outer=10000, exact_data_tol=1e-12,
                 store_iterates=True):
        super().__init__(tau=tau, gamma=gamma, norm_iters=norm_iters,
                         seed=seed, max_outer=max_outer,
                         exact_data_tol=exact_data_tol,
                         store_iterates=store_iterates)
        self.momentum_alpha = momentum_alpha

    def _validate(self):
        super()._validate()
        if not self.momentum_alpha >= 3:
            raise ValueError(
                f"momentum_alpha must be >= 3, got {self.momentum_alpha}"
            )

    def _momentum(self, k, state):
        return max(0.0, (k - 1) / (k - 1 + self.momentum_alpha)), state


class FistaSolver(_ExplicitSolver):
    """FISTA baseline: momentum ``(t_k - 1)/t_{k+1}`` with
    ``t_1 = 1`` and ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``."""

    def _init_state(self):
        return 1.0

    def _momentum(self, k, t):
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        return (t - 1.0) / t_next, t_next


METHODS = {
    "init": InertialIteratedTikhonov,
    "it": IteratedTikhonov,
    "nesterov": NesterovSolver,
    "fista": FistaSolver,
}
