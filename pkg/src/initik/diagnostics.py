"""Runtime checks of the identities, inequalities and bounds the solvers
are supposed to satisfy, plus the sequence-convergence checker.

Each check returns a :class:`CheckReport`.  ``status`` distinguishes a
genuine failure from an *inconclusive* result (the check's precondition,
for example a tightly solved step system, was not met) and from a *skipped*
check (the hypothesis does not apply to the run at hand).
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .solvers import extrapolate
from .validation import as_vector, check_dim

__all__ = [
    "CheckReport",
    "merge_reports",
    "reports_to_text",
    "reports_to_jsonl",
    "check_extrapolation_identity",
    "check_step_identity",
    "check_residual_monotonicity",
    "check_kstar_bound",
    "series_accumulators",
    "check_series_plateau",
    "check_inertia_summability",
    "check_sequence_lemma",
    "minimum_norm_solution",
]

EXTRAPOLATION_TOL = 1e-10
STEP_IDENTITY_TOL = 1e-8
MONOTONICITY_TOL = 1e-8
TIGHT_SOLVE_TOL = 1e-10
SEQUENCE_TOL = 1e-10
PLATEAU_FRACTION = 0.05


@dataclass
class CheckReport:
    """Outcome of one diagnostic check.

    ``passed`` is True exactly when the check ran and its worst violation
    stayed within ``tolerance``; otherwise ``status`` says whether it
    failed, was inconclusive, or did not apply.
    """

    name: str
    passed: bool
    max_violation: float
    samples_checked: int
    tolerance: float
    status: str = "passed"
    detail: str = ""

    @classmethod
    def from_violation(cls, name, max_violation, samples, tolerance, detail=""):
        ok = max_violation <= tolerance
        return cls(name, ok, float(max_violation), samples, tolerance,
                   "passed" if ok else "failed", detail)

    @classmethod
    def inconclusive(cls, name, detail, samples=0, tolerance=float("nan")):
        return cls(name, False, float("nan"), samples, tolerance,
                   "inconclusive", detail)

    @classmethod
    def skipped(cls, name, detail, tolerance=float("nan")):
        return cls(name, False, float("nan"), 0, tolerance, "skipped", detail)

    def to_text(self):
        tag = {"passed": "PASS", "failed": "FAIL",
               "inconclusive": "INCONCLUSIVE", "skipped": "SKIP"}[self.status]
        body = f"{tag} {self.name}"
        if self.status in ("passed", "failed"):
            body += (f" max_violation={self.max_violation:.3e}"
                     f" tol={self.tolerance:.1e} n={self.samples_checked}")
        if self.detail:
            body += f" ({self.detail})"
        return body

    def to_json(self):
        record = asdict(self)
        return json.dumps(record, sort_keys=True)


def merge_reports(name, reports, tolerance=None):
    """Fold per-instance reports into one aggregate report."""
    reports = list(reports)
    if not reports:
        raise ValueError("cannot merge an empty report list")
    if tolerance is None:
        tolerance = reports[0].tolerance
    if any(r.status == "failed" for r in reports):
        status = "failed"
    elif any(r.status == "inconclusive" for r in reports):
        status = "inconclusive"
    elif all(r.status == "skipped" for r in reports):
        status = "skipped"
    else:
        status = "passed"
    violations = [r.max_violation for r in reports
                  if not math.isnan(r.max_violation)]
    max_violation = max(violations) if violations else float("nan")
    samples = sum(r.samples_checked for r in reports)
    detail = "; ".join(sorted({r.detail for r in reports if r.detail}))
    return CheckReport(name, status == "passed", max_violation, samples,
                       tolerance, status, detail)


def reports_to_text(reports):
    return "\n".join(r.to_text() for r in reports) + "\n"


def reports_to_jsonl(reports):
    return "\n".join(r.to_json() for r in reports) + "\n"


# ---------------------------------------------------------------------------
# identities


def check_extrapolation_identity(x_k, x_km1, x_ref, alpha_k):
    """Squared-distance identity of the extrapolation point.

    ``|w_k - x|^2`` (with ``w_k`` built by :func:`~initik.solvers.extrapolate`)
    must equal
    ``(1+a)|x_k - x|^2 - a|x_{k-1} - x|^2 + a(1+a)|x_k - x_{k-1}|^2``.
    """
    x_k = as_vector(x_k, "x_k")
    x_km1 = as_vector(x_km1, "x_km1")
    x_ref = as_vector(x_ref, "x_ref")
    check_dim(x_km1, x_k.shape[0], "x_km1")
    check_dim(x_ref, x_k.shape[0], "x_ref")
    if alpha_k < 0:
        raise ValueError(f"alpha_k must be nonnegative, got {alpha_k}")
    w = extrapolate(x_k, x_km1, alpha_k)
    lhs = float(np.linalg.norm(w - x_ref) ** 2)
    t1 = (1.0 + alpha_k) * float(np.linalg.norm(x_k - x_ref) ** 2)
    t2 = alpha_k * float(np.linalg.norm(x_km1 - x_ref) ** 2)
    t3 = alpha_k * (1.0 + alpha_k) * float(np.linalg.norm(x_k - x_km1) ** 2)
    rhs = t1 - t2 + t3
    scale = max(1.0, lhs, t1 + t2 + t3)
    return CheckReport.from_violation(
        "extrapolation_identity", abs(lhs - rhs) / scale, 1, EXTRAPOLATION_TOL
    )


def check_step_identity(op, x_next, w_k, x_star, data, lambda_k):
    """Exact-data energy identity of one implicit step.

    With ``A x_star = data``, the drop ``|w_k - x*|^2 - |x_{k+1} - x*|^2``
    must equal ``|lam A*(A x_{k+1} - y)|^2 + 2 lam |A x_{k+1} - y|^2``.
    Marked inconclusive when ``x_next`` does not solve the step system to
    near round-off (a loose inner solve, not a broken identity).
    """
    x_next = as_vector(x_next, "x_next")
    w_k = as_vector(w_k, "w_k")
    x_star = as_vector(x_star, "x_star")
    data = as_vector(data, "data")
    name = "step_identity"
    consistency = np.linalg.norm(op.apply(x_star) - data)
    if consistency > 1e-10 * (1.0 + np.linalg.norm(data)):
        raise ValueError(
            "check_step_identity needs exact data (A x_star = data); "
            f"got residual {consistency:.3e}"
        )
    residual_vec = op.apply(x_next) - data
    grad = lambda_k * op.apply_adjoint(residual_vec)
    system_rhs = w_k + lambda_k * op.apply_adjoint(data)
    step_defect = float(np.linalg.norm(grad + x_next - w_k))
    if step_defect > TIGHT_SOLVE_TOL * max(1.0, float(np.linalg.norm(system_rhs))):
        return CheckReport.inconclusive(
            name,
            f"step system solved loosely (defect {step_defect:.3e})",
            samples=1, tolerance=STEP_IDENTITY_TOL,
        )
    drop_from_w = float(np.linalg.norm(w_k - x_star) ** 2)
    drop_to_next = float(np.linalg.norm(x_next - x_star) ** 2)
    lhs = drop_from_w - drop_to_next
    rhs = float(np.linalg.norm(grad) ** 2) + 2.0 * lambda_k * float(
        np.linalg.norm(residual_vec) ** 2
    )
    scale = max(1.0, drop_from_w, drop_to_next, rhs)
    return CheckReport.from_violation(
        name, abs(lhs - rhs) / scale, 1, STEP_IDENTITY_TOL
    )


def check_residual_monotonicity(trace, op, noisy_data):
    """Residual at the new iterate never exceeds the one at its
    extrapolation point (recomputed from the stored iterates)."""
    name = "residual_monotonicity"
    noisy_data = as_vector(noisy_data, "noisy_data")
    if trace.iterates is None or trace.extrapolants is None:
        return CheckReport.inconclusive(
            name, "trace did not store iterates", tolerance=MONOTONICITY_TOL
        )
    scale = float(np.linalg.norm(noisy_data))
    scale = scale if scale > 0 else 1.0
    worst = 0.0
    worst_at = 0
    steps = len(trace.extrapolants)
    for k in range(steps):
        res_w = np.linalg.norm(op.apply(trace.extrapolants[k]) - noisy_data)
        res_next = np.linalg.norm(op.apply(trace.iterates[k + 1]) - noisy_data)
        gap = float(res_next - res_w) / scale
        if gap > worst:
            worst, worst_at = gap, k
    return CheckReport.from_violation(
        name, worst, steps, MONOTONICITY_TOL, f"worst at step {worst_at}"
    )


def check_kstar_bound(trace, lambda_floor, tau, delta, x0_err_sq,
                      M_delta=None, sum_alpha=None, sum_theta=None):
    """Upper bound on the discrepancy stopping index.

    ``k* <= (x0_err_sq + M_delta * sum_alpha + 2 * sum_theta) /
    (2 * lambda_floor * tau * delta^2 * (tau - 1))``, applicable to runs
    whose multipliers stay above a positive floor.  The sums default to the
    values accumulated on the trace and ``M_delta`` to the largest recorded
    squared error.
    """
    name = "kstar_bound"
    if delta <= 0:
        raise ValueError("the stopping-index bound needs delta > 0")
    if not tau > 1:
        raise ValueError(f"tau must be > 1, got {tau}")
    if lambda_floor <= 0:
        return CheckReport.skipped(
            name, "bound needs a positive multiplier floor "
                  "(summable schedules are not covered)"
        )
    steps = trace.n_steps
    if np.any(trace.lam[:steps] < lambda_floor * (1.0 - 1e-12)):
        return CheckReport.skipped(
            name, f"run used multipliers below the floor {lambda_floor}"
        )
    if trace.stop_reason != "discrepancy":
        return CheckReport.inconclusive(
            name, f"run stopped by {trace.stop_reason}, not the discrepancy rule"
        )
    if M_delta is None:
        if trace.error_norm is None:
            return CheckReport.inconclusive(
                name, "no error history on the trace and no M_delta given"
            )
        M_delta = float(np.max(trace.error_norm) ** 2)
    if sum_alpha is None:
        sum_alpha = trace.sum_alpha_steps
    if sum_theta is None:
        sum_theta = trace.sum_theta
    bound = (x0_err_sq + M_delta * sum_alpha + 2.0 * sum_theta) / (
        2.0 * lambda_floor * tau * delta**2 * (tau - 1.0)
    )
    violation = max(0.0, (trace.stop_index - bound) / max(1.0, bound))
    detail = f"k*={trace.stop_index} bound={bound:.6g}"
    return CheckReport.from_violation(name, violation, 1, 0.0, detail)


# ---------------------------------------------------------------------------
# series


def series_accumulators(trace):
    """Partial sums of the four step series recorded on a trace.

    Returns a dict with keys ``data_fit`` (multiplier-weighted squared
    residuals), ``gradient``, ``step_from_w`` and ``step``; each value is
    the array of running partial sums (non-decreasing by construction).
    """
    return {
        "data_fit": np.cumsum(trace.term_lambda_residual_sq),
        "gradient": np.cumsum(trace.term_gradient_sq),
        "step_from_w": np.cumsum(trace.term_step_from_w_sq),
        "step": np.cumsum(trace.term_step_sq),
    }


def check_series_plateau(trace, last_fraction=0.25,
                         max_increase=PLATEAU_FRACTION):
    """All four running series flatten out: the increase over the last
    quarter of the run stays below 5% of each total."""
    name = "series_plateau"
    sums = series_accumulators(trace)
    steps = trace.n_steps
    if steps < 8:
        return CheckReport.inconclusive(
            name, f"run too short ({steps} steps) to assess a plateau",
            tolerance=max_increase,
        )
    cut = int(np.floor(steps * (1.0 - last_fraction)))
    worst = 0.0
    for partial in sums.values():
        total = float(partial[-1])
        if total == 0.0:
            continue
        late_growth = float(partial[-1] - partial[cut - 1]) / total
        worst = max(worst, late_growth)
    return CheckReport.from_violation(name, worst, 4 * steps, max_increase)


def check_inertia_summability(trace):
    """Accumulated inertia ``sum alpha_k |x_k - x_{k-1}|^2`` stays below the
    theta budget accumulated over the same steps.  The detail also records
    whether the weights happened to be monotone non-increasing (assumed by
    the convergence theory but not enforced by the adaptive rule)."""
    name = "inertia_summability"
    lhs = trace.sum_eta
    rhs = trace.sum_theta
    violation = max(0.0, (lhs - rhs) / max(1.0, rhs))
    detail = (f"sum_eta={lhs:.6g} sum_theta={rhs:.6g} "
              f"alpha_monotone={trace.alpha_non_increasing}")
    return CheckReport.from_violation(
        name, violation, trace.n_steps, 1e-12, detail
    )


# ---------------------------------------------------------------------------
# sequence lemma


def check_sequence_lemma(alphas, phis, etas, alpha_cap):
    """Convergence checker for inertia-perturbed monotone sequences.

    ``phis`` are the nonnegative values ``phi_0..phi_K`` (``phi_{-1}`` is
    taken equal to ``phi_0``), ``alphas``/``etas`` the weights and
    perturbations of steps ``0..K-1``.  Verifies the hypothesis
    ``phi_{k+1} - phi_k <= alpha_k (phi_k - phi_{k-1}) + 2 eta_k`` at every
    step (non-strict, with floating-point slack), the derived decay
    ``[gamma_{k+1}]_+ <= alpha_cap [gamma_k]_+ + 2 eta_k`` of the positive
    increment parts, and that ``zeta_k = phi_k - sum_{j<=k} [gamma_j]_+``
    never increases.  A violated hypothesis makes the report inconclusive
    (the lemma's precondition failed) and names the offending index.
    """
    name = "sequence_lemma"
    phis = np.asarray(phis, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    etas = np.asarray(etas, dtype=float)
    if not 0.0 < alpha_cap < 1.0:
        raise ValueError(f"alpha_cap must lie in (0, 1), got {alpha_cap}")
    if phis.ndim != 1 or phis.size < 2:
        raise ValueError("phis must contain at least two values")
    steps = phis.size - 1
    if alphas.size < steps or etas.size < steps:
        raise ValueError(
            f"need {steps} alpha and eta entries, got {alphas.size}/{etas.size}"
        )
    if np.any(phis < 0) or np.any(etas[:steps] < 0):
        raise ValueError("phis and etas must be nonnegative")
    if np.any(alphas[:steps] < 0) or np.any(alphas[:steps] > alpha_cap + 1e-15):
        raise ValueError("alphas must lie in [0, alpha_cap]")

    scale = max(1.0, float(np.max(phis)))
    slack = 1e-12 * scale
    gamma = np.empty(steps + 1)
    gamma[0] = 0.0
    gamma[1:] = np.diff(phis)

    for k in range(steps):
        rhs = alphas[k] * gamma[k] + 2.0 * etas[k]
        if gamma[k + 1] > rhs + slack:
            return CheckReport.inconclusive(
                name,
                f"hypothesis inequality violated at index {k} "
                f"(increment {gamma[k + 1]:.3e} > bound {rhs:.3e})",
                samples=steps, tolerance=SEQUENCE_TOL,
            )

    positive = np.maximum(gamma, 0.0)
    worst = 0.0
    for k in range(steps):
        excess = positive[k + 1] - (alpha_cap * positive[k] + 2.0 * etas[k])
        worst = max(worst, excess / scale)
    zeta = phis - np.cumsum(positive)
    worst = max(worst, float(np.max(np.diff(zeta), initial=0.0)) / scale)
    detail = f"phi_limit~{phis[-1]:.6e}"
    return CheckReport.from_violation(name, worst, steps, SEQUENCE_TOL, detail)


# ---------------------------------------------------------------------------
# oracles


def minimum_norm_solution(op, data, x0=None):
    """x0-minimal-norm solution of ``A x = data`` for a dense operator.

    Returns ``x0 + pinv(A) (data - A x0)``: the solution of the consistent
    system closest to the initial guess.
    """
    entries = getattr(op, "entries", None)
    if entries is None:
        raise TypeError("minimum_norm_solution needs a dense operator")
    data = as_vector(data, "data")
    if x0 is None:
        x0 = np.zeros(op.domain_dim)
    else:
        x0 = as_vector(x0, "x0")
    return x0 + np.linalg.pinv(entries) @ (data - entries @ x0)
