"""Solvers for the per-step Tikhonov system ``(lam * A*A + I) x = rhs``.

Two routes: conjugate gradients for arbitrary operators, and an exact
frequency-domain solve for circular convolutions.  The system map is
symmetric positive definite with spectrum inside ``[1, 1 + lam*norm(A)^2]``,
so plain CG needs no preconditioning.
"""

from dataclasses import dataclass

import numpy as np

from .operators import Convolution2D
from .validation import as_vector, check_dim, check_finite, check_positive

__all__ = ["InnerSolveError", "InnerSolveReport", "cg_solve", "spectral_solve"]


class InnerSolveError(RuntimeError):
    """Raised when an inner solve encounters non-finite values or breaks down."""


@dataclass
class InnerSolveReport:
    """Outcome of one inner solve.

    ``iterations`` counts applications of the system map ``lam*A*A + I``;
    ``final_residual_norm`` is below ``tol * norm(rhs)`` unless the
    iteration cap was hit, in which case ``converged`` is False.
    """

    solution: np.ndarray
    iterations: int
    final_residual_norm: float
    converged: bool = True


def cg_solve(op, lam, rhs, x_init=None, tol=1e-6, max_iter=None):
    """Conjugate gradients on ``(lam * A*A + I) x = rhs``.

    Parameters
    ----------
    op : LinearOperator
        The operator A; the solve runs in its domain space.
    lam : float
        Positive data-term multiplier.
    rhs : array
        Right-hand side (length ``op.domain_dim``).
    x_init : array, optional
        Initial guess; defaults to zero.  A nonzero guess costs one extra
        (counted) application of the system map to form the first residual.
    tol : float
        Relative tolerance: stop once ``norm(residual) <= tol * norm(rhs)``.
    max_iter : int, optional
        Iteration cap; defaults to ``op.domain_dim`` (finite-termination
        bound of CG in exact arithmetic).

    Returns
    -------
    InnerSolveReport
    """
    check_positive(lam, "lam")
    check_positive(tol, "tol")
    rhs = as_vector(rhs, "rhs")
    check_dim(rhs, op.domain_dim, "rhs")
    check_finite(rhs, "rhs")
    if max_iter is None:
        max_iter = op.domain_dim
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return InnerSolveReport(np.zeros_like(rhs), 0, 0.0, True)

    iterations = 0
    if x_init is None:
        x = np.zeros_like(rhs)
        r = rhs.copy()
    else:
        x_init = as_vector(x_init, "x_init")
        check_dim(x_init, op.domain_dim, "x_init")
        check_finite(x_init, "x_init")
        x = x_init.copy()
        if np.any(x):
            r = rhs - (lam * op.apply_adjoint(op.apply(x)) + x)
            iterations += 1
        else:
            r = rhs.copy()

    threshold = tol * rhs_norm
    rho = float(r @ r)
    res_norm = float(np.sqrt(rho))
    if res_norm <= threshold:
        return InnerSolveReport(x, iterations, res_norm, True)

    p = r.copy()
    converged = False
    while iterations < max_iter:
        q = lam * op.apply_adjoint(op.apply(p)) + p
        iterations += 1
        denom = float(p @ q)
        if not np.isfinite(denom) or denom <= 0.0:
            raise InnerSolveError(
                f"CG breakdown at iteration {iterations}: p'Gp = {denom}"
            )
        step = rho / denom
        x += step * p
        r -= step * q
        rho_new = float(r @ r)
        if not np.isfinite(rho_new):
            raise InnerSolveError(
                f"non-finite residual at CG iteration {iterations}"
            )
        res_norm = float(np.sqrt(rho_new))
        if res_norm <= threshold:
            converged = True
            break
        p = r + (rho_new / rho) * p
        rho = rho_new
    return InnerSolveReport(x, iterations, res_norm, converged)


def spectral_solve(op, lam, rhs):
    """Exact solve of ``(lam * A*A + I) x = rhs`` for a circular convolution.

    In the frequency domain the system diagonalizes, so the solution is
    ``rhs_hat / (lam * |psf_hat|^2 + 1)`` transformed back; with ``lam = 0``
    the right-hand side is returned unchanged.
    """
    if not isinstance(op, Convolution2D):
        raise TypeError(
            f"spectral_solve needs a Convolution2D operator, got {type(op).__name__}"
        )
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    rhs = as_vector(rhs, "rhs")
    check_dim(rhs, op.domain_dim, "rhs")
    if lam == 0.0:
        return rhs.copy()
    denom = lam * np.abs(op.kernel_spectrum) ** 2 + 1.0
    rhs_hat = np.fft.fft2(rhs.reshape(op.image_shape))
    x = np.fft.ifft2(rhs_hat / denom).real
    return x.reshape(-1)
