"""
Damped Newton iteration and the linear solves behind it.
"""
import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .exceptions import LinearSolveFailure, NonConvergence, ParameterError
from .utils import get_thermo_setting

logger = logging.getLogger(__name__)

LINEAR_SOLVERS = ("direct", "conjugate_gradient")


def linear_solve(matrix, rhs, method="direct", tol=None):
    """
    Solve matrix @ x = rhs.

    direct: LU (scipy spsolve for sparse, numpy for dense matrices)
    conjugate_gradient: Jacobi-preconditioned CG, relative tolerance `tol`
    """
    tol = get_thermo_setting("LINEAR_TOL") if tol is None else tol
    rhs = np.asarray(rhs, dtype=float)
    if rhs.size == 0:
        return rhs.copy()
    if method == "direct":
        with np.errstate(all="ignore"):
            try:
                if sparse.issparse(matrix):
                    solution = np.atleast_1d(sparse_linalg.spsolve(sparse.csc_matrix(matrix), rhs))
                else:
                    solution = np.linalg.solve(np.atleast_2d(matrix), rhs)
            except (np.linalg.LinAlgError, RuntimeError) as e:
                raise LinearSolveFailure(f"direct solve failed: {e}") from e
        if not np.all(np.isfinite(solution)):
            raise LinearSolveFailure("direct solve produced non-finite values (singular system)")
        return solution
    if method == "conjugate_gradient":
        operator = sparse.csr_matrix(matrix)
        diagonal = operator.diagonal()
        if np.any(diagonal <= 0):
            raise LinearSolveFailure("conjugate gradients needs a positive diagonal")
        preconditioner = sparse.diags(1.0 / diagonal)
        solution, info = sparse_linalg.cg(
            operator, rhs, rtol=tol, atol=0.0, maxiter=10 * rhs.size, M=preconditioner
        )
        if info != 0:
            raise LinearSolveFailure(f"conjugate gradients stopped with info = {info}")
        return solution
    raise ParameterError(f"unknown linear solver {method!r} (choose from {LINEAR_SOLVERS})")


def newton_solve(residual_and_tangent, initial_guess, tol=None, max_iter=None,
                 linear_solver="direct", linear_tol=None, scale=0.0):
    """
    Newton iteration with step halving on residual increase.

    Args:
        residual_and_tangent: x -> (residual vector, tangent matrix)
        initial_guess: starting iterate
        tol: converged when |r| <= tol * max(|r0|, scale)
        max_iter: Newton iterations before NonConvergence
        scale: reference magnitude of the residual contributions

    Returns:
        the converged iterate
    """
    tol = get_thermo_setting("NEWTON_TOL") if tol is None else tol
    max_iter = get_thermo_setting("NEWTON_MAX_ITER") if max_iter is None else max_iter
    max_halvings = get_thermo_setting("MAX_HALVINGS")

    x = np.array(initial_guess, dtype=float, ndmin=1)
    residual, tangent = residual_and_tangent(x)
    residual_norm = float(np.linalg.norm(residual))
    target = tol * max(residual_norm, scale)

    for iteration in range(1, max_iter + 1):
        if residual_norm <= target:
            return x
        step = linear_solve(tangent, -np.asarray(residual, dtype=float), linear_solver, linear_tol)
        damping = 1.0
        for halving in range(max_halvings + 1):
            trial = x + damping * step
            trial_residual, trial_tangent = residual_and_tangent(trial)
            trial_norm = float(np.linalg.norm(trial_residual))
            if trial_norm < residual_norm:
                break
            damping *= 0.5
        else:
            if not np.isfinite(trial_norm):
                raise NonConvergence(f"Newton step produced a non-finite residual at iteration {iteration}")
            logger.warning(
                f"Newton iteration {iteration}: no residual decrease after {max_halvings} halvings "
                f"({residual_norm:.3e} -> {trial_norm:.3e})"
            )
        x, residual, tangent, residual_norm = trial, trial_residual, trial_tangent, trial_norm
        logger.debug(f"Newton iteration {iteration}: residual {residual_norm:.3e} (target {target:.3e})")

    if residual_norm <= target:
        return x
    raise NonConvergence(
        f"Newton did not converge in {max_iter} iterations (residual {residual_norm:.3e}, target {target:.3e})"
    )
