"""
Lifting problems that absorb nonhomogeneous boundary data.

u~ solves -div C eps(u~_t) = F with u~_t = g_{D,t} on the Dirichlet boundary and
u~(0) = 0; theta~ solves theta~_t - Laplace theta~ = 0 with flux g_theta and
theta~(0) = 0.
"""
import logging

import numpy as np
from scipy import sparse

from .exceptions import ParameterError
from .fem import LiftingField
from .newton import linear_solve

logger = logging.getLogger(__name__)


def solve_lifting_displacement(space, data, moduli, times, linear_solver="direct", linear_tol=None):
    """
    Elastostatic solve for u~_t at each requested time, accumulated into u~ by
    the trapezoidal rule from u~(0) = 0.

    Args:
        times: increasing sample times; t = 0 is prepended when missing

    Returns:
        LiftingField with values u~ and rates u~_t
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ParameterError("lifting times must be nonnegative and strictly increasing")
    if times[0] > 0:
        times = np.concatenate([[0.0], times])

    stiffness = space.stiffness_matrix(moduli)
    free = space.free_dofs
    constrained = space.constrained_dofs
    reduced = stiffness[free][:, free]
    coupling = stiffness[free][:, constrained]
    boundary_rate = data.boundary_rate()
    boundary_points = space.mesh.vertices[space.constrained_nodes]

    rates = np.zeros((times.size, space.n_dofs))
    for index, t in enumerate(times):
        rate = np.zeros(space.n_dofs)
        rate[constrained] = np.asarray(boundary_rate(boundary_points, t), dtype=float).reshape(-1)
        load = space.assemble_vector(space.body_load(data.body_force(space.qp_coords, t)))
        rhs = load[free] - coupling @ rate[constrained]
        rate[free] = linear_solve(reduced, rhs, linear_solver, linear_tol)
        rates[index] = rate

    values = np.zeros_like(rates)
    steps = np.diff(times)[:, None]
    values[1:] = np.cumsum(0.5 * steps * (rates[1:] + rates[:-1]), axis=0)
    logger.info(f"Displacement lifting solved at {times.size} times up to t = {times[-1]:.6g}")
    return LiftingField(times=times, values=values, rates=rates)


def solve_lifting_temperature(space, data, dt, steps, times=None, linear_solver="direct", linear_tol=None):
    """
    Backward-Euler steps of the source-free heat equation with flux g_theta and
    zero initial value.

    Args:
        times: the `steps` step end times of the run; default dt, 2 dt, ..., steps * dt

    Returns:
        LiftingField sampled at t = 0 and every step end time
    """
    if not dt > 0 or steps < 1:
        raise ParameterError("temperature lifting needs dt > 0 and at least one step")
    if times is None:
        times = dt * np.arange(steps + 1)
    else:
        times = np.concatenate([[0.0], np.asarray(times, dtype=float)])
        if times.ndim != 1 or times.size != steps + 1 or np.any(np.diff(times) <= 0):
            raise ParameterError(f"temperature lifting needs {steps} strictly increasing positive step times")
    sizes = np.diff(times)
    mass = space.lumped_mass
    stiffness = space.heat_stiffness
    values = np.zeros((steps + 1, space.n_nodes))
    for index in range(1, steps + 1):
        size = sizes[index - 1]
        operator = sparse.csr_matrix(sparse.diags(mass / size) + stiffness)
        flux = space.boundary_load(data.g_theta(space.face_qp_coords, times[index]))
        values[index] = linear_solve(operator, mass * values[index - 1] / size + flux, linear_solver, linear_tol)
    rates = np.zeros_like(values)
    rates[1:] = np.diff(values, axis=0) / sizes[:, None]
    logger.info(f"Temperature lifting solved over {steps} steps up to t = {times[-1]:.6g}")
    return LiftingField(times=times, values=values, rates=rates)
