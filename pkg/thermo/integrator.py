"""
Staggered backward-Euler time integration of the coupled system.

Each step solves (1) momentum with the condensed flow rule for (u, T) at the
new time, temperature frozen inside f and beta, and (2) the heat equation for
theta with the new stress and velocity and the dissipation truncated at k.
fixed_point mode repeats (1)-(2) with the latest temperature until the
temperature iterates settle.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, List, Optional

import numpy as np

from .constitutive import dissipation_density, truncate, validate_material
from .diagnostics import energy_audit, initial_ledger
from .exceptions import NonConvergence, ParameterError, SolverError
from .fem import (
    FESpace,
    FieldsState,
    apply_dirichlet,
    assemble_heat,
    assemble_momentum,
    initial_state,
    lifting_temperature,
)
from .newton import LINEAR_SOLVERS, newton_solve
from .utils import get_thermo_setting

logger = logging.getLogger(__name__)

COUPLING_MODES = ("staggered", "fixed_point")
HEAT_TANGENTS = ("newton", "picard")


def _setting(name):
    return field(default_factory=lambda: get_thermo_setting(name))


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    newton_tol: float = _setting("NEWTON_TOL")
    newton_max_iter: int = _setting("NEWTON_MAX_ITER")
    outer_coupling: str = "staggered"
    fixed_point_tol: float = _setting("FIXED_POINT_TOL")
    fixed_point_max_iter: int = _setting("FIXED_POINT_MAX_ITER")
    linear_solver: str = "direct"
    linear_tol: float = _setting("LINEAR_TOL")
    heat_tangent: str = "newton"
    snapshot_stride: int = 1
    audit_level: Optional[float] = None
    audit_tol: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt * (1.0 - 1e-12):
            raise ParameterError(f"t_end must be at least dt, got t_end={self.t_end}, dt={self.dt}")
        for name in ("newton_tol", "fixed_point_tol", "linear_tol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.newton_max_iter < 1 or self.fixed_point_max_iter < 1:
            raise ParameterError("iteration limits must be at least 1")
        if self.outer_coupling not in COUPLING_MODES:
            raise ParameterError(f"outer_coupling must be one of {COUPLING_MODES}")
        if self.linear_solver not in LINEAR_SOLVERS:
            raise ParameterError(f"linear_solver must be one of {LINEAR_SOLVERS}")
        if self.heat_tangent not in HEAT_TANGENTS:
            raise ParameterError(f"heat_tangent must be one of {HEAT_TANGENTS}")
        if self.snapshot_stride < 1:
            raise ParameterError("snapshot_stride must be at least 1")
        if self.audit_level is not None and not self.audit_level > 0:
            raise ParameterError("audit_level must be positive")

    @property
    def n_steps(self):
        return max(1, int(round(self.t_end / self.dt)))

    def step_time(self, index):
        return self.t_end if index == self.n_steps else index * self.dt

    def resolved_audit_tol(self):
        if self.audit_tol is not None:
            return self.audit_tol
        if self.linear_solver == "direct":
            return get_thermo_setting("AUDIT_TOL_DIRECT")
        return get_thermo_setting("AUDIT_TOL_ITERATIVE")


@dataclass
class TrajectoryRecord:
    time: float
    state: Optional[FieldsState]
    ledger: Any


@dataclass
class Trajectory:
    """Time records of one run; states are kept every snapshot_stride steps and at the end."""

    space: FESpace
    model: Any
    data: Any
    config: SolverConfig
    records: List[TrajectoryRecord] = field(default_factory=list)

    def append(self, time, state, ledger):
        if self.records and not time > self.records[-1].time:
            raise ParameterError("trajectory times must be strictly increasing")
        self.records.append(TrajectoryRecord(time=time, state=state, ledger=ledger))

    @property
    def times(self):
        return [record.time for record in self.records]

    @property
    def ledgers(self):
        return [record.ledger for record in self.records]

    @property
    def snapshots(self):
        return [(record.time, record.state) for record in self.records if record.state is not None]

    @property
    def final_state(self):
        return self.snapshots[-1][1]


def _solve_mechanics(state, config, model, data, space, t_next, theta_qp):
    dt = t_next - state.time
    constraint = apply_dirichlet(space, data, t_next)
    guess = constraint.apply(state.u)
    free = space.free_dofs

    def trial_state(x):
        u = guess.copy()
        u[free] = x
        return FieldsState(u=u, theta=state.theta, stress=state.stress, time=t_next)

    def momentum(x):
        system = assemble_momentum(space, model, state, trial_state(x), data, dt, theta_qp=theta_qp,
                                   tol=config.newton_tol, max_iter=config.newton_max_iter)
        return system.residual, system.jacobian

    first = assemble_momentum(space, model, state, trial_state(guess[free]), data, dt, theta_qp=theta_qp,
                              tol=config.newton_tol, max_iter=config.newton_max_iter)
    solution = newton_solve(momentum, guess[free], tol=config.newton_tol, max_iter=config.newton_max_iter,
                            linear_solver=config.linear_solver, linear_tol=config.linear_tol, scale=first.scale)
    converged = trial_state(solution)
    final = assemble_momentum(space, model, state, converged, data, dt, theta_qp=theta_qp,
                              tol=config.newton_tol, max_iter=config.newton_max_iter)
    return converged.u, final.stress


def _solve_heat(state, config, model, data, space, t_next, u_next, stress_next, theta_qp):
    dt = t_next - state.time
    source = truncate(model.trunc_k, dissipation_density(model, stress_next, theta_qp))

    def heat(theta):
        guess = FieldsState(u=u_next, theta=theta, stress=stress_next, time=t_next)
        system = assemble_heat(space, model, state, guess, data, dt, source, tangent=config.heat_tangent)
        return system.residual, system.jacobian

    first = assemble_heat(space, model, state, FieldsState(u=u_next, theta=state.theta, stress=stress_next,
                                                           time=t_next),
                          data, dt, source, tangent=config.heat_tangent)
    return newton_solve(heat, state.theta, tol=config.newton_tol, max_iter=config.newton_max_iter,
                        linear_solver=config.linear_solver, linear_tol=config.linear_tol, scale=first.scale)


def _advance(state, config, model, data, space, t_next, theta_qp):
    u_next, stress_next = _solve_mechanics(state, config, model, data, space, t_next, theta_qp)
    theta_next = _solve_heat(state, config, model, data, space, t_next, u_next, stress_next, theta_qp)
    return FieldsState(u=u_next, theta=theta_next, stress=stress_next, time=t_next,
                       frozen_theta=np.array(theta_qp, dtype=float))


def step(state, config, model, data, space, t_next=None):
    """
    Advance one backward-Euler step.

    Returns:
        FieldsState at t_next (default state.time + dt)
    """
    t_next = state.time + config.dt if t_next is None else t_next
    theta_qp = space.interpolate(state.theta) + lifting_temperature(space, data, state.time)
    if config.outer_coupling == "staggered":
        return _advance(state, config, model, data, space, t_next, theta_qp)

    mass = space.lumped_mass
    iterate = state.theta
    for iteration in range(1, config.fixed_point_max_iter + 1):
        result = _advance(state, config, model, data, space, t_next, theta_qp)
        change = math.sqrt(float(mass @ (result.theta - iterate) ** 2))
        logger.debug(f"Fixed point iteration {iteration} at t = {t_next:.6g}: temperature change {change:.3e}")
        if change < config.fixed_point_tol:
            return result
        iterate = result.theta
        theta_qp = space.interpolate(iterate) + lifting_temperature(space, data, t_next)
    raise NonConvergence(
        f"fixed point coupling did not converge in {config.fixed_point_max_iter} iterations "
        f"(last temperature change {change:.3e})"
    )


def run_simulation(config, model, data, mesh, space=None):
    """
    Integrate from the initial data to t_end.

    Initial values are u = u0, T = T0, theta = T_k(theta0); one EnergyLedger is
    recorded per step.
    """
    report = validate_material(model)
    if not report.passed:
        names = ", ".join(check.name for check in report.failures)
        raise ParameterError(f"material model fails admissibility checks: {names}")
    space = FESpace(mesh) if space is None else space
    state = initial_state(space, model, data)
    state.check_layout(space)
    trajectory = Trajectory(space=space, model=model, data=data, config=config)
    trajectory.append(0.0, state, initial_ledger(space, model, data, state, config.audit_level))

    n_steps = config.n_steps
    logger.info(
        f"Starting run: {n_steps} steps of dt = {config.dt:.6g} to t = {config.t_end:.6g}, "
        f"k = {model.trunc_k:.6g}, {config.outer_coupling} coupling"
    )
    for index in range(1, n_steps + 1):
        t_next = config.step_time(index)
        try:
            new_state = step(state, config, model, data, space, t_next=t_next)
        except SolverError as e:
            logger.error(f"Step {index} failed at t = {t_next:.6g}: {e}")
            raise e.at_time(t_next) from e
        ledger = energy_audit(state, new_state, model, data, t_next - state.time, space, config.audit_level)
        keep = index % config.snapshot_stride == 0 or index == n_steps
        trajectory.append(t_next, new_state if keep else None, ledger)
        state = new_state
        if index % max(1, n_steps // 10) == 0 or index == n_steps:
            logger.info(
                f"t = {t_next:.6g}: elastic energy {ledger.elastic_energy:.6g}, "
                f"plastic dissipation {ledger.plastic_dissipation:.6g}, balance {ledger.balance_residual:.3e}"
            )
    return trajectory
