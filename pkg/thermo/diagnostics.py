"""
Energy audit of converged time steps and a-priori bound quantities of whole
trajectories.

The audit tests the discrete momentum balance with the velocity, the flow rule
with the new stress and the heat equation with T_M(theta), and sums the three
identities. Under backward Euler the summed identity holds exactly once the
numerical dissipation terms 1/2 int C^-1 dT:dT and the lumped
storage-minus-functional defect are booked, so the residual reflects solver
tolerance only.
"""
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .constitutive import (
    dissipation_density,
    f_eval,
    flow_rate,
    regularization_rate,
    truncate,
    truncation_primitive,
)
from .exceptions import ParameterError
from .fem import lifting_strain, lifting_temperature
from .tensors import IDENTITY, deviator, double_dot, frobenius_norm, hooke, hooke_inverse, trace
from .utils import get_thermo_setting

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergyLedger:
    """
    One row per time step. Energies are totals over the domain; the rate terms
    are integrated over the step (multiplied by dt).
    """

    time: float = 0.0
    elastic_energy: float = 0.0
    numerical_dissipation: float = 0.0
    viscous_dissipation: float = 0.0
    plastic_dissipation: float = 0.0
    regularization_dissipation: float = 0.0
    external_power: float = 0.0
    coupling_exchange: float = 0.0
    thermal_content: float = 0.0
    thermal_functional: float = 0.0
    thermal_numerical_dissipation: float = 0.0
    thermal_gradient: float = 0.0
    thermal_diffusion: float = 0.0
    thermal_coupling: float = 0.0
    thermal_source: float = 0.0
    truncated_source: float = 0.0
    heat_input: float = 0.0
    boundary_heat: float = 0.0
    momentum_residual: float = 0.0
    flow_rule_residual: float = 0.0
    mechanical_residual: float = 0.0
    thermal_residual: float = 0.0
    balance_residual: float = 0.0

    ENERGY_TERMS = (
        "elastic_energy", "numerical_dissipation", "viscous_dissipation", "plastic_dissipation",
        "regularization_dissipation", "external_power", "coupling_exchange", "thermal_functional",
        "thermal_numerical_dissipation", "thermal_diffusion", "thermal_coupling", "heat_input",
    )

    @classmethod
    def field_names(cls):
        return [item.name for item in fields(cls)]

    def as_dict(self):
        return asdict(self)

    def largest_term(self):
        return max(abs(getattr(self, name)) for name in self.ENERGY_TERMS)

    def relative_balance(self):
        return self.balance_residual / (1.0 + self.largest_term())

    def is_balanced(self, tol=None):
        tol = get_thermo_setting("AUDIT_TOL_DIRECT") if tol is None else tol
        return self.balance_residual <= tol * (1.0 + self.largest_term())


def audit_level(model, level=None):
    """Truncation level M of the audit test function; defaults to k."""
    return model.trunc_k if level is None else level


def _mechanical_temperature(space, data, state_now, state_next):
    if state_next.frozen_theta is not None:
        return state_next.frozen_theta
    return space.interpolate(state_now.theta) + lifting_temperature(space, data, state_now.time)


def initial_ledger(space, model, data, state, level=None):
    """Ledger row of the initial record: stored energies only."""
    M = audit_level(model, level)
    mass = space.lumped_mass
    return EnergyLedger(
        time=state.time,
        elastic_energy=0.5 * space.integrate(double_dot(hooke_inverse(model.moduli, state.stress), state.stress)),
        thermal_content=float(mass @ state.theta),
        thermal_functional=float(mass @ truncation_primitive(M, state.theta)),
    )


def energy_audit(state_now, state_next, model, data, dt, space, level=None):
    """
    Evaluate every ledger term for the step state_now -> state_next.

    Mechanical identity (momentum tested with the velocity, flow rule with T):
        d(elastic) + numerical + viscous + plastic + regularization = external + coupling
    Thermal identity (heat equation tested with T_M(theta) at nodes):
        d(thermal_functional) + thermal_numerical + thermal_diffusion + thermal_coupling = heat_input
    balance_residual is the sum of the absolute defects of the two identities.
    """
    M = audit_level(model, level)
    moduli = model.moduli
    S0, S1 = state_now.stress, state_next.stress
    t1 = state_next.time

    rate = (space.strain(state_next.u) - space.strain(state_now.u)) / dt
    lift_rate = np.broadcast_to(lifting_strain(space, data, state_now.time, t1), rate.shape) / dt
    theta_mech = _mechanical_temperature(space, data, state_now, state_next)

    elastic_before = 0.5 * space.integrate(double_dot(hooke_inverse(moduli, S0), S0))
    elastic_after = 0.5 * space.integrate(double_dot(hooke_inverse(moduli, S1), S1))
    jump = S1 - S0
    numerical = 0.5 * space.integrate(double_dot(hooke_inverse(moduli, jump), jump))
    viscous = dt * space.integrate(double_dot(hooke(moduli, rate), rate))

    flow = flow_rate(model, S1, theta_mech)
    regularization = regularization_rate(model, S1)
    plastic = dt * space.integrate(double_dot(flow, S1))
    regularization_loss = dt * space.integrate(double_dot(regularization, S1))
    flow_defect = hooke_inverse(moduli, jump) / dt + flow + regularization - rate - lift_rate
    flow_rule_residual = float(np.max(frobenius_norm(flow_defect))) if flow_defect.size else 0.0

    thermal_mech = f_eval(model, truncate(model.trunc_k, theta_mech))
    coupling = dt * space.integrate(thermal_mech * trace(rate))

    total = S1 - thermal_mech[..., None] * IDENTITY + hooke(moduli, rate)
    internal = space.assemble_vector(space.internal_force(total))
    if data.lifting_u is None:
        external_load = space.assemble_vector(space.body_load(data.body_force(space.qp_coords, t1)))
    else:
        external_load = np.zeros(space.n_dofs)
    full = internal - external_load
    velocity = (state_next.u - state_now.u) / dt
    constrained = space.constrained_dofs
    momentum_residual = float(np.linalg.norm(full[space.free_dofs]))
    external = dt * (velocity @ external_load + velocity[constrained] @ full[constrained])
    external += dt * space.integrate(double_dot(lift_rate, S1))

    mechanical_residual = (
        (elastic_after - elastic_before) + numerical + viscous + plastic + regularization_loss
        - external - coupling
    )

    # thermal budget, tested with the nodal T_M(theta)
    mass = space.lumped_mass
    theta0, theta1 = state_now.theta, state_next.theta
    test = truncate(M, theta1)
    functional_before = float(mass @ truncation_primitive(M, theta0))
    functional_after = float(mass @ truncation_primitive(M, theta1))
    storage = float(mass @ ((theta1 - theta0) * test))
    thermal_numerical = storage - (functional_after - functional_before)
    stiffness = space.heat_stiffness
    thermal_diffusion = dt * float(theta1 @ (stiffness @ test))
    thermal_gradient = dt * float(test @ (stiffness @ test))

    theta1_qp = space.interpolate(theta1) + lifting_temperature(space, data, t1)
    test_qp = space.interpolate(test)
    divergence = trace(rate + lift_rate)
    thermal_coupling = dt * space.integrate(f_eval(model, truncate(model.trunc_k, theta1_qp)) * divergence * test_qp)

    density = dissipation_density(model, S1, theta_mech)
    truncated_density = truncate(model.trunc_k, density)
    supply = truncated_density + data.heat_source(space.qp_coords, t1)
    if data.lifting_theta is None:
        flux = space.boundary_load(data.g_theta(space.face_qp_coords, t1))
    else:
        flux = np.zeros(space.n_nodes)
    heat_input = dt * space.integrate(supply * test_qp) + dt * float(flux @ test)

    thermal_residual = (
        (functional_after - functional_before) + thermal_numerical + thermal_diffusion + thermal_coupling
        - heat_input
    )

    return EnergyLedger(
        time=t1,
        elastic_energy=elastic_after,
        numerical_dissipation=numerical,
        viscous_dissipation=viscous,
        plastic_dissipation=plastic,
        regularization_dissipation=regularization_loss,
        external_power=external,
        coupling_exchange=coupling,
        thermal_content=float(mass @ theta1),
        thermal_functional=functional_after,
        thermal_numerical_dissipation=thermal_numerical,
        thermal_gradient=thermal_gradient,
        thermal_diffusion=thermal_diffusion,
        thermal_coupling=thermal_coupling,
        thermal_source=dt * space.integrate(density),
        truncated_source=dt * space.integrate(truncated_density),
        heat_input=heat_input,
        boundary_heat=dt * float(flux.sum()),
        momentum_residual=momentum_residual,
        flow_rule_residual=flow_rule_residual,
        mechanical_residual=mechanical_residual,
        thermal_residual=thermal_residual,
        balance_residual=abs(mechanical_residual) + abs(thermal_residual),
    )


@dataclass(frozen=True)
class BoundReport:
    """
    Per-run a-priori bound quantities.

    sup_stress_l2:            sup_t |T|_{L2}
    sup_scaled_deviator:      sup_t (1/k) |dev T|^{2r}_{L^{2r}}
    strain_rate_l2_sq:        int_0^T |eps(u_t)|^2_{L2}
    sup_theta_l1:             sup_t int |theta|
    theta_lq_w1q:             |theta|_{L^q(W^{1,q})}
    f_l2:                     |f(T_k(theta + theta~))|_{L2(L2)}
    flow_term_norm:           flow term in L^{(r+1)/r}
    regularization_term_norm: (1/k)|dev T|^{2r-1} in L^{2r/(2r-1)}
    stress_rate_norm:         T_t in L^{(r+1)/r}
    energy_bound:             sup_t of the combined energy quantity
    """

    q: float
    sup_stress_l2: float = 0.0
    sup_scaled_deviator: float = 0.0
    strain_rate_l2_sq: float = 0.0
    sup_theta_l1: float = 0.0
    theta_lq_w1q: float = 0.0
    f_l2: float = 0.0
    flow_term_norm: float = 0.0
    regularization_term_norm: float = 0.0
    stress_rate_norm: float = 0.0
    energy_bound: float = 0.0

    @classmethod
    def field_names(cls):
        return [item.name for item in fields(cls)]

    def as_dict(self):
        return asdict(self)

    def is_finite(self):
        return all(math.isfinite(value) for value in asdict(self).values())


def apriori_bounds(trajectory, model, q=None):
    """
    Bound quantities by quadrature over the recorded snapshots. Time integrals
    use the right endpoint of each snapshot interval, so a snapshot stride
    larger than one coarsens them.
    """
    q = get_thermo_setting("DEFAULT_Q") if q is None else q
    if not 1.0 < q < 1.25:
        raise ParameterError(f"q must lie in (1, 5/4), got {q}")
    space = trajectory.space
    data = trajectory.data
    r = model.r_exp
    k = model.trunc_k
    flow_power = (r + 1.0) / r
    regularization_power = 2.0 * r / (2.0 * r - 1.0)

    def scaled_deviator(state):
        if math.isinf(k):
            return 0.0
        return space.integrate(frobenius_norm(deviator(state.stress)) ** (2.0 * r)) / k

    snapshots = trajectory.snapshots
    sup_stress = sup_scaled = sup_theta = energy_bound = 0.0
    strain_rate_sq = theta_norm = f_sq = flow_norm = regularization_norm = stress_rate = 0.0
    for index, (time, state) in enumerate(snapshots):
        stress_sq = space.integrate(double_dot(state.stress, state.stress))
        scaled = scaled_deviator(state)
        theta_l1 = space.integrate(np.abs(space.interpolate(state.theta)))
        if index > 0:
            previous_time, previous = snapshots[index - 1]
            h = time - previous_time
            rate = (space.strain(state.u) - space.strain(previous.u)) / h
            strain_rate_sq += h * space.integrate(double_dot(rate, rate))
            theta_norm += h * space.integrate(
                np.abs(space.interpolate(state.theta)) ** q
                + np.sum(space.gradient(state.theta) ** 2, axis=-1) ** (q / 2.0)
            )
            theta_physical = space.interpolate(state.theta) + lifting_temperature(space, data, time)
            f_sq += h * space.integrate(f_eval(model, truncate(k, theta_physical)) ** 2)
            theta_mech = state.frozen_theta if state.frozen_theta is not None else theta_physical
            flow_norm += h * space.integrate(frobenius_norm(flow_rate(model, state.stress, theta_mech)) ** flow_power)
            if not math.isinf(k):
                magnitude = frobenius_norm(deviator(state.stress)) ** (2.0 * r - 1.0) / k
                regularization_norm += h * space.integrate(magnitude ** regularization_power)
            stress_rate += h * space.integrate(frobenius_norm((state.stress - previous.stress) / h) ** flow_power)
        sup_stress = max(sup_stress, math.sqrt(stress_sq))
        sup_scaled = max(sup_scaled, scaled)
        sup_theta = max(sup_theta, theta_l1)
        energy_bound = max(energy_bound, stress_sq + scaled + strain_rate_sq + theta_l1)

    return BoundReport(
        q=q,
        sup_stress_l2=sup_stress,
        sup_scaled_deviator=sup_scaled,
        strain_rate_l2_sq=strain_rate_sq,
        sup_theta_l1=sup_theta,
        theta_lq_w1q=theta_norm ** (1.0 / q),
        f_l2=math.sqrt(f_sq),
        flow_term_norm=flow_norm ** (1.0 / flow_power),
        regularization_term_norm=regularization_norm ** (1.0 / regularization_power),
        stress_rate_norm=stress_rate ** (1.0 / flow_power),
        energy_bound=energy_bound,
    )
