"""
Manufactured solutions: symbolic forcing for a chosen displacement and
temperature, and the error norms used by convergence studies.

The manufactured stress is elastic, T = C eps(u), so the chosen data must keep
|dev T| below the yield radius and |theta| below k. The displacement should
vanish at t = 0 or be linear in x so the initial stress is reproduced exactly
by the discrete strain.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import sympy

from .exceptions import ParameterError
from .expressions import THETA, TIME, X1, X2, X3, ExpressionField, parse_expression
from .fem import GivenData
from .tensors import INDEX_PAIRS, METRIC

logger = logging.getLogger(__name__)

COORDINATES = (X1, X2, X3)


@dataclass
class ManufacturedSolution:
    displacement: ExpressionField
    temperature: ExpressionField
    stress: Optional[ExpressionField] = None


@dataclass(frozen=True)
class MmsErrors:
    h: float
    dt: float
    displacement_l2: float
    temperature_l2: float
    stress_l2: float


def thermal_stress_symbolic(model, theta):
    """f(theta) as a sympy expression; the default law uses its theta >= 0 branch."""
    spec = model.f_spec
    if spec.kind == "zero":
        return sympy.Integer(0)
    if spec.kind == "default":
        return spec.B * ((1 + theta) ** sympy.Float(spec.alpha) - 1)
    return parse_expression(spec.expression, variables=("theta",)).subs(THETA, theta)


def _strain(displacement):
    return [
        sympy.Rational(1, 2) * (sympy.diff(displacement[i], COORDINATES[j]) + sympy.diff(displacement[j], COORDINATES[i]))
        for i, j in INDEX_PAIRS
    ]


def _matrix(components):
    matrix = [[None] * 3 for _ in range(3)]
    for value, (i, j) in zip(components, INDEX_PAIRS):
        matrix[i][j] = value
        matrix[j][i] = value
    return matrix


def _elastic_stress(model, strain):
    mu, lam = model.moduli.mu, model.moduli.lam
    volumetric = strain[0] + strain[1] + strain[2]
    return [2 * mu * e + lam * volumetric * delta for e, delta in zip(strain, (1, 1, 1, 0, 0, 0))]


def exact_solution(model, displacement, temperature):
    """Exact fields for error reporting; the stress is the elastic response C eps(u)."""
    u = [parse_expression(component) for component in displacement]
    return ManufacturedSolution(
        displacement=ExpressionField(u, name="u_exact"),
        temperature=ExpressionField(temperature, name="theta_exact"),
        stress=ExpressionField(_elastic_stress(model, _strain(u)), name="T_exact"),
    )


def build_manufactured_problem(model, displacement, temperature, extent=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """
    Forcing terms making (displacement, temperature) an exact solution on a box.

    Args:
        displacement: three expressions in (x1, x2, x3, t)
        temperature: expression in (x1, x2, x3, t) with zero normal derivative on the box faces

    Returns:
        (GivenData, ManufacturedSolution)
    """
    u = [parse_expression(component) for component in displacement]
    theta = parse_expression(temperature)
    for axis, coordinate in enumerate(COORDINATES):
        normal_derivative = sympy.diff(theta, coordinate)
        for side in (origin[axis], origin[axis] + extent[axis]):
            if sympy.simplify(normal_derivative.subs(coordinate, side)) != 0:
                raise ParameterError(
                    f"manufactured temperature must have zero normal flux on the face x{axis + 1} = {side}"
                )

    mu, lam = model.moduli.mu, model.moduli.lam
    strain = _strain(u)
    strain_rate = [sympy.diff(component, TIME) for component in strain]
    volumetric = strain[0] + strain[1] + strain[2]
    volumetric_rate = sympy.diff(volumetric, TIME)
    identity = [1, 1, 1, 0, 0, 0]
    stress = _elastic_stress(model, strain)
    thermal = thermal_stress_symbolic(model, theta)
    total = [
        s - thermal * delta + 2 * mu * e_t + lam * volumetric_rate * delta
        for s, e_t, delta in zip(stress, strain_rate, identity)
    ]
    total_matrix = _matrix(total)
    body_force = [
        -sum(sympy.diff(total_matrix[i][j], COORDINATES[j]) for j in range(3)) for i in range(3)
    ]
    laplacian = sum(sympy.diff(theta, coordinate, 2) for coordinate in COORDINATES)
    heat_source = sympy.diff(theta, TIME) - laplacian + thermal * volumetric_rate

    u_field = ExpressionField(u, name="u_exact")
    stress_at_zero = ExpressionField([component.subs(TIME, 0) for component in stress], name="T0")
    data = GivenData(
        body_force=ExpressionField([sympy.expand(component) for component in body_force], name="F"),
        g_D=u_field,
        g_theta=ExpressionField("0", name="g_theta"),
        heat_source=ExpressionField(sympy.expand(heat_source), name="heat_source"),
        u0=ExpressionField([component.subs(TIME, 0) for component in u], name="u0"),
        T0=stress_at_zero,
        theta0=ExpressionField(theta.subs(TIME, 0), name="theta0"),
    )
    exact = ManufacturedSolution(
        displacement=u_field,
        temperature=ExpressionField(theta, name="theta_exact"),
        stress=ExpressionField(stress, name="T_exact"),
    )
    logger.info("Built manufactured problem with symbolic body force and heat supply")
    return data, exact


def mesh_size(space):
    """Largest cell edge length."""
    corners = space.mesh.vertices[space.mesh.cells]
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (1, 5), (2, 6), (3, 7)]
    lengths = [np.linalg.norm(corners[:, a] - corners[:, b], axis=-1) for a, b in edges]
    return float(np.max(lengths))


def mms_error(trajectory, exact):
    """L2 errors of u and theta and the quadrature-point stress error at the final time."""
    space = trajectory.space
    time, state = trajectory.snapshots[-1]
    points = space.qp_coords
    displacement_error = space.interpolate_vector(state.u) - exact.displacement(points, time)
    temperature_error = space.interpolate(state.theta) - exact.temperature(points, time)
    stress_l2 = math.nan
    if exact.stress is not None:
        stress_error = state.stress - exact.stress(points, time)
        stress_l2 = math.sqrt(space.integrate(np.sum(METRIC * stress_error ** 2, axis=-1)))
    return MmsErrors(
        h=mesh_size(space),
        dt=trajectory.config.dt,
        displacement_l2=math.sqrt(space.integrate(np.sum(displacement_error ** 2, axis=-1))),
        temperature_l2=math.sqrt(space.integrate(temperature_error ** 2)),
        stress_l2=stress_l2,
    )


def observed_rate(coarse, fine, parameter="h"):
    """
    Observed convergence rates between two levels.

    Returns:
        dict with 'displacement', 'temperature' and 'stress' rates
    """
    ratio = getattr(coarse, parameter) / getattr(fine, parameter)
    if not ratio > 1:
        raise ParameterError(f"the coarse level must have the larger {parameter}")

    def rate(name):
        before, after = getattr(coarse, name), getattr(fine, name)
        if not (before > 0 and after > 0):
            return math.nan
        return math.log(before / after) / math.log(ratio)

    return {
        "displacement": rate("displacement_l2"),
        "temperature": rate("temperature_l2"),
        "stress": rate("stress_l2"),
    }
