"""
Finite-element spaces, state containers and the weak forms of the momentum
balance and heat equation.

Displacement and temperature are trilinear nodal fields (displacement DOF of
node a, component i is 3a + i). Stress lives at the 2x2x2 Gauss points of each
cell and is condensed locally through the material-point update, so the
global momentum system is displacement-sized.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np
from scipy import sparse

from .constitutive import f_derivative, f_eval, integrate_stress, truncate
from .exceptions import AssemblyError, ParameterError
from .expressions import ExpressionField
from .mesh import face_quadrature, face_shape_functions, hex_quadrature, shape_functions
from .tensors import IDENTITY, METRIC, hooke, trace

logger = logging.getLogger(__name__)


def strain_displacement_matrices(gradients):
    """
    B such that strain components (xx, yy, zz, yz, xz, xy) = B @ cell displacement DOFs.

    Args:
        gradients: (nc, nq, 8, 3) physical shape-function gradients

    Returns:
        (nc, nq, 6, 24)
    """
    nc, nq = gradients.shape[:2]
    B = np.zeros((nc, nq, 6, 8, 3))
    dx, dy, dz = gradients[..., 0], gradients[..., 1], gradients[..., 2]
    B[:, :, 0, :, 0] = dx
    B[:, :, 1, :, 1] = dy
    B[:, :, 2, :, 2] = dz
    B[:, :, 3, :, 1] = 0.5 * dz
    B[:, :, 3, :, 2] = 0.5 * dy
    B[:, :, 4, :, 0] = 0.5 * dz
    B[:, :, 4, :, 2] = 0.5 * dx
    B[:, :, 5, :, 0] = 0.5 * dy
    B[:, :, 5, :, 1] = 0.5 * dx
    return B.reshape(nc, nq, 6, 24)


class FESpace:
    """
    Trilinear displacement and temperature spaces on a hexahedral mesh, with
    quadrature data, the Dirichlet constraint map and Neumann face quadrature.
    """

    def __init__(self, mesh, dirichlet_tags=None, neumann_tags=None):
        mesh.validate()
        self.mesh = mesh
        self.dirichlet_tags = tuple(mesh.tags if dirichlet_tags is None else dirichlet_tags)
        self.neumann_tags = tuple(mesh.tags if neumann_tags is None else neumann_tags)
        for tag in self.dirichlet_tags + self.neumann_tags:
            if tag not in mesh.tags:
                raise ParameterError(f"boundary tag {tag!r} does not exist on the mesh (tags: {mesh.tags})")

        points, weights = hex_quadrature()
        self.shape_values, reference_gradients = shape_functions(points)
        coordinates = mesh.vertices[mesh.cells]
        jacobians = np.einsum("cai,qaj->cqij", coordinates, reference_gradients)
        determinants = np.linalg.det(jacobians)
        if not np.all(determinants > 0):
            raise AssemblyError("nonpositive cell Jacobian at a quadrature point")
        inverse = np.linalg.inv(jacobians)
        self.gradients = np.einsum("qaj,cqji->cqai", reference_gradients, inverse)
        self.weights = determinants * weights
        self.qp_coords = np.einsum("qa,cai->cqi", self.shape_values, coordinates)
        self.B = strain_displacement_matrices(self.gradients)

        cells = mesh.cells
        self.cell_dofs = (3 * cells[:, :, None] + np.arange(3)).reshape(len(cells), 24)
        self.lumped_mass = np.bincount(
            cells.ravel(), weights=(self.weights @ self.shape_values).ravel(), minlength=self.n_nodes
        )
        self.heat_stiffness = self.assemble_scalar_matrix(
            np.einsum("cq,cqai,cqbi->cab", self.weights, self.gradients, self.gradients)
        )

        dirichlet_mask = np.isin(mesh.boundary_tags, self.dirichlet_tags)
        self.constrained_nodes = np.unique(mesh.face_vertices(dirichlet_mask)) if dirichlet_mask.any() \
            else np.zeros(0, dtype=np.int64)
        self.constrained_dofs = (3 * self.constrained_nodes[:, None] + np.arange(3)).ravel()
        free = np.ones(self.n_dofs, dtype=bool)
        free[self.constrained_dofs] = False
        self.free_dofs = np.flatnonzero(free)

        self._setup_neumann_faces(np.isin(mesh.boundary_tags, self.neumann_tags))
        logger.debug(
            f"FE space: {self.n_nodes} nodes, {self.n_cells} cells, "
            f"{self.free_dofs.size} free of {self.n_dofs} displacement DOFs"
        )

    def _setup_neumann_faces(self, mask):
        points, weights = face_quadrature()
        values, gradients = face_shape_functions(points)
        self.face_shape_values = values
        self.face_nodes = self.mesh.face_vertices(mask) if mask.any() else np.zeros((0, 4), dtype=np.int64)
        corners = self.mesh.vertices[self.face_nodes]
        tangent_s = np.einsum("qa,fai->fqi", gradients[..., 0], corners)
        tangent_t = np.einsum("qa,fai->fqi", gradients[..., 1], corners)
        self.face_weights = np.linalg.norm(np.cross(tangent_s, tangent_t), axis=-1) * weights
        self.face_qp_coords = np.einsum("qa,fai->fqi", values, corners)

    @property
    def n_nodes(self):
        return self.mesh.n_vertices

    @property
    def n_cells(self):
        return self.mesh.n_cells

    @property
    def n_qp(self):
        return self.shape_values.shape[0]

    @property
    def n_dofs(self):
        return 3 * self.n_nodes

    @property
    def volume(self):
        return float(self.weights.sum())

    @property
    def boundary_area(self):
        return float(self.face_weights.sum())

    # interpolation to quadrature points

    def interpolate(self, nodal):
        return np.einsum("qa,ca->cq", self.shape_values, np.asarray(nodal)[self.mesh.cells])

    def interpolate_vector(self, u):
        return np.einsum("qa,cai->cqi", self.shape_values, np.asarray(u).reshape(-1, 3)[self.mesh.cells])

    def gradient(self, nodal):
        return np.einsum("cqai,ca->cqi", self.gradients, np.asarray(nodal)[self.mesh.cells])

    def strain(self, u):
        return np.einsum("cqkd,cd->cqk", self.B, np.asarray(u)[self.cell_dofs])

    def integrate(self, values):
        return float(np.sum(self.weights * values))

    # assembly

    def assemble_vector(self, cell_vectors):
        return np.bincount(self.cell_dofs.ravel(), weights=np.ravel(cell_vectors), minlength=self.n_dofs)

    def assemble_matrix(self, cell_matrices):
        rows = np.repeat(self.cell_dofs, 24, axis=1).ravel()
        cols = np.tile(self.cell_dofs, (1, 24)).ravel()
        return sparse.coo_matrix(
            (np.ravel(cell_matrices), (rows, cols)), shape=(self.n_dofs, self.n_dofs)
        ).tocsr()

    def assemble_scalar_vector(self, cell_vectors):
        return np.bincount(self.mesh.cells.ravel(), weights=np.ravel(cell_vectors), minlength=self.n_nodes)

    def assemble_scalar_matrix(self, cell_matrices):
        cells = self.mesh.cells
        rows = np.repeat(cells, 8, axis=1).ravel()
        cols = np.tile(cells, (1, 8)).ravel()
        return sparse.coo_matrix(
            (np.ravel(cell_matrices), (rows, cols)), shape=(self.n_nodes, self.n_nodes)
        ).tocsr()

    def internal_force(self, stress):
        """Cell vectors of int B^T (stress) over each cell, stress at quadrature points."""
        return np.einsum("cq,cqkd,cqk->cd", self.weights, self.B, METRIC * stress)

    def body_load(self, force):
        """Cell vectors of int N F for F of shape (nc, nq, 3)."""
        return np.einsum("cq,qa,cqi->cai", self.weights, self.shape_values, force).reshape(self.n_cells, 24)

    def scalar_load(self, density):
        """Cell vectors of int N s for s of shape (nc, nq)."""
        return np.einsum("cq,qa,cq->ca", self.weights, self.shape_values, density)

    def boundary_load(self, flux):
        """Nodal vector of int_{Neumann faces} g N for g of shape (nf, 4)."""
        contributions = np.einsum("fq,qa,fq->fa", self.face_weights, self.face_shape_values, flux)
        return np.bincount(self.face_nodes.ravel(), weights=contributions.ravel(), minlength=self.n_nodes)

    def stiffness_matrix(self, moduli):
        """Linear elasticity matrix int eps(w):C eps(v)."""
        C = moduli.stiffness_matrix()
        cell_matrices = np.einsum("cq,cqkd,k,kl,cqle->cde", self.weights, self.B, METRIC, C, self.B, optimize=True)
        return self.assemble_matrix(cell_matrices)


@dataclass
class LiftingField:
    """
    Precomputed lifting field sampled at increasing times.
    values: (nt, n) field values; rates: (nt, n) time derivatives or None.
    """

    times: np.ndarray
    values: np.ndarray
    rates: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.times.size:
            raise ParameterError("lifting field needs one value row per time")

    def at(self, t):
        index = int(np.searchsorted(self.times, t))
        tolerance = 1e-12 * max(1.0, abs(t))
        for candidate in (index - 1, index):
            if 0 <= candidate < self.times.size and abs(self.times[candidate] - t) <= tolerance:
                return self.values[candidate]
        if t < self.times[0] - tolerance or t > self.times[-1] + tolerance:
            raise ParameterError(f"lifting field is not available at t = {t}")
        weight = (t - self.times[index - 1]) / (self.times[index] - self.times[index - 1])
        return (1.0 - weight) * self.values[index - 1] + weight * self.values[index]


def _zero_vector_field():
    return ExpressionField.zeros(3, name="zero_vector")


def _zero_scalar_field():
    return ExpressionField.zeros(name="zero_scalar")


def _zero_tensor_field():
    return ExpressionField.zeros(6, name="zero_tensor")


@dataclass
class GivenData:
    """
    Problem data. Fields are callables of (points (..., 3), t); the initial
    nodal fields u0 and theta0 may also be arrays with one entry per vertex.
    lifting_u and lifting_theta switch the integrator to the homogenized
    variables (u - u~, theta - theta~).
    """

    body_force: Callable = field(default_factory=_zero_vector_field)
    g_D: Callable = field(default_factory=_zero_vector_field)
    g_theta: Callable = field(default_factory=_zero_scalar_field)
    heat_source: Callable = field(default_factory=_zero_scalar_field)
    u0: Any = field(default_factory=_zero_vector_field)
    T0: Any = field(default_factory=_zero_tensor_field)
    theta0: Any = field(default_factory=_zero_scalar_field)
    g_D_rate: Optional[Callable] = None
    lifting_u: Optional[LiftingField] = None
    lifting_theta: Optional[LiftingField] = None

    @property
    def lifted(self):
        return self.lifting_u is not None or self.lifting_theta is not None

    def boundary_rate(self):
        """g_{D,t}: explicit rate if given, exact derivative of expression data otherwise."""
        if self.g_D_rate is not None:
            return self.g_D_rate
        if isinstance(self.g_D, ExpressionField):
            return self.g_D.time_derivative()
        raise ParameterError("g_D_rate is required when g_D is not an expression field")

    def with_lifting(self, lifting_u, lifting_theta):
        return replace(self, lifting_u=lifting_u, lifting_theta=lifting_theta)


@dataclass
class FieldsState:
    """
    Discrete fields at one time level.
    u: (3 n_nodes,) displacement; theta: (n_nodes,) temperature;
    stress: (nc, nq, 6) quadrature-point stress.
    frozen_theta: (nc, nq) temperatures used inside f and beta by the
    mechanical step that produced this state.
    """

    u: np.ndarray
    theta: np.ndarray
    stress: np.ndarray
    time: float = 0.0
    frozen_theta: Optional[np.ndarray] = None

    def check_layout(self, space):
        if self.u.shape != (space.n_dofs,) or self.theta.shape != (space.n_nodes,) \
                or self.stress.shape != (space.n_cells, space.n_qp, 6):
            raise ParameterError("state arrays do not match the finite-element space layout")
        return True

    def copy(self):
        return FieldsState(
            u=self.u.copy(),
            theta=self.theta.copy(),
            stress=self.stress.copy(),
            time=self.time,
            frozen_theta=None if self.frozen_theta is None else self.frozen_theta.copy(),
        )


def nodal_values(values, vertices, n_components=None, t=0.0):
    """Evaluate a data field at mesh vertices; tabulated arrays pass through."""
    if callable(values):
        result = np.asarray(values(vertices, t), dtype=float)
    else:
        result = np.asarray(values, dtype=float)
    expected = (len(vertices),) if n_components is None else (len(vertices), n_components)
    if result.shape != expected:
        raise ParameterError(f"nodal field has shape {result.shape}, expected {expected}")
    return result


def initial_state(space, model, data):
    """u = u0, T = T0, theta = T_k(theta0) at t = 0."""
    u = nodal_values(data.u0, space.mesh.vertices, 3).ravel()
    theta = truncate(model.trunc_k, nodal_values(data.theta0, space.mesh.vertices))
    if callable(data.T0):
        stress = np.asarray(data.T0(space.qp_coords, 0.0), dtype=float)
    else:
        stress = np.broadcast_to(np.asarray(data.T0, dtype=float), (space.n_cells, space.n_qp, 6)).copy()
    if not np.all(np.isfinite(stress)):
        raise ParameterError("initial stress T0 must be finite")
    if not np.isfinite(space.integrate(np.abs(space.interpolate(theta)))):
        raise ParameterError("initial temperature theta0 must be integrable")
    return FieldsState(u=u, theta=np.asarray(theta, dtype=float), stress=stress, time=0.0)


@dataclass
class DirichletConstraint:
    dofs: np.ndarray
    values: np.ndarray

    def apply(self, u):
        u = np.array(u, dtype=float)
        u[self.dofs] = self.values
        return u


def apply_dirichlet(space, data, t):
    """
    Interpolate g_D(., t) at the constrained nodes. In lifting mode the lifting
    boundary values are subtracted so the homogenized displacement is constrained.
    """
    nodes = space.constrained_nodes
    values = np.asarray(data.g_D(space.mesh.vertices[nodes], t), dtype=float).reshape(-1)
    if data.lifting_u is not None:
        values = values - data.lifting_u.at(t)[space.constrained_dofs]
    return DirichletConstraint(dofs=space.constrained_dofs, values=values)


def lifting_strain(space, data, t_now, t_next):
    """Strain increment of u~ between two times (zero outside lifting mode)."""
    if data.lifting_u is None:
        return 0.0
    return space.strain(data.lifting_u.at(t_next) - data.lifting_u.at(t_now))


def lifting_temperature(space, data, t):
    """theta~ at quadrature points (zero outside lifting mode)."""
    if data.lifting_theta is None:
        return 0.0
    return space.interpolate(data.lifting_theta.at(t))


@dataclass
class AssembledSystem:
    """
    residual: residual over the unknowns (free DOFs for momentum, all nodes for heat)
    jacobian: sparse tangent acting on the same unknowns
    scale: norm of the residual contributions before cancellation
    """

    residual: np.ndarray
    jacobian: Any
    scale: float
    full_residual: Optional[np.ndarray] = None
    stress: Optional[np.ndarray] = None


def assemble_momentum(space, model, state_now, state_guess, data, dt, theta_qp=None, tol=None, max_iter=None):
    """
    Momentum residual with the flow rule condensed per quadrature point.

    r(w) = int (T - f(T_k(theta)) Id):eps(w) + int C eps((u_guess - u_now)/dt):eps(w) - int F.w
    for free displacement DOFs w; T solves the implicit flow rule driven by the
    strain increment. theta_qp (nc, nq) is the temperature inside f and beta;
    it defaults to state_guess.theta plus the temperature lifting.
    """
    if not dt > 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    t_next = state_guess.time
    if theta_qp is None:
        theta_qp = space.interpolate(state_guess.theta) + lifting_temperature(space, data, t_next)

    strain_increment = space.strain(state_guess.u) - space.strain(state_now.u)
    drive = strain_increment + lifting_strain(space, data, state_now.time, t_next)
    stress, tangent = integrate_stress(
        model,
        state_now.stress.reshape(-1, 6),
        np.broadcast_to(drive, strain_increment.shape).reshape(-1, 6),
        np.asarray(theta_qp).reshape(-1),
        dt,
        tol=tol,
        max_iter=max_iter,
    )
    stress = stress.reshape(state_now.stress.shape)
    tangent = tangent.reshape(space.n_cells, space.n_qp, 6, 6)

    thermal = f_eval(model, truncate(model.trunc_k, theta_qp))
    total = stress - thermal[..., None] * IDENTITY + hooke(model.moduli, strain_increment) / dt
    cell_forces = space.internal_force(total)
    internal = space.assemble_vector(cell_forces)
    if data.lifting_u is None:
        external = space.assemble_vector(space.body_load(data.body_force(space.qp_coords, t_next)))
    else:
        external = np.zeros(space.n_dofs)
    full = internal - external

    material = tangent + model.moduli.stiffness_matrix() / dt
    cell_matrices = np.einsum(
        "cq,cqkd,k,cqkl,cqle->cde", space.weights, space.B, METRIC, material, space.B, optimize=True
    )
    jacobian = space.assemble_matrix(cell_matrices)
    free = space.free_dofs
    scale = float(
        np.linalg.norm(space.assemble_vector(np.abs(cell_forces))[free]) + np.linalg.norm(external[free])
    )
    return AssembledSystem(
        residual=full[free],
        jacobian=jacobian[free][:, free],
        scale=scale,
        full_residual=full,
        stress=stress,
    )


def assemble_heat(space, model, state_now, state_guess, data, dt, source, tangent="newton"):
    """
    Backward-Euler heat residual over all temperature nodes.

    r_i = m_i (theta - theta_now)_i / dt + (K theta)_i + int f(T_k(theta)) div(u_t) N_i
          - int (source + heat_source) N_i - int_{Neumann} g_theta N_i

    with lumped mass m, consistent stiffness K and source (nc, nq) the
    truncated dissipation. The tangent adds the f' coupling term unless
    tangent == 'picard'.
    """
    if not dt > 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    t_next = state_guess.time
    theta = np.asarray(state_guess.theta, dtype=float)
    theta_qp = space.interpolate(theta) + lifting_temperature(space, data, t_next)
    divergence = trace(space.strain(state_guess.u) - space.strain(state_now.u)
                       + lifting_strain(space, data, state_now.time, t_next)) / dt
    truncated = truncate(model.trunc_k, theta_qp)
    coupling_cells = space.scalar_load(f_eval(model, truncated) * divergence)
    supply = source + data.heat_source(space.qp_coords, t_next)
    source_cells = space.scalar_load(supply)
    if data.lifting_theta is None:
        flux = space.boundary_load(data.g_theta(space.face_qp_coords, t_next))
    else:
        flux = np.zeros(space.n_nodes)

    mass = space.lumped_mass
    storage = mass * (theta - state_now.theta) / dt
    diffusion = space.heat_stiffness @ theta
    residual = (
        storage + diffusion + space.assemble_scalar_vector(coupling_cells)
        - space.assemble_scalar_vector(source_cells) - flux
    )

    jacobian = sparse.diags(mass / dt) + space.heat_stiffness
    if tangent == "newton":
        active = np.abs(theta_qp) < model.trunc_k
        slope = np.where(active, f_derivative(model, truncated), 0.0) * divergence
        coupling_matrices = np.einsum(
            "cq,qa,qb,cq->cab", space.weights, space.shape_values, space.shape_values, slope
        )
        jacobian = jacobian + space.assemble_scalar_matrix(coupling_matrices)
    elif tangent != "picard":
        raise ParameterError(f"unknown heat tangent {tangent!r}")

    scale = float(
        np.linalg.norm(mass * theta / dt) + np.linalg.norm(mass * state_now.theta / dt)
        + np.linalg.norm(space.assemble_scalar_vector(np.abs(coupling_cells)))
        + np.linalg.norm(space.assemble_scalar_vector(np.abs(source_cells)))
        + np.linalg.norm(flux)
    )
    return AssembledSystem(residual=residual, jacobian=sparse.csr_matrix(jacobian), scale=scale,
                           full_residual=residual)
