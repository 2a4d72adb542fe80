"""
Parameter sweeps over independent simulations: truncation level k and mesh
refinement. Members run on a bounded thread pool; a failing member is recorded
and the remaining members still report.
"""
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, List, Optional

import numpy as np

from .diagnostics import apriori_bounds
from .exceptions import ParameterError, ThermoError
from .fem import FESpace
from .integrator import run_simulation
from .manufactured import mesh_size, mms_error, observed_rate
from .mesh import build_box_mesh
from .tensors import METRIC

logger = logging.getLogger(__name__)


@dataclass
class KRun:
    k: float
    trajectory: Any = None
    bounds: Any = None
    error: Optional[str] = None

    @property
    def succeeded(self):
        return self.error is None


@dataclass(frozen=True)
class CauchyRow:
    k_coarse: float
    k_fine: float
    theta_l1: float
    stress_l2: float
    displacement_l2: float


@dataclass
class KStudy:
    runs: List[KRun] = field(default_factory=list)
    rows: List[CauchyRow] = field(default_factory=list)

    @property
    def failures(self):
        return [run for run in self.runs if not run.succeeded]

    @property
    def succeeded(self):
        return not self.failures

    def regularization_norms(self):
        return [(run.k, run.bounds.regularization_term_norm) for run in self.runs if run.succeeded]


def _map(function, items, workers):
    workers = max(1, int(workers))
    if workers == 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(function, items))


def _snapshot_map(trajectory):
    return {round(time, 12): state for time, state in trajectory.snapshots}


def cauchy_distances(coarse, fine):
    """
    Max over shared snapshot times of the L1 distance of theta and the L2
    distances of T and u between two runs on the same space.
    """
    space = coarse.space
    fine_states = _snapshot_map(fine)
    theta_l1 = stress_l2 = displacement_l2 = 0.0
    shared = 0
    for key, state in _snapshot_map(coarse).items():
        other = fine_states.get(key)
        if other is None:
            continue
        shared += 1
        theta_l1 = max(theta_l1, space.integrate(np.abs(space.interpolate(state.theta - other.theta))))
        stress_difference = state.stress - other.stress
        stress_l2 = max(stress_l2, math.sqrt(space.integrate(np.sum(METRIC * stress_difference ** 2, axis=-1))))
        u_difference = space.interpolate_vector(state.u - other.u)
        displacement_l2 = max(displacement_l2, math.sqrt(space.integrate(np.sum(u_difference ** 2, axis=-1))))
    if shared == 0:
        raise ParameterError("runs share no snapshot times")
    return theta_l1, stress_l2, displacement_l2


def k_convergence_study(base_config, model, data, k_list, mesh, workers=1, space=None):
    """
    Run the same problem for each truncation level and compare consecutive levels.

    Args:
        base_config: SolverConfig shared by every run
        k_list: at least three strictly increasing truncation levels
        workers: size of the thread pool

    Returns:
        KStudy with one KRun per k and one CauchyRow per consecutive pair of successful runs
    """
    levels = [float(k) for k in k_list]
    if len(levels) < 3:
        raise ParameterError(f"a k-study needs at least three levels, got {len(levels)}")
    if any(not later > earlier for earlier, later in zip(levels, levels[1:])) or levels[0] <= 0:
        raise ParameterError(f"k levels must be positive and strictly increasing, got {levels}")
    space = FESpace(mesh) if space is None else space

    def run_one(k):
        level_model = dataclasses.replace(model, trunc_k=k)
        try:
            trajectory = run_simulation(base_config, level_model, data, mesh, space=space)
        except ThermoError as e:
            logger.error(f"k-study member k = {k:g} failed: {e}")
            return KRun(k=k, error=str(e))
        logger.info(f"k-study member k = {k:g} finished with {len(trajectory.records)} records")
        return KRun(k=k, trajectory=trajectory, bounds=apriori_bounds(trajectory, level_model))

    study = KStudy(runs=_map(run_one, levels, workers))
    completed = [run for run in study.runs if run.succeeded]
    for coarse, fine in zip(completed, completed[1:]):
        theta_l1, stress_l2, displacement_l2 = cauchy_distances(coarse.trajectory, fine.trajectory)
        study.rows.append(CauchyRow(
            k_coarse=coarse.k,
            k_fine=fine.k,
            theta_l1=theta_l1,
            stress_l2=stress_l2,
            displacement_l2=displacement_l2,
        ))
    if study.failures:
        logger.warning(f"k-study finished with {len(study.failures)} failed member(s) of {len(levels)}")
    return study


@dataclass
class MeshLevel:
    level: int
    resolution: tuple
    h: float
    trajectory: Any = None
    errors: Any = None
    difference: Optional[tuple] = None
    rates: Optional[dict] = None
    error: Optional[str] = None


def _coarse_node_values(fine, coarse_resolution):
    """Nodal values of a nested box mesh at the vertices of the mesh one level coarser."""
    nx, ny, nz = coarse_resolution
    i, j, k = np.meshgrid(2 * np.arange(nx + 1), 2 * np.arange(ny + 1), 2 * np.arange(nz + 1), indexing="ij")
    index = (i + (2 * nx + 1) * (j + (2 * ny + 1) * k)).ravel(order="F")
    return fine.u.reshape(-1, 3)[index].ravel(), fine.theta[index]


def _level_difference(coarse, fine, resolution):
    space = coarse.space
    coarse_state, fine_state = coarse.final_state, fine.final_state
    u_fine, theta_fine = _coarse_node_values(fine_state, resolution)
    u_difference = space.interpolate_vector(coarse_state.u - u_fine)
    theta_difference = space.interpolate(coarse_state.theta - theta_fine)
    return (
        math.sqrt(space.integrate(np.sum(u_difference ** 2, axis=-1))),
        math.sqrt(space.integrate(theta_difference ** 2)),
    )


def mesh_refinement_study(config, model, data, extent, resolution, levels, exact=None, workers=1,
                          origin=(0.0, 0.0, 0.0), dirichlet_tags=None, neumann_tags=None):
    """
    Nested uniform refinements of a box, doubling the resolution per level.

    With an exact solution each level reports MMS errors and the observed rates
    against the previous level; otherwise successive final states are compared
    at the coarse vertices.
    """
    if levels < 2:
        raise ParameterError(f"a mesh study needs at least two levels, got {levels}")
    resolutions = [tuple(int(n) * 2 ** level for n in resolution) for level in range(levels)]

    def run_one(level):
        mesh = build_box_mesh(extent, resolutions[level], origin=origin)
        entry = MeshLevel(level=level, resolution=resolutions[level], h=0.0)
        try:
            space = FESpace(mesh, dirichlet_tags=dirichlet_tags, neumann_tags=neumann_tags)
            entry.h = mesh_size(space)
            entry.trajectory = run_simulation(config, model, data, mesh, space=space)
        except ThermoError as e:
            logger.error(f"Mesh level {level} {resolutions[level]} failed: {e}")
            entry.error = str(e)
            return entry
        if exact is not None:
            entry.errors = mms_error(entry.trajectory, exact)
        logger.info(f"Mesh level {level} {resolutions[level]} finished")
        return entry

    results = _map(run_one, range(levels), workers)
    for previous, current in zip(results, results[1:]):
        if previous.error or current.error:
            continue
        if exact is not None:
            current.rates = observed_rate(previous.errors, current.errors)
        else:
            current.difference = _level_difference(previous.trajectory, current.trajectory, previous.resolution)
    return results
