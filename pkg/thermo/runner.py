"""
Orchestration behind the management commands: build the problem from a
RunConfig, run it and write the result files.
"""
import dataclasses
import logging
from contextlib import contextmanager

import numpy as np

from .config import build_problem, echo_parameters
from .constitutive import drive_material_point, validate_material
from .diagnostics import apriori_bounds
from .exceptions import ConfigError
from .integrator import run_simulation
from .lifting import solve_lifting_displacement, solve_lifting_temperature
from .output import (
    ensure_directory,
    write_bounds_csv,
    write_cauchy_csv,
    write_ledger_csv,
    write_lifting_csv,
    write_material_point_csv,
    write_mesh_study_csv,
    write_outputs,
    write_summary,
    write_vtk,
)
from .studies import k_convergence_study, mesh_refinement_study
from .tensors import SymTensor3
from .utils import format_float, format_level

logger = logging.getLogger(__name__)

RUN_LOG = "run.log"


@contextmanager
def run_log(directory, run_config):
    """Mirror the thermo logger into <directory>/run.log for the duration of a run."""
    directory = ensure_directory(directory)
    handler = logging.FileHandler(directory / RUN_LOG, mode="w")
    handler.setFormatter(logging.Formatter("{asctime} {levelname} {name}: {message}", style="{"))
    package_logger = logging.getLogger("thermo")
    package_logger.addHandler(handler)
    try:
        echo_parameters(run_config)
        yield directory
    finally:
        package_logger.removeHandler(handler)
        handler.close()


def with_overrides(run_config, snapshot_stride=None):
    if snapshot_stride is None:
        return run_config
    solver = dataclasses.replace(run_config.solver, snapshot_stride=snapshot_stride)
    return dataclasses.replace(run_config, solver=solver)


def execute_run(run_config, directory):
    """Single simulation with VTK snapshots, ledger, bounds and summary."""
    with run_log(directory, run_config) as directory:
        mesh, space, model, data, _ = build_problem(run_config)
        trajectory = run_simulation(run_config.solver, model, data, mesh, space=space)
        bounds = apriori_bounds(trajectory, model)
        written = write_outputs(trajectory, mesh, run_config, bounds=bounds, directory=directory)
        logger.info(f"Run finished: {len(written)} files in {directory}")
    return trajectory, bounds


def execute_validation(run_config):
    report = validate_material(run_config.material)
    for line in report.lines():
        logger.info(line)
    return report


def execute_material_point(run_config, directory):
    settings = run_config.material_point
    if settings is None:
        raise ConfigError("section is required by the material_point command", key="material_point")
    directory = ensure_directory(directory)
    initial = None if settings.initial_stress is None else SymTensor3(np.array(settings.initial_stress))
    history = drive_material_point(
        run_config.material,
        settings.times,
        np.array(settings.strains),
        settings.temperatures,
        settings.dt,
        initial_stress=initial,
    )
    write_material_point_csv(history, directory / "material_point.csv")
    return history


def execute_k_study(run_config, k_list, directory, workers=1):
    """
    k-sweep with one ledger per k, the Cauchy table and the per-k bounds.
    Failed members appear as 'failed' rows in k_bounds.csv.
    """
    with run_log(directory, run_config) as directory:
        mesh, space, model, data, _ = build_problem(run_config)
        study = k_convergence_study(run_config.solver, model, data, k_list, mesh, workers=workers, space=space)
        for run in study.runs:
            if run.succeeded:
                write_ledger_csv(run.trajectory.ledgers[1:], directory / f"ledger_k{format_level(run.k)}.csv")
        write_cauchy_csv(study.rows, directory / "cauchy.csv")
        write_bounds_csv([run.bounds for run in study.runs], directory / "k_bounds.csv",
                         levels=[run.k for run in study.runs])
        lines = [f"k_levels: {', '.join(format_level(run.k) for run in study.runs)}"]
        lines += [f"failed_k: {format_level(run.k)}: {run.error}" for run in study.failures]
        lines += [
            f"cauchy {format_level(row.k_coarse)} -> {format_level(row.k_fine)}: "
            f"theta_l1 {format_float(row.theta_l1)}"
            for row in study.rows
        ]
        write_summary(directory / "summary.txt", lines)
    return study


def execute_mesh_study(run_config, levels, directory, workers=1):
    settings = run_config.mesh
    if not settings.is_box:
        raise ConfigError("mesh refinement needs a box mesh (extent and resolution)", key="mesh.file")
    with run_log(directory, run_config) as directory:
        _, _, model, data, exact = build_problem(run_config)
        results = mesh_refinement_study(
            run_config.solver, model, data, settings.extent, settings.resolution, levels,
            exact=exact, workers=workers, origin=settings.origin,
            dirichlet_tags=settings.dirichlet_tags, neumann_tags=settings.neumann_tags,
        )
        write_mesh_study_csv(results, directory / "mesh_study.csv")
    return results


def execute_lifting(run_config, directory):
    """Solve both lifting problems on the solver's time grid and write them out."""
    solver = run_config.solver
    with run_log(directory, run_config) as directory:
        mesh, space, model, data, _ = build_problem(run_config)
        times = [solver.step_time(index) for index in range(1, solver.n_steps + 1)]
        lifting_u = solve_lifting_displacement(space, data, model.moduli, times, linear_solver=solver.linear_solver,
                                               linear_tol=solver.linear_tol)
        lifting_theta = solve_lifting_temperature(space, data, solver.dt, solver.n_steps, times=times,
                                                  linear_solver=solver.linear_solver, linear_tol=solver.linear_tol)
        write_lifting_csv(lifting_u, directory / "lifting_u.csv", components=3)
        write_lifting_csv(lifting_theta, directory / "lifting_theta.csv")
        if "vtk" in run_config.output.formats:
            for number, time in enumerate(lifting_u.times):
                write_vtk(
                    directory / f"lifting_{number:05d}.vtk",
                    mesh,
                    point_vectors={"lifting_displacement": lifting_u.at(time)},
                    point_scalars={"lifting_temperature": lifting_theta.at(time)},
                    title=f"lifting t = {format_float(time)}",
                )
    return lifting_u, lifting_theta
