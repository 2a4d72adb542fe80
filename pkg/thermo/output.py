"""
Result files: legacy VTK ASCII snapshots, CSV tables and the plain-text summary.
Every float is written with FLOAT_FORMAT (17 significant digits by default),
so re-reading a file reproduces the values exactly.
"""
import csv
import logging
from pathlib import Path

import numpy as np

from .constitutive import yield_excess
from .diagnostics import BoundReport, EnergyLedger, apriori_bounds
from .exceptions import IoError, ParameterError
from .fem import lifting_temperature
from .tensors import COMPONENT_NAMES, deviator, frobenius_norm
from .utils import format_float, format_level

logger = logging.getLogger(__name__)

VTK_HEXAHEDRON = 12


def ensure_directory(directory):
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create output directory {directory}: {e}") from e
    return directory


def _format_row(values):
    return [value if isinstance(value, str) else format_float(value) for value in values]


def write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(_format_row(row))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return Path(path)


def read_csv(path):
    """Header and rows of a CSV written by write_csv; numeric cells become floats."""
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = []
            for row in reader:
                parsed = []
                for cell in row:
                    try:
                        parsed.append(float(cell))
                    except ValueError:
                        parsed.append(cell)
                rows.append(parsed)
    except (OSError, StopIteration) as e:
        raise IoError(f"cannot read {path}: {e}") from e
    return header, rows


def write_ledger_csv(ledgers, path):
    names = EnergyLedger.field_names()
    return write_csv(path, names, ([getattr(ledger, name) for name in names] for ledger in ledgers))


def write_bounds_csv(reports, path, levels=None):
    """One row per BoundReport; with levels, a leading k column and 'failed' rows for missing reports."""
    names = BoundReport.field_names()
    if levels is None:
        return write_csv(path, names, ([getattr(report, name) for name in names] for report in reports))
    rows = []
    for k, report in zip(levels, reports):
        if report is None:
            rows.append([format_level(k), "failed"] + [""] * len(names))
        else:
            rows.append([format_level(k), "ok"] + [getattr(report, name) for name in names])
    return write_csv(path, ["k", "status"] + list(names), rows)


def write_cauchy_csv(rows, path):
    header = ["k_coarse", "k_fine", "theta_l1", "stress_l2", "displacement_l2"]
    return write_csv(path, header, (
        [format_level(row.k_coarse), format_level(row.k_fine), row.theta_l1, row.stress_l2, row.displacement_l2]
        for row in rows
    ))


def write_material_point_csv(history, path):
    header = ["time", "temperature"] + [f"T_{name}" for name in COMPONENT_NAMES] + ["dev_norm"]
    return write_csv(path, header, (
        [state.time, state.temperature] + list(state.stress.components) + [state.stress.deviator().norm()]
        for state in history
    ))


def write_lifting_csv(field, path, components=1):
    """Nodal lifting values, one row per (time, node)."""
    if components == 1:
        header = ["time", "node", "value", "rate"]
    else:
        axes = "xyz"
        header = ["time", "node"] + [f"value_{a}" for a in axes] + [f"rate_{a}" for a in axes]
    rates = field.rates if field.rates is not None else np.zeros_like(field.values)

    def rows():
        for time, values, rate in zip(field.times, field.values, rates):
            values = values.reshape(-1, components)
            rate = rate.reshape(-1, components)
            for node in range(values.shape[0]):
                yield [time, str(node)] + list(values[node]) + list(rate[node])

    return write_csv(path, header, rows())


def write_mesh_study_csv(levels, path):
    header = ["level", "nx", "ny", "nz", "h", "status", "displacement_l2", "temperature_l2", "stress_l2",
              "rate_displacement", "rate_temperature", "rate_stress", "difference_u", "difference_theta"]
    rows = []
    for entry in levels:
        row = [str(entry.level)] + [str(n) for n in entry.resolution] + [entry.h]
        row.append("failed" if entry.error else "ok")
        errors = entry.errors
        row += [errors.displacement_l2, errors.temperature_l2, errors.stress_l2] if errors else ["", "", ""]
        rates = entry.rates
        row += [rates["displacement"], rates["temperature"], rates["stress"]] if rates else ["", "", ""]
        row += list(entry.difference) if entry.difference else ["", ""]
        rows.append(row)
    return write_csv(path, header, rows)


def physical_fields(space, data, state):
    """Displacement and temperature including the lifting fields."""
    u = state.u if data.lifting_u is None else state.u + data.lifting_u.at(state.time)
    theta = state.theta if data.lifting_theta is None else state.theta + data.lifting_theta.at(state.time)
    return u, theta


def cell_fields(space, model, data, state):
    """Quadrature averages per cell: stress components, |dev T| and the yield excess."""
    weights = space.weights
    volumes = weights.sum(axis=1)

    def average(values):
        return np.einsum("cq,cq...->c...", weights, values) / volumes.reshape((-1,) + (1,) * (values.ndim - 2))

    if state.frozen_theta is not None:
        theta_qp = state.frozen_theta
    else:
        theta_qp = space.interpolate(state.theta) + lifting_temperature(space, data, state.time)
    return {
        "stress": average(state.stress),
        "von_mises": average(frobenius_norm(deviator(state.stress))),
        "yield_excess": average(yield_excess(model, state.stress, theta_qp)),
    }


def write_vtk(path, mesh, point_scalars=None, point_vectors=None, cell_scalars=None, title="thermovisco"):
    """Legacy VTK ASCII unstructured grid of hexahedra."""
    point_scalars = point_scalars or {}
    point_vectors = point_vectors or {}
    cell_scalars = cell_scalars or {}
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines.extend(" ".join(format_float(x) for x in vertex) for vertex in mesh.vertices)
    lines.append(f"CELLS {mesh.n_cells} {9 * mesh.n_cells}")
    lines.extend("8 " + " ".join(str(int(node)) for node in cell) for cell in mesh.cells)
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend([str(VTK_HEXAHEDRON)] * mesh.n_cells)
    if point_scalars or point_vectors:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, values in point_vectors.items():
            lines.append(f"VECTORS {name} double")
            lines.extend(" ".join(format_float(x) for x in row) for row in np.asarray(values).reshape(-1, 3))
        for name, values in point_scalars.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines.extend(format_float(x) for x in np.asarray(values).reshape(-1))
    if cell_scalars:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, values in cell_scalars.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines.extend(format_float(x) for x in np.asarray(values).reshape(-1))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return Path(path)


def write_snapshot(path, space, model, data, state):
    u, theta = physical_fields(space, data, state)
    cells = cell_fields(space, model, data, state)
    cell_scalars = {f"T_{name}": cells["stress"][:, i] for i, name in enumerate(COMPONENT_NAMES)}
    cell_scalars.update(von_mises=cells["von_mises"], yield_excess=cells["yield_excess"])
    return write_vtk(
        path,
        space.mesh,
        point_scalars={"temperature": theta},
        point_vectors={"displacement": u},
        cell_scalars=cell_scalars,
        title=f"thermovisco t = {format_float(state.time)}",
    )


def read_vtk_point_data(path):
    """
    Point and cell arrays of a legacy VTK ASCII file written by write_vtk.

    Returns:
        dict with 'points' plus one entry per named array; vectors have shape (n, 3)
    """
    try:
        tokens = Path(path).read_text().split("\n")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    arrays = {}
    index = 0
    count = {"POINT_DATA": 0, "CELL_DATA": 0}
    section = None
    try:
        while index < len(tokens):
            words = tokens[index].split()
            index += 1
            if not words:
                continue
            keyword = words[0]
            if keyword == "POINTS":
                n = int(words[1])
                arrays["points"] = np.array([[float(x) for x in tokens[index + i].split()] for i in range(n)])
                index += n
            elif keyword in count:
                section = keyword
                count[keyword] = int(words[1])
            elif keyword == "VECTORS":
                n = count[section]
                arrays[words[1]] = np.array([[float(x) for x in tokens[index + i].split()] for i in range(n)])
                index += n
            elif keyword == "SCALARS":
                n = count[section]
                index += 1
                arrays[words[1]] = np.array([float(tokens[index + i]) for i in range(n)])
                index += n
    except (ValueError, IndexError, KeyError) as e:
        raise IoError(f"malformed VTK file {path}: {e}") from e
    if "points" not in arrays:
        raise IoError(f"malformed VTK file {path}: no POINTS section")
    return arrays


def summary_lines(trajectory, bounds, header=None):
    ledgers = trajectory.ledgers
    final = ledgers[-1]
    worst = max(ledgers, key=lambda ledger: ledger.relative_balance())
    model = trajectory.model
    lines = list(header or [])
    lines += [
        f"steps: {len(ledgers) - 1}",
        f"final_time: {format_float(final.time)}",
        f"truncation_level: {format_level(model.trunc_k)}",
        f"final_elastic_energy: {format_float(final.elastic_energy)}",
        f"total_plastic_dissipation: {format_float(sum(ledger.plastic_dissipation for ledger in ledgers))}",
        f"total_viscous_dissipation: {format_float(sum(ledger.viscous_dissipation for ledger in ledgers))}",
        f"worst_relative_balance: {format_float(worst.relative_balance())} at t = {format_float(worst.time)}",
        f"audit_tolerance: {format_float(trajectory.config.resolved_audit_tol())}",
    ]
    lines += [f"bound.{name}: {format_float(value)}" for name, value in bounds.as_dict().items()]
    return lines


def write_summary(path, lines):
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return Path(path)


def write_run_files(trajectory, bounds, directory, formats=("vtk", "csv")):
    """
    Snapshots, ledger, bounds and summary of one run.

    Returns:
        list of written paths
    """
    directory = ensure_directory(directory)
    written = []
    if "vtk" in formats:
        for number, (time, state) in enumerate(trajectory.snapshots):
            path = directory / f"snapshot_{number:05d}.vtk"
            written.append(write_snapshot(path, trajectory.space, trajectory.model, trajectory.data, state))
        logger.info(f"Wrote {len(trajectory.snapshots)} VTK snapshots to {directory}")
    if "csv" in formats:
        written.append(write_ledger_csv(trajectory.ledgers[1:], directory / "ledger.csv"))
        written.append(write_bounds_csv([bounds], directory / "bounds.csv"))
    written.append(write_summary(directory / "summary.txt", summary_lines(trajectory, bounds)))
    return written


def write_outputs(trajectory, mesh, run_config, bounds=None, directory=None):
    """
    Result files of a run in the formats and directory of its configuration.
    Bounds are computed from the trajectory unless given.
    """
    if mesh is not trajectory.space.mesh and not np.array_equal(mesh.vertices, trajectory.space.mesh.vertices):
        raise ParameterError("trajectory was not computed on this mesh")
    if bounds is None:
        bounds = apriori_bounds(trajectory, trajectory.model)
    directory = run_config.output.resolve_directory(directory)
    return write_run_files(trajectory, bounds, directory, formats=run_config.output.formats)

