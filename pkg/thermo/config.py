"""
Run configuration: JSON files validated section by section with the forms in
thermo.forms, mapped onto the solver's frozen types, and serialized back.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .constitutive import MaterialModel, ThermalStressSpec, YieldSpec
from .exceptions import ConfigError, IoError, ParameterError
from .expressions import ExpressionField
from .fem import FESpace, GivenData
from .forms import (
    DataForm,
    MaterialForm,
    MaterialPointForm,
    MeshForm,
    OutputForm,
    SolverForm,
    ThermalStressForm,
    YieldForm,
)
from .integrator import SolverConfig
from .manufactured import exact_solution
from .mesh import build_box_mesh, read_mesh
from .tensors import ElasticModuli
from .utils import format_level, get_material_default, get_thermo_setting

logger = logging.getLogger(__name__)

SECTIONS = ("material", "mesh", "data", "solver", "output", "material_point")
REQUIRED_SECTIONS = ("material", "mesh", "solver")
MATERIAL_SUBSECTIONS = {"thermal_stress": ThermalStressForm, "yield": YieldForm}
DATA_KEYS = ("body_force", "g_D", "g_theta", "heat_source", "u0", "T0", "theta0", "exact")


@dataclass(frozen=True)
class MeshSettings:
    extent: Optional[tuple] = None
    resolution: Optional[tuple] = None
    origin: tuple = (0.0, 0.0, 0.0)
    file: Optional[str] = None
    dirichlet_tags: Optional[tuple] = None
    neumann_tags: Optional[tuple] = None

    @property
    def is_box(self):
        return self.file is None


@dataclass(frozen=True)
class DataSettings:
    """Raw data entries as written in the configuration; None means zero."""

    body_force: Any = None
    g_D: Any = None
    g_theta: Any = None
    heat_source: Any = None
    u0: Any = None
    T0: Any = None
    theta0: Any = None
    exact: Any = None


@dataclass(frozen=True)
class OutputSettings:
    directory: Optional[str] = None
    formats: tuple = ("vtk", "csv")

    def resolve_directory(self, override=None, name="run"):
        if override:
            return Path(override)
        if self.directory:
            return Path(self.directory)
        return Path(get_thermo_setting("OUTPUT_ROOT")) / name


@dataclass(frozen=True)
class MaterialPointSettings:
    dt: float
    times: tuple
    strains: tuple
    temperatures: tuple
    initial_stress: Optional[tuple] = None


@dataclass(frozen=True)
class RunConfig:
    material: MaterialModel
    mesh: MeshSettings
    solver: SolverConfig
    data: DataSettings = field(default_factory=DataSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    material_point: Optional[MaterialPointSettings] = None


def _check_keys(section, values, allowed):
    if not isinstance(values, dict):
        raise ConfigError("section must be a mapping", key=section)
    for key in values:
        if key not in allowed:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", key=f"{section}.{key}")


def _validated(form_class, section, values):
    form = form_class(data=values)
    allowed = set(form.fields)
    _check_keys(section, values, allowed)
    if not form.is_valid():
        field_name, messages = next(iter(form.errors.items()))
        key = section if field_name == "__all__" else f"{section}.{field_name}"
        raise ConfigError(messages[0], key=key)
    return form.cleaned_data


def _or_default(value, name):
    return get_material_default(name) if value is None else value


def _material(values):
    _check_keys("material", values, set(MaterialForm().fields) | set(MATERIAL_SUBSECTIONS))
    nested = {name: values.get(name, {}) for name in MATERIAL_SUBSECTIONS}
    flat = {key: value for key, value in values.items() if key not in MATERIAL_SUBSECTIONS}
    cleaned = _validated(MaterialForm, "material", flat)
    thermal = _validated(ThermalStressForm, "material.thermal_stress", nested["thermal_stress"])
    yield_values = _validated(YieldForm, "material.yield", nested["yield"])
    try:
        return MaterialModel(
            moduli=ElasticModuli(mu=cleaned["mu"], lam=cleaned["lambda"]),
            r_exp=cleaned["r_exp"],
            trunc_k=cleaned["trunc_k"],
            f_spec=ThermalStressSpec(
                kind=thermal["kind"],
                a=_or_default(thermal["a"], "a"),
                B=_or_default(thermal["B"], "B"),
                B_tilde=thermal["B_tilde"],
                alpha=thermal["alpha"],
                expression=thermal["expression"],
            ),
            beta_spec=YieldSpec(
                kind=yield_values["kind"],
                d=yield_values["d"],
                d_tilde=yield_values["d_tilde"],
                smoothing=yield_values["smoothing"],
                expression=yield_values["expression"],
            ),
        )
    except ParameterError as e:
        raise ConfigError(str(e), key="material") from e


def _solver(values, snapshot_stride):
    cleaned = _validated(SolverForm, "solver", values)
    options = {name: value for name, value in cleaned.items() if value not in (None, "")}
    try:
        return SolverConfig(snapshot_stride=snapshot_stride, **options)
    except ParameterError as e:
        raise ConfigError(str(e), key="solver") from e


def parse_config_dict(raw):
    """Validate a configuration mapping and build a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object", key="<root>")
    _check_keys("<root>", raw, set(SECTIONS))
    for section in REQUIRED_SECTIONS:
        if section not in raw:
            raise ConfigError("required section is missing", key=section)

    material = _material(raw["material"])
    mesh_values = _validated(MeshForm, "mesh", raw["mesh"])
    mesh = MeshSettings(
        extent=mesh_values["extent"],
        resolution=mesh_values["resolution"],
        origin=mesh_values["origin"],
        file=mesh_values["file"] or None,
        dirichlet_tags=mesh_values["dirichlet_tags"],
        neumann_tags=mesh_values["neumann_tags"],
    )
    data_values = _validated(DataForm, "data", raw.get("data", {}))
    data = DataSettings(**{key: data_values.get(key) for key in DATA_KEYS})
    output_values = _validated(OutputForm, "output", raw.get("output", {}))
    output = OutputSettings(directory=output_values["directory"] or None, formats=output_values["formats"])
    solver = _solver(raw["solver"], output_values["snapshot_stride"] or 1)

    material_point = None
    if "material_point" in raw:
        point = _validated(MaterialPointForm, "material_point", raw["material_point"])
        material_point = MaterialPointSettings(
            dt=point["dt"],
            times=tuple(point["times"]),
            strains=tuple(tuple(row) for row in point["strains"]),
            temperatures=tuple(point["temperatures"]),
            initial_stress=point["initial_stress"],
        )
    return RunConfig(material=material, mesh=mesh, solver=solver, data=data, output=output,
                     material_point=material_point)


def parse_config(path, echo=True):
    """
    Read and validate a JSON run configuration.

    Raises:
        ConfigError: unreadable file, invalid JSON, unknown key or invalid value
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read configuration: {e.strerror or e}", key=str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}", key=str(path)) from e
    run_config = parse_config_dict(raw)
    logger.info(f"Loaded configuration {path}")
    if echo:
        echo_parameters(run_config)
    return run_config


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(entry) for entry in value]
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def serialize_config(run_config):
    """Mapping that parse_config_dict turns back into an equal RunConfig."""
    model = run_config.material
    material = {
        "mu": model.moduli.mu,
        "lambda": model.moduli.lam,
        "r_exp": model.r_exp,
        "trunc_k": _plain(model.trunc_k),
        "thermal_stress": asdict(model.f_spec),
        "yield": asdict(model.beta_spec),
    }
    solver = {
        name: _plain(value) for name, value in asdict(run_config.solver).items()
        if name != "snapshot_stride" and value is not None
    }
    mesh = {name: _plain(value) for name, value in asdict(run_config.mesh).items() if value is not None}
    data = {name: value for name, value in asdict(run_config.data).items() if value is not None}
    output = {
        "snapshot_stride": run_config.solver.snapshot_stride,
        "formats": list(run_config.output.formats),
    }
    if run_config.output.directory:
        output["directory"] = run_config.output.directory
    raw = {"material": material, "mesh": mesh, "data": data, "solver": solver, "output": output}
    if run_config.material_point is not None:
        raw["material_point"] = {
            name: _plain(value) for name, value in asdict(run_config.material_point).items() if value is not None
        }
    return raw


def write_config(run_config, path):
    try:
        Path(path).write_text(json.dumps(serialize_config(run_config), indent=2) + "\n")
    except OSError as e:
        raise IoError(f"cannot write configuration {path}: {e}") from e


def echo_parameters(run_config, log=None):
    """Log every physical parameter with its unit."""
    log = logger if log is None else log
    model, solver = run_config.material, run_config.solver
    f_spec, beta_spec = model.f_spec, model.beta_spec
    lines = [
        f"shear modulus mu = {model.moduli.mu:.6g} Pa",
        f"Lame parameter lambda = {model.moduli.lam:.6g} Pa",
        f"Norton-Hoff exponent r = {model.r_exp:.6g} (-)",
        f"truncation level k = {format_level(model.trunc_k)} K",
        f"thermal stress f: kind {f_spec.kind}, a = {f_spec.a:.6g} Pa, B = {f_spec.B:.6g} Pa, "
        f"B_tilde = {f_spec.B_tilde:.6g} Pa, alpha = {f_spec.alpha:.6g} (-)",
        f"yield radius beta: kind {beta_spec.kind}, d = {beta_spec.d:.6g} Pa, "
        f"d_tilde = {beta_spec.d_tilde:.6g} Pa/K, smoothing = {beta_spec.smoothing:.6g} K",
        f"time step dt = {solver.dt:.6g} s, final time t_end = {solver.t_end:.6g} s",
    ]
    if run_config.mesh.is_box:
        lines.append(
            f"box extent = {list(run_config.mesh.extent)} m, resolution = {list(run_config.mesh.resolution)}"
        )
    else:
        lines.append(f"mesh file = {run_config.mesh.file}")
    for line in lines:
        log.info(line)


def _field(value, components, name):
    if value is None:
        return ExpressionField.zeros(components, name=name)
    if isinstance(value, dict):
        return np.asarray(value["table"], dtype=float)
    return ExpressionField(value, name=name)


def build_mesh(run_config):
    settings = run_config.mesh
    if settings.is_box:
        return build_box_mesh(settings.extent, settings.resolution, origin=settings.origin)
    return read_mesh(settings.file)


def build_problem(run_config, mesh=None):
    """
    Mesh, FE space, material and GivenData for a configuration.

    Returns:
        (mesh, space, model, data, exact) where exact is None without data.exact
    """
    mesh = build_mesh(run_config) if mesh is None else mesh
    settings = run_config.mesh
    try:
        space = FESpace(mesh, dirichlet_tags=settings.dirichlet_tags, neumann_tags=settings.neumann_tags)
    except ParameterError as e:
        raise ConfigError(str(e), key="mesh") from e
    raw = run_config.data
    data = GivenData(
        body_force=_field(raw.body_force, 3, "F"),
        g_D=_field(raw.g_D, 3, "g_D"),
        g_theta=_field(raw.g_theta, None, "g_theta"),
        heat_source=_field(raw.heat_source, None, "heat_source"),
        u0=_field(raw.u0, 3, "u0"),
        T0=_field(raw.T0, 6, "T0"),
        theta0=_field(raw.theta0, None, "theta0"),
    )
    exact = None
    if raw.exact is not None:
        exact = exact_solution(run_config.material, raw.exact["u"], raw.exact["theta"])
    return mesh, space, run_config.material, data, exact
