import copy
import json
import math
import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase

from ..config import build_problem, echo_parameters, parse_config, parse_config_dict, serialize_config, write_config
from ..constitutive import validate_material
from ..exceptions import ConfigError

CONFIG_DIR = Path(settings.BASE_DIR) / "configs"

MINIMAL = {
    "material": {"mu": 1.0, "lambda": 1.0, "r_exp": 2.0},
    "mesh": {"extent": [1.0, 1.0, 1.0], "resolution": [1, 1, 1]},
    "solver": {"dt": 0.1, "t_end": 0.5},
}


def with_entry(section, key, value):
    raw = copy.deepcopy(MINIMAL)
    raw.setdefault(section, {})[key] = value
    return raw


class ShippedConfigTests(SimpleTestCase):

    def test_shipped_configs_parse_and_build(self):
        for path in sorted(CONFIG_DIR.glob("*.json")):
            with self.subTest(config=path.name):
                run_config = parse_config(path, echo=False)
                mesh, space, model, data, exact = build_problem(run_config)
                self.assertIs(model, run_config.material)
                self.assertEqual(space.n_nodes, mesh.n_vertices)
                self.assertIsNone(exact)

    def test_shipped_materials_are_admissible(self):
        for path in sorted(CONFIG_DIR.glob("*.json")):
            with self.subTest(config=path.name):
                report = validate_material(parse_config(path, echo=False).material)
                self.assertTrue(report.passed, report.lines())

    def test_material_point_section(self):
        run_config = parse_config(CONFIG_DIR / "material_point.json", echo=False)
        point = run_config.material_point
        self.assertEqual(point.times, (0.0, 1.0, 2.0))
        self.assertEqual(point.strains[1][5], 0.2)
        self.assertEqual(run_config.output.formats, ("csv",))


class DefaultsTests(SimpleTestCase):

    def test_missing_entries_take_settings_defaults(self):
        run_config = parse_config_dict(MINIMAL)
        defaults = settings.THERMO["MATERIAL_DEFAULTS"]
        model = run_config.material
        self.assertTrue(math.isinf(model.trunc_k))
        self.assertEqual(model.f_spec.kind, "default")
        self.assertEqual(model.f_spec.alpha, defaults["alpha"])
        self.assertEqual(model.beta_spec.kind, defaults["beta_kind"])
        self.assertAlmostEqual(model.beta_spec.smoothing, defaults["smoothing_fraction"] * defaults["d"])
        self.assertEqual(run_config.solver.newton_tol, settings.THERMO["NEWTON_TOL"])
        self.assertEqual(run_config.solver.snapshot_stride, 1)
        self.assertEqual(run_config.output.formats, ("vtk", "csv"))


class InvalidConfigTests(SimpleTestCase):

    def assertConfigError(self, raw, key, fragment=None):
        with self.assertRaises(ConfigError) as caught:
            parse_config_dict(raw)
        self.assertEqual(caught.exception.key, key)
        if fragment is not None:
            self.assertIn(fragment, str(caught.exception))

    def test_norton_hoff_exponent_one(self):
        self.assertConfigError(with_entry("material", "r_exp", 1.0), "material.r_exp", "r > 1")

    def test_alpha_outside_growth_range(self):
        raw = with_entry("material", "thermal_stress", {"alpha": 0.9})
        self.assertConfigError(raw, "material.thermal_stress.alpha", "1/2 < alpha < 5/6")

    def test_negative_shear_modulus(self):
        self.assertConfigError(with_entry("material", "mu", -1.0), "material.mu")

    def test_incompatible_moduli(self):
        self.assertConfigError(with_entry("material", "lambda", -1.0), "material.lambda", "3 lambda + 2 mu")

    def test_truncation_level(self):
        self.assertConfigError(with_entry("material", "trunc_k", 0.0), "material.trunc_k")
        run_config = parse_config_dict(with_entry("material", "trunc_k", "inf"))
        self.assertTrue(math.isinf(run_config.material.trunc_k))

    def test_smoothing_wider_than_half_the_yield_bound(self):
        raw = with_entry("material", "yield", {"kind": "smooth_clamp", "d": 0.1, "smoothing": 0.2})
        self.assertConfigError(raw, "material.yield.smoothing")

    def test_expression_kind_needs_expression(self):
        raw = with_entry("material", "thermal_stress", {"kind": "expression"})
        self.assertConfigError(raw, "material.thermal_stress.expression")

    def test_unknown_keys(self):
        self.assertConfigError(with_entry("solver", "cfl", 0.5), "solver.cfl", "unknown key")
        raw = copy.deepcopy(MINIMAL)
        raw["plotting"] = {}
        self.assertConfigError(raw, "<root>.plotting")

    def test_missing_section(self):
        raw = copy.deepcopy(MINIMAL)
        del raw["solver"]
        self.assertConfigError(raw, "solver", "missing")

    def test_root_must_be_a_mapping(self):
        self.assertConfigError([MINIMAL], "<root>")

    def test_time_window(self):
        self.assertConfigError(with_entry("solver", "dt", 0.0), "solver.dt")
        self.assertConfigError(with_entry("solver", "t_end", 0.01), "solver.t_end")
        self.assertConfigError(with_entry("solver", "outer_coupling", "monolithic"), "solver.outer_coupling")

    def test_mesh_needs_box_or_file(self):
        raw = copy.deepcopy(MINIMAL)
        raw["mesh"] = {"extent": [1.0, 1.0, 1.0]}
        self.assertConfigError(raw, "mesh.resolution")
        raw["mesh"] = {"extent": [1.0, 1.0, 1.0], "resolution": [1, 1, 1], "file": "box.mesh"}
        self.assertConfigError(raw, "mesh.file")

    def test_bad_expression(self):
        self.assertConfigError(with_entry("data", "g_D", ["0.1*t*x1", "__import__('os')", "0"]), "data.g_D")
        self.assertConfigError(with_entry("data", "g_theta", "sin(x1"), "data.g_theta")
        self.assertConfigError(with_entry("data", "g_D", ["0", "0"]), "data.g_D")

    def test_tables_only_for_initial_fields(self):
        self.assertConfigError(with_entry("data", "g_theta", {"table": [0.0]}), "data.g_theta")
        run_config = parse_config_dict(with_entry("data", "theta0", {"table": [0.1] * 8}))
        _, _, _, data, _ = build_problem(run_config)
        self.assertEqual(list(data.theta0), [0.1] * 8)

    def test_snapshot_stride(self):
        self.assertConfigError(with_entry("output", "snapshot_stride", 0), "output.snapshot_stride")
        run_config = parse_config_dict(with_entry("output", "snapshot_stride", 3))
        self.assertEqual(run_config.solver.snapshot_stride, 3)


class ConfigFileTests(SimpleTestCase):

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config("/nonexistent/run.json")
        self.assertEqual(caught.exception.key, "/nonexistent/run.json")

    def test_invalid_json(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "broken.json"
            path.write_text('{"material": {')
            with self.assertRaisesRegex(ConfigError, "invalid JSON"):
                parse_config(path)

    def test_serialized_config_parses_to_equal_config(self):
        for name in ("yielding", "lifting", "material_point"):
            with self.subTest(config=name):
                original = parse_config(CONFIG_DIR / f"{name}.json", echo=False)
                with tempfile.TemporaryDirectory() as directory:
                    path = Path(directory) / "echo.json"
                    write_config(original, path)
                    self.assertEqual(parse_config(path, echo=False), original)

    def test_infinite_level_serializes_as_text(self):
        raw = serialize_config(parse_config(CONFIG_DIR / "elastic.json", echo=False))
        self.assertEqual(raw["material"]["trunc_k"], "inf")
        json.dumps(raw)

    def test_parameters_are_echoed_with_units(self):
        run_config = parse_config(CONFIG_DIR / "yielding.json", echo=False)
        with self.assertLogs("thermo.config", level="INFO") as logs:
            echo_parameters(run_config)
        output = "\n".join(logs.output)
        self.assertIn("shear modulus mu = 1 Pa", output)
        self.assertIn("truncation level k = 8 K", output)
        self.assertIn("time step dt = 0.05 s", output)
