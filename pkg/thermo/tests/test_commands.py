import copy
import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from ..cli import cli_dispatch
from ..exceptions import NonConvergence
from ..integrator import run_simulation
from ..output import read_csv

CONFIG_DIR = Path(settings.BASE_DIR) / "configs"

SMALL_RUN = {
    "material": {
        "mu": 1.0,
        "lambda": 1.0,
        "r_exp": 2.0,
        "trunc_k": 8.0,
        "thermal_stress": {"kind": "default", "B": 0.2, "B_tilde": 0.2},
        "yield": {"kind": "constant", "d": 0.05},
    },
    "mesh": {"extent": [1.0, 1.0, 1.0], "resolution": [1, 1, 1]},
    "data": {"g_D": ["0.2*t*x2", "0", "0"], "theta0": "0.1*x1"},
    "solver": {"dt": 0.1, "t_end": 0.2},
}


def forced_failure_at(k):
    def run(config, model, *args, **kwargs):
        if model.trunc_k == k:
            raise NonConvergence("forced failure")
        return run_simulation(config, model, *args, **kwargs)
    return run


class CommandTestCase(SimpleTestCase):

    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.directory = Path(directory.name)

    def write_config(self, raw=None, name="run.json"):
        path = self.directory / name
        path.write_text(json.dumps(SMALL_RUN if raw is None else raw))
        return str(path)

    def call(self, *args):
        stdout = StringIO()
        call_command(*args, stdout=stdout)
        return stdout.getvalue()


class ValidateMaterialCommandTests(CommandTestCase):

    def test_admissible_material(self):
        output = self.call("validate_material", self.write_config())
        self.assertIn("f_growth_positive: pass", output)
        self.assertIn("material model is admissible", output)

    def test_inadmissible_material_is_a_config_error(self):
        raw = copy.deepcopy(SMALL_RUN)
        raw["material"]["thermal_stress"] = {"kind": "expression", "expression": "theta^2"}
        with self.assertRaises(CommandError) as caught:
            self.call("validate_material", self.write_config(raw))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("f_growth_positive", str(caught.exception))


class RunCommandTests(CommandTestCase):

    def test_run_writes_result_files(self):
        output_dir = self.directory / "out"
        output = self.call("run", self.write_config(), "--output-dir", str(output_dir))
        self.assertIn("2 steps", output)
        for name in ("snapshot_00000.vtk", "snapshot_00002.vtk", "ledger.csv", "bounds.csv", "summary.txt", "run.log"):
            self.assertTrue((output_dir / name).exists(), name)
        _, rows = read_csv(output_dir / "ledger.csv")
        self.assertEqual(len(rows), 2)
        self.assertIn("shear modulus mu", (output_dir / "run.log").read_text())

    def test_snapshot_stride_flag(self):
        output_dir = self.directory / "out"
        self.call("run", self.write_config(), "--output-dir", str(output_dir), "--snapshot-stride", "2")
        self.assertEqual(sorted(path.name for path in output_dir.glob("*.vtk")),
                         ["snapshot_00000.vtk", "snapshot_00001.vtk"])

    def test_exit_status_of_a_missing_config(self):
        self.assertEqual(cli_dispatch(["manage.py", "run", "/nonexistent/run.json"]), 2)

    def test_exit_status_of_an_invalid_value(self):
        raw = copy.deepcopy(SMALL_RUN)
        raw["material"]["r_exp"] = 1.0
        self.assertEqual(cli_dispatch(["manage.py", "run", self.write_config(raw)]), 2)

    def test_exit_status_of_a_solver_failure(self):
        raw = copy.deepcopy(SMALL_RUN)
        raw["solver"].update(newton_max_iter=1, newton_tol=1e-14)
        raw["material"].update(r_exp=3.0, trunc_k="inf")
        raw["data"]["g_D"] = ["2*t*x2", "0", "0"]
        path = self.write_config(raw)
        self.assertEqual(cli_dispatch(["manage.py", "run", path, "--output-dir", str(self.directory / "out")]), 1)


class StudyCommandTests(CommandTestCase):

    def test_k_study_with_a_failed_member(self):
        output_dir = self.directory / "study"
        argv = ["manage.py", "study-k", self.write_config(), "--k-list", "2", "4", "8", "16",
                "--output-dir", str(output_dir), "--workers", "2"]
        with mock.patch("thermo.studies.run_simulation", side_effect=forced_failure_at(4.0)):
            self.assertEqual(cli_dispatch(argv), 1)
        _, cauchy = read_csv(output_dir / "cauchy.csv")
        self.assertEqual([row[:2] for row in cauchy], [[2.0, 8.0], [8.0, 16.0]])
        _, bounds = read_csv(output_dir / "k_bounds.csv")
        self.assertEqual([row[1] for row in bounds], ["ok", "failed", "ok", "ok"])
        self.assertFalse((output_dir / "ledger_k4.csv").exists())
        self.assertTrue((output_dir / "ledger_k16.csv").exists())
        self.assertIn("failed_k: 4", (output_dir / "summary.txt").read_text())

    def test_k_study_needs_three_levels(self):
        with self.assertRaises(CommandError) as caught:
            self.call("study_k", self.write_config(), "--k-list", "2", "4",
                      "--output-dir", str(self.directory / "study"))
        self.assertEqual(caught.exception.returncode, 2)

    def test_mesh_study(self):
        output_dir = self.directory / "mesh"
        self.call("study_mesh", self.write_config(), "--levels", "2", "--output-dir", str(output_dir))
        header, rows = read_csv(output_dir / "mesh_study.csv")
        self.assertEqual(header[0], "level")
        self.assertEqual([row[5] for row in rows], ["ok", "ok"])
        self.assertGreater(rows[1][-1], 0.0)


class PathCommandTests(CommandTestCase):

    def test_material_point(self):
        output_dir = self.directory / "point"
        output = self.call("material_point", str(CONFIG_DIR / "material_point.json"), "--output-dir", str(output_dir))
        self.assertIn("200 steps", output)
        header, rows = read_csv(output_dir / "material_point.csv")
        self.assertEqual(header[:2], ["time", "temperature"])
        self.assertEqual(len(rows), 201)

    def test_material_point_needs_its_section(self):
        with self.assertRaises(CommandError) as caught:
            self.call("material_point", self.write_config(), "--output-dir", str(self.directory / "point"))
        self.assertEqual(caught.exception.returncode, 2)

    def test_lifting(self):
        output_dir = self.directory / "lifting"
        self.call("lifting", str(CONFIG_DIR / "lifting.json"), "--output-dir", str(output_dir))
        header, rows = read_csv(output_dir / "lifting_u.csv")
        self.assertEqual(header[:3], ["time", "node", "value_x"])
        self.assertEqual(len(rows), 11 * 45)
        self.assertTrue((output_dir / "lifting_theta.csv").exists())
        self.assertTrue((output_dir / "lifting_00010.vtk").exists())

    def test_lifting_with_shortened_last_step(self):
        raw = json.loads((CONFIG_DIR / "lifting.json").read_text())
        raw["solver"] = {"dt": 0.1, "t_end": 0.25}
        output_dir = self.directory / "short"
        self.call("lifting", self.write_config(raw), "--output-dir", str(output_dir))
        for name in ("lifting_u.csv", "lifting_theta.csv"):
            _, rows = read_csv(output_dir / name)
            self.assertEqual(sorted({row[0] for row in rows}), [0.0, 0.1, 0.25])
        self.assertTrue((output_dir / "lifting_00002.vtk").exists())
        self.assertFalse((output_dir / "lifting_00003.vtk").exists())
