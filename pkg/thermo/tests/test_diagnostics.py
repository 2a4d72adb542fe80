import math
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from ..config import build_problem, parse_config
from ..diagnostics import BoundReport, EnergyLedger, apriori_bounds, energy_audit
from ..exceptions import ParameterError
from ..fem import GivenData, initial_state
from ..integrator import run_simulation
from .factories import box, data, elastic_model, plastic_model, solver

CONFIG_DIR = Path(settings.BASE_DIR) / "configs"


class EnergyLedgerTests(SimpleTestCase):

    def test_field_names_start_with_time(self):
        names = EnergyLedger.field_names()
        self.assertEqual(names[0], "time")
        self.assertIn("balance_residual", names)
        self.assertTrue(set(EnergyLedger.ENERGY_TERMS) <= set(names))

    def test_relative_balance(self):
        ledger = EnergyLedger(elastic_energy=3.0, heat_input=-9.0, balance_residual=1e-9)
        self.assertEqual(ledger.largest_term(), 9.0)
        self.assertAlmostEqual(ledger.relative_balance(), 1e-10)
        self.assertTrue(ledger.is_balanced(1e-8))
        self.assertFalse(ledger.is_balanced(1e-12))


class EnergyAuditTests(SimpleTestCase):

    def test_zero_data_gives_zero_ledger(self):
        mesh, space = box(resolution=(1, 1, 1))
        trajectory = run_simulation(solver(dt=0.1, t_end=0.1), plastic_model(), GivenData(), mesh, space=space)
        ledger = trajectory.ledgers[-1]
        for name, value in ledger.as_dict().items():
            if name != "time":
                self.assertEqual(value, 0.0, name)

    def test_elastic_loading(self):
        mesh, space = box(resolution=(2, 2, 2))
        given = data(g_D=["0.01*t*x1", "-0.003*t*x2", "0"])
        trajectory = run_simulation(solver(dt=0.1, t_end=0.5), elastic_model(), given, mesh, space=space)
        for ledger in trajectory.ledgers[1:]:
            self.assertEqual(ledger.plastic_dissipation, 0.0)
            self.assertEqual(ledger.regularization_dissipation, 0.0)
            self.assertGreater(ledger.viscous_dissipation, 0.0)
            self.assertGreater(ledger.external_power, 0.0)
            self.assertLessEqual(ledger.relative_balance(), 1e-8)

    def test_plastic_loading(self):
        mesh, space = box(resolution=(2, 2, 2))
        given = data(g_D=["0.2*t*x2", "0", "0"], g_theta="0.1", heat_source="0.05")
        model = plastic_model(r_exp=2.0, trunc_k=20.0, d=0.05, B=0.2)
        trajectory = run_simulation(solver(dt=0.1, t_end=0.5), model, given, mesh, space=space)
        ledgers = trajectory.ledgers[1:]
        self.assertGreater(ledgers[-1].plastic_dissipation, 0.0)
        for ledger in ledgers:
            self.assertGreaterEqual(ledger.plastic_dissipation, 0.0)
            self.assertGreaterEqual(ledger.regularization_dissipation, 0.0)
            self.assertGreaterEqual(ledger.numerical_dissipation, 0.0)
            self.assertGreaterEqual(ledger.thermal_numerical_dissipation, -1e-14)
            self.assertTrue(math.isclose(ledger.thermal_source, ledger.plastic_dissipation, rel_tol=1e-10,
                                         abs_tol=1e-15))
            self.assertLessEqual(ledger.relative_balance(), 1e-8)
            self.assertAlmostEqual(ledger.boundary_heat, 0.1 * 0.1 * 6.0)

    def test_audit_level_below_temperature_range(self):
        mesh, space = box(resolution=(2, 2, 2))
        given = data(g_D=["0.1*t*x2", "0", "0"], theta0="3*x1")
        model = plastic_model(r_exp=2.0, trunc_k=10.0, d=0.05, B=0.2)
        trajectory = run_simulation(solver(dt=0.1, t_end=0.3, audit_level=1.0), model, given, mesh, space=space)
        for ledger in trajectory.ledgers[1:]:
            self.assertLessEqual(ledger.relative_balance(), 1e-8)

    def test_audit_of_identical_states(self):
        _, space = box(resolution=(1, 1, 1))
        model = elastic_model()
        state = initial_state(space, model, data(theta0="0.3"))
        next_state = state.copy()
        next_state.time = 0.1
        ledger = energy_audit(state, next_state, model, GivenData(), 0.1, space)
        self.assertEqual(ledger.viscous_dissipation, 0.0)
        self.assertAlmostEqual(ledger.thermal_functional, 0.5 * 0.09)
        self.assertAlmostEqual(ledger.balance_residual, 0.0, places=15)


class ShippedConfigAuditTests(SimpleTestCase):

    def test_every_shipped_run_balances(self):
        for name in ("elastic", "thermoelastic", "yielding", "lifting"):
            with self.subTest(config=name):
                run_config = parse_config(CONFIG_DIR / f"{name}.json", echo=False)
                mesh, space, model, given, _ = build_problem(run_config)
                trajectory = run_simulation(run_config.solver, model, given, mesh, space=space)
                tolerance = run_config.solver.resolved_audit_tol()
                for ledger in trajectory.ledgers[1:]:
                    self.assertLessEqual(ledger.relative_balance(), tolerance, f"t = {ledger.time}")


class AprioriBoundTests(SimpleTestCase):

    def setUp(self):
        self.mesh, self.space = box(resolution=(2, 2, 2))

    def test_zero_run_has_zero_bounds(self):
        trajectory = run_simulation(solver(dt=0.1, t_end=0.2), plastic_model(), GivenData(), self.mesh,
                                    space=self.space)
        report = apriori_bounds(trajectory, trajectory.model)
        self.assertEqual(report.q, 1.2)
        for name, value in report.as_dict().items():
            if name != "q":
                self.assertEqual(value, 0.0, name)

    def test_plastic_run_bounds_are_finite_and_positive(self):
        model = plastic_model(r_exp=2.0, trunc_k=10.0, d=0.05, B=0.2)
        given = data(g_D=["0.2*t*x2", "0", "0"], theta0="0.1*x1")
        trajectory = run_simulation(solver(dt=0.1, t_end=0.3), model, given, self.mesh, space=self.space)
        report = apriori_bounds(trajectory, model, q=1.1)
        self.assertTrue(report.is_finite())
        for name in ("sup_stress_l2", "sup_scaled_deviator", "strain_rate_l2_sq", "sup_theta_l1",
                     "flow_term_norm", "regularization_term_norm", "stress_rate_norm", "energy_bound"):
            self.assertGreater(getattr(report, name), 0.0, name)
        self.assertEqual(BoundReport.field_names()[0], "q")

    def test_q_outside_range(self):
        trajectory = run_simulation(solver(dt=0.1, t_end=0.1), elastic_model(), GivenData(), self.mesh,
                                    space=self.space)
        for q in (1.0, 1.25, 2.0):
            with self.assertRaises(ParameterError):
                apriori_bounds(trajectory, trajectory.model, q=q)

    def test_untruncated_model_has_no_regularization_term(self):
        given = data(g_D=["0.05*t*x2", "0", "0"])
        trajectory = run_simulation(solver(dt=0.1, t_end=0.2), elastic_model(), given, self.mesh, space=self.space)
        report = apriori_bounds(trajectory, trajectory.model)
        self.assertEqual(report.regularization_term_norm, 0.0)
        self.assertEqual(report.sup_scaled_deviator, 0.0)
        np.testing.assert_allclose(report.strain_rate_l2_sq, 0.2 * 0.5 * 0.05 ** 2, rtol=1e-8)
