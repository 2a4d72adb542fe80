import math

import numpy as np
from django.test import SimpleTestCase

from ..constitutive import (
    MaterialModel,
    MaterialPointState,
    ThermalStressSpec,
    YieldSpec,
    beta_eval,
    dissipation_density,
    drive_material_point,
    f_derivative,
    f_eval,
    flow_jacobian,
    flow_rate,
    integrate_stress,
    material_point_step,
    regularization_rate,
    truncate,
    truncation_primitive,
    validate_material,
    yield_excess,
)
from ..exceptions import NonConvergence, ParameterError
from ..tensors import ElasticModuli, SymTensor3, deviator, double_dot, hooke
from .factories import elastic_model, plastic_model


class TruncationTests(SimpleTestCase):

    def setUp(self):
        self.x = np.linspace(-50.0, 50.0, 1001)

    def test_truncate_is_bounded_by_level_and_argument(self):
        for level in (0.5, 3.0, 20.0):
            values = truncate(level, self.x)
            self.assertTrue(np.all(np.abs(values) <= np.minimum(np.abs(self.x), level)))

    def test_infinite_level_is_identity(self):
        np.testing.assert_array_equal(truncate(math.inf, self.x), self.x)

    def test_scalar_input_returns_float(self):
        self.assertEqual(truncate(2.0, -7.5), -2.0)
        self.assertIsInstance(truncate(2.0, 1.5), float)

    def test_nonpositive_level_is_rejected(self):
        with self.assertRaises(ParameterError):
            truncate(0.0, 1.0)

    def test_primitive_is_convex_and_quadratic_from_below(self):
        for level in (0.5, 3.0, 20.0):
            phi = truncation_primitive(level, self.x)
            self.assertTrue(np.all(np.diff(phi, 2) >= -1e-12))
            lower = 0.5 * np.minimum(self.x ** 2, level * np.abs(self.x))
            self.assertTrue(np.all(phi >= lower - 1e-12))

    def test_primitive_derivative_is_truncation(self):
        level = 2.0
        h = 1e-6
        points = np.array([-5.0, -1.0, 0.3, 1.9, 4.0])
        slope = (truncation_primitive(level, points + h) - truncation_primitive(level, points - h)) / (2 * h)
        np.testing.assert_allclose(slope, truncate(level, points), atol=1e-6)


class ThermalStressTests(SimpleTestCase):

    def test_default_law_values(self):
        model = MaterialModel(f_spec=ThermalStressSpec(B=2.0, B_tilde=3.0, alpha=0.75))
        self.assertAlmostEqual(f_eval(model, 0.0), 0.0)
        self.assertAlmostEqual(f_eval(model, 15.0), 2.0 * (16.0 ** 0.75 - 1.0))
        self.assertAlmostEqual(f_eval(model, -3.0), -3.0 * (2.0 - 1.0))

    def test_derivative_matches_finite_differences(self):
        model = MaterialModel(f_spec=ThermalStressSpec(B=0.5, B_tilde=0.8, alpha=0.6))
        theta = np.array([-4.0, -0.5, 0.5, 2.0, 10.0])
        h = 1e-6
        numeric = (f_eval(model, theta + h) - f_eval(model, theta - h)) / (2 * h)
        np.testing.assert_allclose(f_derivative(model, theta), numeric, rtol=1e-6)

    def test_expression_law(self):
        model = MaterialModel(f_spec=ThermalStressSpec(kind="expression", expression="0.1*theta"))
        self.assertAlmostEqual(f_eval(model, 3.0), 0.3)
        self.assertAlmostEqual(f_derivative(model, 3.0), 0.1)

    def test_alpha_outside_growth_window_is_rejected(self):
        for alpha in (0.5, 0.9):
            with self.assertRaisesRegex(ParameterError, "1/2, 5/6"):
                ThermalStressSpec(alpha=alpha)

    def test_exponent_one_is_rejected(self):
        with self.assertRaisesRegex(ParameterError, "r = 1 is unsupported"):
            MaterialModel(r_exp=1.0)


class YieldTests(SimpleTestCase):

    def test_smooth_clamp_range_and_slope(self):
        model = MaterialModel(beta_spec=YieldSpec(kind="smooth_clamp", d=1.0, smoothing=0.1))
        theta = np.linspace(-3.0, 3.0, 6001)
        value, derivative = beta_eval(model, theta)
        self.assertTrue(np.all(value >= 0.0))
        self.assertTrue(np.all(value <= 1.0))
        self.assertTrue(np.all(np.abs(derivative) <= 1.0 + 1e-12))
        self.assertEqual(beta_eval(model, -2.0), (1.0, 0.0))
        self.assertEqual(beta_eval(model, 2.0), (0.0, 0.0))
        self.assertAlmostEqual(beta_eval(model, 0.5)[0], 0.5)

    def test_smooth_clamp_is_continuous_at_blend_edges(self):
        model = MaterialModel(beta_spec=YieldSpec(kind="smooth_clamp", d=1.0, smoothing=0.1))
        for edge in (-0.1, 0.1, 0.9, 1.1):
            below, _ = beta_eval(model, edge - 1e-9)
            above, _ = beta_eval(model, edge + 1e-9)
            self.assertAlmostEqual(below, above, places=7)

    def test_smoothing_must_fit_the_band(self):
        with self.assertRaises(ParameterError):
            YieldSpec(kind="smooth_clamp", d=1.0, smoothing=0.6)

    def test_yield_excess(self):
        model = plastic_model(d=0.5)
        shear = SymTensor3([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        self.assertAlmostEqual(yield_excess(model, shear, 0.0), math.sqrt(2.0) - 0.5)
        self.assertEqual(yield_excess(model, SymTensor3.identity() * 100.0, 0.0), 0.0)


class FlowRuleTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(42)

    def test_flow_is_monotone(self):
        model = plastic_model(r_exp=2.5, trunc_k=5.0, d=0.3)
        S1 = self.rng.normal(scale=2.0, size=(10_000, 6))
        S2 = self.rng.normal(scale=2.0, size=(10_000, 6))
        theta = self.rng.uniform(-1.0, 1.0, size=10_000)

        def G(S):
            return flow_rate(model, S, theta) + regularization_rate(model, S)

        products = double_dot(G(S1) - G(S2), S1 - S2)
        scale = double_dot(G(S1), G(S1)) + double_dot(G(S2), G(S2)) + 1.0
        self.assertTrue(np.all(products >= -1e-12 * scale))
        self.assertTrue(np.all(products[np.any(deviator(S1) != deviator(S2), axis=-1)] > 0.0))

    def test_untruncated_flow_is_monotone(self):
        model = plastic_model(r_exp=2.5, trunc_k=math.inf, d=0.3)
        S1 = self.rng.normal(scale=2.0, size=(10_000, 6))
        S2 = self.rng.normal(scale=2.0, size=(10_000, 6))
        theta = self.rng.uniform(-1.0, 1.0, size=10_000)
        np.testing.assert_array_equal(regularization_rate(model, S1), 0.0)

        G1, G2 = flow_rate(model, S1, theta), flow_rate(model, S2, theta)
        products = double_dot(G1 - G2, S1 - S2)
        scale = double_dot(G1, G1) + double_dot(G2, G2) + 1.0
        self.assertTrue(np.all(products >= -1e-12 * scale))
        yielding = (yield_excess(model, S1, theta) > 0.0) | (yield_excess(model, S2, theta) > 0.0)
        self.assertTrue(yielding.any())
        self.assertTrue(np.all(products[yielding & np.any(deviator(S1) != deviator(S2), axis=-1)] > 0.0))

    def test_dissipation_is_nonnegative_and_matches_flow_power(self):
        model = plastic_model(r_exp=3.0, trunc_k=4.0, d=0.2)
        S = self.rng.normal(size=(1000, 6))
        theta = np.zeros(1000)
        density = dissipation_density(model, S, theta)
        self.assertTrue(np.all(density >= 0.0))
        np.testing.assert_allclose(double_dot(flow_rate(model, S, theta), S), density, rtol=1e-11, atol=1e-14)
        full = dissipation_density(model, S, theta, include_regularization=True)
        np.testing.assert_allclose(full - density, double_dot(regularization_rate(model, S), S), rtol=1e-11, atol=1e-14)

    def test_flow_vanishes_inside_yield_surface(self):
        model = plastic_model(d=10.0, trunc_k=math.inf)
        S = SymTensor3([1.0, -1.0, 0.0, 0.5, 0.0, 0.0])
        self.assertEqual(flow_rate(model, S, 0.0), SymTensor3.zero())
        self.assertEqual(regularization_rate(model, S), SymTensor3.zero())

    def test_jacobian_matches_finite_differences(self):
        model = plastic_model(r_exp=2.0, trunc_k=3.0, d=0.2)
        S = np.array([[0.4, -0.3, 0.1, 0.2, -0.1, 0.5]])
        beta = np.array([0.2])
        jacobian = flow_jacobian(model, S, beta)[0]

        def G(stress):
            return flow_rate(model, stress, np.zeros(len(stress))) + regularization_rate(model, stress)

        h = 1e-7
        for column in range(6):
            step = np.zeros(6)
            step[column] = h
            numeric = (G(S + step) - G(S - step))[0] / (2 * h)
            np.testing.assert_allclose(jacobian[:, column], numeric, atol=1e-6)


class IntegrateStressTests(SimpleTestCase):

    def test_elastic_step_is_exact(self):
        model = elastic_model(mu=1.3, lam=0.4)
        state = MaterialPointState(stress=SymTensor3([0.1, 0.2, 0.3, 0.0, 0.0, 0.05]))
        rate = SymTensor3([0.01, 0.0, -0.02, 0.003, 0.0, 0.0])
        stress = material_point_step(model, state, rate, 0.0, 0.1)
        expected = state.stress.components + hooke(model.moduli, 0.1 * rate.components)
        np.testing.assert_allclose(stress.components, expected, atol=1e-15)

    def test_converged_stress_satisfies_flow_rule(self):
        model = plastic_model(r_exp=3.0, trunc_k=5.0, d=0.1)
        rng = np.random.default_rng(3)
        start = rng.normal(scale=0.2, size=(64, 6))
        increment = rng.normal(scale=0.05, size=(64, 6))
        dt = 0.05
        stress, tangent = integrate_stress(model, start, increment, np.zeros(64), dt)
        residual = (
            np.linalg.solve(model.moduli.stiffness_matrix(), (stress - start).T).T
            + dt * (flow_rate(model, stress, np.zeros(64)) + regularization_rate(model, stress))
            - increment
        )
        self.assertLess(np.max(np.abs(residual)), 1e-9)
        self.assertEqual(tangent.shape, (64, 6, 6))

    def test_iteration_limit_raises_nonconvergence(self):
        model = plastic_model(r_exp=3.0, trunc_k=math.inf, d=0.01)
        with self.assertRaises(NonConvergence):
            integrate_stress(model, np.zeros((1, 6)), np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]]),
                             np.zeros(1), 1.0, tol=1e-14, max_iter=1)

    def test_matches_fine_explicit_reference(self):
        rng = np.random.default_rng(11)
        dt, steps = 0.01, 100
        for _ in range(20):
            model = MaterialModel(
                moduli=ElasticModuli(mu=rng.uniform(0.5, 1.5), lam=rng.uniform(0.0, 1.0)),
                r_exp=rng.uniform(1.5, 3.0),
                trunc_k=rng.uniform(5.0, 50.0),
                f_spec=ThermalStressSpec(kind="zero"),
                beta_spec=YieldSpec(kind="constant", d=rng.uniform(0.05, 0.2)),
            )
            direction = rng.normal(size=6)
            rate = 0.2 * direction / np.sqrt(double_dot(direction, direction))
            stress_rate_scale = np.sqrt(double_dot(hooke(model.moduli, rate), hooke(model.moduli, rate)))

            def rhs(S):
                S = S[None, :]
                flow = flow_rate(model, S, np.zeros(1)) + regularization_rate(model, S)
                return hooke(model.moduli, rate - flow[0])

            reference = np.zeros(6)
            h = dt / 20
            for _ in range(steps * 20):
                k1 = rhs(reference)
                k2 = rhs(reference + 0.5 * h * k1)
                k3 = rhs(reference + 0.5 * h * k2)
                k4 = rhs(reference + h * k3)
                reference = reference + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

            state = MaterialPointState(stress=SymTensor3.zero())
            for _ in range(steps):
                state = MaterialPointState(
                    stress=material_point_step(model, state, SymTensor3(rate), 0.0, dt), time=state.time + dt
                )
            error = np.sqrt(double_dot(state.stress.components - reference, state.stress.components - reference))
            self.assertLessEqual(error, 5.0 * dt * stress_rate_scale)


class MaterialPointDriverTests(SimpleTestCase):

    def test_history_covers_the_path(self):
        model = plastic_model(r_exp=3.0, trunc_k=20.0, d=0.1)
        strains = np.zeros((3, 6))
        strains[1, 5] = 0.2
        history = drive_material_point(model, [0.0, 1.0, 2.0], strains, [0.0, 0.05, 0.1], 0.01)
        self.assertEqual(len(history), 201)
        self.assertAlmostEqual(history[-1].time, 2.0)
        self.assertAlmostEqual(history[-1].temperature, 0.1)
        peak = max(state.stress.deviator().norm() for state in history)
        self.assertGreater(peak, 0.1)
        self.assertLess(history[-1].stress.components[5], 0.0)

    def test_rejects_decreasing_times(self):
        with self.assertRaises(ParameterError):
            drive_material_point(elastic_model(), [0.0, 0.0], np.zeros((2, 6)), [0.0, 0.0], 0.1)


class ValidateMaterialTests(SimpleTestCase):

    def test_default_model_passes(self):
        report = validate_material(MaterialModel())
        self.assertTrue(report.passed)
        self.assertEqual(
            [check.name for check in report.checks],
            ["f_growth_positive", "f_growth_negative", "beta_range", "beta_lipschitz"],
        )

    def test_fast_growing_thermal_stress_fails(self):
        model = MaterialModel(f_spec=ThermalStressSpec(kind="expression", expression="theta^2"))
        report = validate_material(model)
        failed = {check.name for check in report.failures}
        self.assertIn("f_growth_positive", failed)
        self.assertIn("f_growth_negative", failed)

    def test_steep_yield_law_fails(self):
        model = MaterialModel(beta_spec=YieldSpec(kind="expression", d=1.0, d_tilde=1.0, expression="1 - 2*theta"))
        failed = {check.name for check in validate_material(model).failures}
        self.assertEqual(failed, {"beta_range", "beta_lipschitz"})

    def test_smooth_clamp_slope_is_not_overestimated(self):
        model = MaterialModel(beta_spec=YieldSpec(kind="smooth_clamp", d=0.05, d_tilde=1.0, smoothing=0.005))
        report = validate_material(model)
        self.assertTrue(report.passed, report.lines())
        lipschitz = report.checks[-1]
        self.assertEqual(lipschitz.name, "beta_lipschitz")
        self.assertAlmostEqual(lipschitz.worst_ratio, 1.0, places=6)

    def test_needs_enough_samples(self):
        with self.assertRaises(ParameterError):
            validate_material(MaterialModel(), sample_count=10)

    def test_report_lines(self):
        lines = validate_material(MaterialModel()).lines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(all(": pass" in line for line in lines))
