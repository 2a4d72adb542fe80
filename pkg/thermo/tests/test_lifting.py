import numpy as np
from django.test import SimpleTestCase

from ..exceptions import ParameterError
from ..integrator import run_simulation
from ..lifting import solve_lifting_displacement, solve_lifting_temperature
from ..output import physical_fields
from .factories import box, data, elastic_model, plastic_model, solver


class DisplacementLiftingTests(SimpleTestCase):

    def test_linear_boundary_rate_gives_linear_lifting(self):
        mesh, space = box(resolution=(2, 2, 2))
        given = data(g_D=["0.1*t*x1", "0.2*t*x3", "0"])
        lifting = solve_lifting_displacement(space, given, elastic_model().moduli, [0.5, 1.0])
        np.testing.assert_array_equal(lifting.times, [0.0, 0.5, 1.0])
        expected = np.column_stack([0.1 * mesh.vertices[:, 0], 0.2 * mesh.vertices[:, 2], np.zeros(mesh.n_vertices)])
        for index, t in enumerate(lifting.times):
            np.testing.assert_allclose(lifting.rates[index].reshape(-1, 3), expected, atol=1e-13)
            np.testing.assert_allclose(lifting.values[index].reshape(-1, 3), t * expected, atol=1e-13)

    def test_rejects_unordered_times(self):
        _, space = box(resolution=(1, 1, 1))
        with self.assertRaises(ParameterError):
            solve_lifting_displacement(space, data(), elastic_model().moduli, [1.0, 0.5])


class TemperatureLiftingTests(SimpleTestCase):

    def test_zero_flux_gives_zero_lifting(self):
        _, space = box(resolution=(2, 2, 2))
        lifting = solve_lifting_temperature(space, data(), 0.1, 3)
        np.testing.assert_array_equal(lifting.values, 0.0)
        np.testing.assert_allclose(lifting.times, [0.0, 0.1, 0.2, 0.3])

    def test_constant_flux_is_conserved(self):
        _, space = box(resolution=(2, 2, 2), neumann_tags=["xmax", "zmin"])
        lifting = solve_lifting_temperature(space, data(g_theta="0.5"), 0.1, 4)
        heat = lifting.values @ space.lumped_mass
        np.testing.assert_allclose(heat, 0.5 * 2.0 * lifting.times, atol=1e-12)

    def test_follows_the_run_step_times(self):
        _, space = box(resolution=(2, 2, 2), neumann_tags=["xmax"])
        lifting = solve_lifting_temperature(space, data(g_theta="0.5"), 0.1, 2, times=[0.1, 0.25])
        np.testing.assert_allclose(lifting.times, [0.0, 0.1, 0.25])
        np.testing.assert_allclose(lifting.values @ space.lumped_mass, 0.5 * lifting.times, atol=1e-12)
        np.testing.assert_allclose(lifting.rates[2], (lifting.values[2] - lifting.values[1]) / 0.15)
        with self.assertRaises(ParameterError):
            solve_lifting_temperature(space, data(), 0.1, 3, times=[0.1, 0.25])

    def test_needs_a_step(self):
        _, space = box(resolution=(1, 1, 1))
        with self.assertRaises(ParameterError):
            solve_lifting_temperature(space, data(), 0.1, 0)


class LiftingEquivalenceTests(SimpleTestCase):
    """Running on homogenized variables and adding the liftings back reproduces the direct run."""

    def assert_lifted_run_matches(self, config):
        mesh, space = box(resolution=(2, 2, 2), dirichlet_tags=["xmin", "xmax"])
        model = plastic_model(r_exp=2.0, trunc_k=10.0, d=0.05, B=0.2)
        given = data(
            body_force=["0", "0", "-0.1"],
            g_D=["0.2*t*x1", "0", "0"],
            g_theta="0.2",
            theta0="0.1*cos(pi*x2)",
        )
        direct = run_simulation(config, model, given, mesh, space=space)

        times = [config.step_time(index) for index in range(1, config.n_steps + 1)]
        lifting_u = solve_lifting_displacement(space, given, model.moduli, times)
        lifting_theta = solve_lifting_temperature(space, given, config.dt, config.n_steps, times=times)
        lifted = run_simulation(config, model, given.with_lifting(lifting_u, lifting_theta), mesh, space=space)

        self.assertEqual([time for time, _ in lifted.snapshots][-1], config.t_end)
        self.assertGreater(sum(ledger.plastic_dissipation for ledger in direct.ledgers), 0.0)
        for (time, state), (lifted_time, lifted_state) in zip(direct.snapshots, lifted.snapshots):
            self.assertEqual(time, lifted_time)
            u, theta = physical_fields(space, lifted.data, lifted_state)
            np.testing.assert_allclose(u, state.u, atol=1e-8)
            np.testing.assert_allclose(theta, state.theta, atol=1e-8)
            np.testing.assert_allclose(lifted_state.stress, state.stress, atol=1e-8)

    def test_homogenized_run_matches_direct_run(self):
        self.assert_lifted_run_matches(solver(dt=0.1, t_end=0.5))

    def test_shortened_last_step(self):
        self.assert_lifted_run_matches(solver(dt=0.1, t_end=0.25))
