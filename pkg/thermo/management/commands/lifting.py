from ...runner import execute_lifting
from ..base import SolverCommand


class Command(SolverCommand):
    help = "Solve the displacement and temperature lifting problems and write u~ and theta~"
    output_name = "lifting"

    def execute_solver(self, run_config, directory, **options):
        lifting_u, lifting_theta = execute_lifting(run_config, directory)
        self.stdout.write(self.style.SUCCESS(
            f"lifting fields at {lifting_u.times.size} and {lifting_theta.times.size} times written to {directory}"
        ))
