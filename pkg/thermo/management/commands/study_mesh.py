from django.core.management.base import CommandError

from ...runner import execute_mesh_study
from ..base import SOLVER_FAILURE, SolverCommand


class Command(SolverCommand):
    help = "Nested box refinements with manufactured-solution errors or successive-level differences"
    output_name = "study_mesh"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--levels", type=int, default=3, help="Number of refinement levels")

    def execute_solver(self, run_config, directory, **options):
        results = execute_mesh_study(run_config, options["levels"], directory, workers=options["workers"])
        for entry in results:
            if entry.rates:
                self.stdout.write(
                    f"level {entry.level} h = {entry.h:.4g}: rates u {entry.rates['displacement']:.3f}, "
                    f"theta {entry.rates['temperature']:.3f}"
                )
        failed = [entry.level for entry in results if entry.error]
        if failed:
            raise CommandError(f"mesh levels {failed} failed", returncode=SOLVER_FAILURE)
        self.stdout.write(self.style.SUCCESS(f"mesh study written to {directory}"))
