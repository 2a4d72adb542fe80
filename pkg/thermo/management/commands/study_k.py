from django.core.management.base import CommandError

from ...runner import execute_k_study
from ..base import SOLVER_FAILURE, SolverCommand


class Command(SolverCommand):
    help = "Run the configuration for several truncation levels and tabulate Cauchy distances"
    output_name = "study_k"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--k-list", dest="k_list", nargs="+", type=float, required=True,
                            help="At least three increasing truncation levels")

    def execute_solver(self, run_config, directory, **options):
        study = execute_k_study(run_config, options["k_list"], directory, workers=options["workers"])
        for row in study.rows:
            self.stdout.write(
                f"k {row.k_coarse:g} -> {row.k_fine:g}: theta L1 {row.theta_l1:.6g}, "
                f"T L2 {row.stress_l2:.6g}, u L2 {row.displacement_l2:.6g}"
            )
        if study.failures:
            failed = ", ".join(f"{run.k:g}" for run in study.failures)
            raise CommandError(f"k-study members failed for k = {failed}; table written for the others",
                               returncode=SOLVER_FAILURE)
        self.stdout.write(self.style.SUCCESS(f"k-study written to {directory}"))
