from django.core.management.base import CommandError

from ...runner import execute_validation
from ..base import CONFIG_ERROR, SolverCommand


class Command(SolverCommand):
    help = "Check the growth conditions on f and the yield assumptions on beta"

    def execute_solver(self, run_config, directory, **options):
        report = execute_validation(run_config)
        for line in report.lines():
            self.stdout.write(line)
        if not report.passed:
            names = ", ".join(check.name for check in report.failures)
            raise CommandError(f"material fails admissibility checks: {names}", returncode=CONFIG_ERROR)
        self.stdout.write(self.style.SUCCESS("material model is admissible"))
