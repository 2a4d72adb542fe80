from ...runner import execute_run
from ..base import SolverCommand


class Command(SolverCommand):
    help = "Run one thermo-visco-elastic simulation and write snapshots, ledger, bounds and summary"

    def execute_solver(self, run_config, directory, **options):
        trajectory, bounds = execute_run(run_config, directory)
        final = trajectory.ledgers[-1]
        self.stdout.write(self.style.SUCCESS(
            f"{len(trajectory.ledgers) - 1} steps to t = {final.time:.6g}; results in {directory}"
        ))
