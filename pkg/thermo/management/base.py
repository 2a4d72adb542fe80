import logging

from django.core.management.base import BaseCommand, CommandError

from ..config import parse_config
from ..exceptions import ConfigError, ParameterError, ThermoError
from ..runner import with_overrides

logger = logging.getLogger(__name__)

CONFIG_ERROR = 2
SOLVER_FAILURE = 1


class SolverCommand(BaseCommand):
    """
    Shared surface of the solver commands: a config path, the common flags and
    the exit-code policy (0 success, 1 solver or I/O failure, 2 config error).
    """

    requires_system_checks = []
    output_name = "run"

    def add_arguments(self, parser):
        parser.add_argument("config", help="JSON run configuration")
        parser.add_argument("--output-dir", dest="output_dir", help="Directory for result files")
        parser.add_argument("--workers", type=int, default=1, help="Size of the worker pool for sweeps")
        parser.add_argument("--seed", type=int, help="Reserved; every algorithm is deterministic")
        parser.add_argument("--snapshot-stride", dest="snapshot_stride", type=int,
                            help="Keep every n-th step as a snapshot")

    def handle(self, *args, **options):
        try:
            run_config = parse_config(options["config"])
            run_config = with_overrides(run_config, options.get("snapshot_stride"))
            directory = run_config.output.resolve_directory(options.get("output_dir"), self.output_name)
            self.execute_solver(run_config, directory, **options)
        except (ConfigError, ParameterError) as e:
            logger.error(f"Configuration error: {e}")
            raise CommandError(f"configuration error: {e}", returncode=CONFIG_ERROR) from e
        except ThermoError as e:
            logger.error(f"Solver failure: {e}")
            raise CommandError(f"solver failure: {e}", returncode=SOLVER_FAILURE) from e

    def execute_solver(self, run_config, directory, **options):
        raise NotImplementedError("subclasses of SolverCommand must provide execute_solver()")
