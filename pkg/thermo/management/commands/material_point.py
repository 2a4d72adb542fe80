from ...runner import execute_material_point
from ..base import SolverCommand


class Command(SolverCommand):
    help = "Drive a single material point along the strain/temperature path of the material_point section"
    output_name = "material_point"

    def execute_solver(self, run_config, directory, **options):
        history = execute_material_point(run_config, directory)
        final = history[-1]
        self.stdout.write(self.style.SUCCESS(
            f"{len(history) - 1} steps, final |dev T| = {final.stress.deviator().norm():.6g}; "
            f"wrote {directory / 'material_point.csv'}"
        ))
