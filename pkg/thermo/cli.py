"""
Command-line entry: `manage.py <command> <config> [flags]`.

Hyphenated names (`material-point`, `study-k`, ...) are accepted as aliases of
the management commands and the exit status is returned instead of raised.
"""
import os
import sys

COMMANDS = ("run", "material_point", "study_k", "study_mesh", "validate_material", "lifting")


def cli_dispatch(argv):
    """
    Run a command line and return its exit status: 0 on success, 1 on solver
    failure, 2 on configuration error.
    """
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "thermovisco.settings")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc

    argv = list(argv)
    if len(argv) > 1 and argv[1].replace("-", "_") in COMMANDS:
        argv[1] = argv[1].replace("-", "_")
    try:
        execute_from_command_line(argv)
    except SystemExit as e:
        if e.code is None:
            return 0
        if isinstance(e.code, int):
            return e.code
        sys.stderr.write(f"{e.code}\n")
        return 1
    return 0
