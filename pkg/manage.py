#!/usr/bin/env python
"""Django's command-line utility for administrative tasks and solver runs."""
import os
import sys


def main():
    """Run administrative tasks."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "thermovisco.settings")
    from thermo.cli import cli_dispatch

    sys.exit(cli_dispatch(sys.argv))


if __name__ == "__main__":
    main()
