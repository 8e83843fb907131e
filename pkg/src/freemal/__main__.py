"""freemal file for ensuring the package is executable
as `freemal` and `python -m freemal`
"""
from pathlib import Path

from kedro.framework.project import configure_project

from freemal.cli import cli


def main(*args, **kwargs):
    package_name = Path(__file__).parent.name
    configure_project(package_name)
    cli(*args, prog_name="freemal", **kwargs)


if __name__ == "__main__":
    main()
