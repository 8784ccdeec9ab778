"""Sphinx configuration file for the soliton_forge package.

This configuration only affects single-package Sphinx documentation builds.
"""

from documenteer.sphinxconfig.stackconf import build_package_configs
import soliton_forge


_g = globals()
_g.update(
    build_package_configs(
        project_name="soliton_forge",
        version=soliton_forge.version.__version__,
    )
)
