"""Python interface to the fvlab simulators and verifiers."""

import json

from ._fvlab import (
    ConfigError,
    Mechanism,
    cbi_laplace,
    command_names,
    phi,
    psi,
    rates,
)
from ._fvlab import run_command as _run_command

__all__ = [
    "ConfigError",
    "Mechanism",
    "cbi_laplace",
    "command_names",
    "phi",
    "psi",
    "rates",
    "run",
]


def run(command, config=None, **flags):
    """Run a command with a config dict and keyword overrides.

    Returns (files, exit_code), where files maps output file names to their
    contents. A seed is required, either in config or as a keyword.
    """
    return _run_command(command, json.dumps(config or {}), json.dumps(flags))
