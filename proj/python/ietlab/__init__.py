"""Interval exchange transformations, Rauzy-Veech renormalization and the
limit laws of their Birkhoff sums.

The heavy lifting happens in the compiled ``_core`` module; this package adds
dict-based wrappers around the experiment drivers.
"""

import json as _json
import os as _os

from ._core import *  # noqa: F401,F403
from ._core import IetlabError, run_command as _run_command
from ._core import run_limit as _run_limit
from ._core import run_lyapunov as _run_lyapunov
from ._core import run_verify as _run_verify

__version__ = version()  # noqa: F405


def _text(config):
    # dict, JSON text, or a path to a config file
    if isinstance(config, _os.PathLike) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        with open(config, encoding="utf-8") as fh:
            return fh.read()
    return config if isinstance(config, str) else _json.dumps(config)


def limit(config, threads=1):
    """Run the limit-law experiment. Returns (rows, passed, summary)."""
    rows, passed, summary = _run_limit(_text(config), threads)
    return rows, passed, _json.loads(summary)


def verify(config, threads=1):
    """Run the identity and trend checks. Returns (passed, summary)."""
    passed, summary = _run_verify(_text(config), threads)
    return passed, _json.loads(summary)


def lyapunov(config, threads=1):
    """Estimate the exponent spectrum. Returns (passed, summary)."""
    passed, summary = _run_lyapunov(_text(config), threads)
    return passed, _json.loads(summary)


def run(command, config, out, threads=1):
    """Same as the ``ietlab`` CLI: writes report files into ``out`` and
    returns the exit code (0 pass, 1 fail, 2 degenerate input, 3 config error)."""
    return _run_command(command, _text(config), _os.fspath(out), threads)
