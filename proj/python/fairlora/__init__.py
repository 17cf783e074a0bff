# Copyright (c) 2026, The fairlora authors
# SPDX-License-Identifier: Apache-2.0
#
"""Fairness-aware LoRA fine-tuning between a Solution Developer and a Compliance Officer."""

import json as _json

from ._core import (
    ConfigError,
    DomainError,
    FormatError,
    __version__,
    audit_transcript,
    evaluate,
)
from ._core import generate as _generate
from ._core import run_experiment as _run_experiment


def generate(**spec):
    """Synthetic splits; keyword arguments are GenSpec fields (n, beta, eta, seed, ...)."""
    return _generate(_json.dumps(spec))


def run_experiment(spec, out=None):
    """Run a strategy x seed grid. `spec` is a dict in the same shape as the CLI's JSON spec."""
    return _run_experiment(_json.dumps(spec), out)


__all__ = [
    "ConfigError",
    "DomainError",
    "FormatError",
    "__version__",
    "audit_transcript",
    "evaluate",
    "generate",
    "run_experiment",
]
