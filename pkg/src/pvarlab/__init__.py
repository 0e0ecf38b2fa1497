"""Simulation and verification toolkit for p-variation of Markov processes."""

from pvarlab.core import ClassEnvelope, SamplePath, dyadic_size, metric, r1_cutoff

__version__ = "0.1.0"

__all__ = [
    "ClassEnvelope",
    "SamplePath",
    "dyadic_size",
    "metric",
    "r1_cutoff",
]
