"""Domain errors for the nnxp training engine."""

from __future__ import annotations


class NnxpError(Exception):
    """Domain-level error for training, persistence and benchmark operations."""


class ShapeError(NnxpError, ValueError):
    """Vector, array or layer shapes do not fit together."""


class DivergenceError(NnxpError, ArithmeticError):
    """A weight update produced a non-finite value."""


class DataFormatError(NnxpError, ValueError):
    """An IDX or CSV dataset file could not be decoded."""


class ConnectomeFileError(NnxpError):
    """A connectome file could not be written or read back."""


class ConfigError(NnxpError, ValueError):
    """A trainer or run configuration violates its invariants."""


class TrainingError(NnxpError):
    """A worker failed while training a batch."""


class SweepError(NnxpError):
    """A benchmark sweep is missing data it needs."""


class RunNotFoundError(NnxpError):
    """The run registry has no run with the requested id."""
