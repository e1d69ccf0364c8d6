"""Exception hierarchy shared by all modules.

Each CLI exit code maps to one branch of this hierarchy, so library errors
surface with a stable, scriptable classification.
"""

from __future__ import annotations


class StableSysidError(Exception):
    """Base class for all errors raised by this package."""


class InputError(StableSysidError):
    """Invalid argument: bad dimension, malformed config, out-of-domain value."""


class UnsupportedTargetError(InputError):
    """The (kernel structure, stability target) combination has no implemented
    closed-form viability test.  Raised instead of guessing."""


class InfeasibleTargetError(StableSysidError):
    """The requested viability set is empty (or contains only the zero kernel).

    The message names the closed-form rule that makes the set empty.
    """


class NumericError(StableSysidError):
    """A numerical computation failed (non-PSD Gram matrix beyond tolerance,
    singular solve, non-finite cost)."""


class DivergenceError(StableSysidError):
    """A simulated trajectory left the trusted range (non-finite value or
    magnitude above the divergence threshold)."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index
