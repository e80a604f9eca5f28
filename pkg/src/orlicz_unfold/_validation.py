"""Exceptions and small input-validation helpers shared across modules."""

import math

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(ValueError):
    """Grids, spacings or array shapes are incompatible."""


class ParseError(ValueError):
    """A textual spec (expression, domain, config) could not be parsed."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


def check_positive(value, name):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a finite positive number, got {value!r}")
    return value


def check_finite_array(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_nonnegative_array(values, name="t"):
    arr = check_finite_array(values, name)
    if np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative")
    return arr


def nearest_integer(q, rtol=1e-9):
    """Return ``round(q)`` if ``q`` is an integer up to ``rtol``, else None."""
    r = round(q)
    if abs(q - r) <= rtol * max(1.0, abs(q)):
        return int(r)
    return None
