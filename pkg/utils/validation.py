import logging
import math
from typing import Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class InvalidInputError(ValueError):
    """Raised when an operation receives input outside its domain."""


class EnumerationCapError(InvalidInputError):
    """Raised when an exhaustive enumeration would exceed its configured cap."""

    def __init__(self, what: str, size: float, cap: int):
        self.what = what
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: enumeration size {size:.6g} exceeds cap {cap}")


class SpecValidationError(InvalidInputError):
    """Raised when an experiment spec fails validation; lists every offending field."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid experiment spec: " + "; ".join(self.errors))


class CsvParseError(ValueError):
    """Raised when a results CSV cannot be parsed."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def require_positive(name: str, value: float) -> float:
    """
    Validate that a scalar parameter is finite and strictly positive.

    Args:
        name: Parameter name used in the error message
        value: Value to check

    Returns:
        The value as a float
    """
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidInputError(f"{name} must be positive and finite, got {value}")
    return value


def require_positive_int(name: str, value: int) -> int:
    if isinstance(value, bool) or int(value) != value or int(value) < 1:
        raise InvalidInputError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def require_multiple(n: int, k: int, n_name: str = "n", k_name: str = "k") -> int:
    """Check that n splits into k equal blocks and return the block length."""
    if n % k != 0:
        raise InvalidInputError(
            f"{n_name}={n} is not a multiple of {k_name}={k}; pad the signal explicitly"
        )
    return n // k


def as_vector(name: str, values, length: Optional[int] = None) -> np.ndarray:
    """
    Convert input to a finite 1-D float64 array, optionally checking its length.

    Args:
        name: Parameter name used in the error message
        values: Array-like input
        length: Expected length, or None to skip the check

    Returns:
        A new float64 array
    """
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if length is not None and arr.shape[0] != length:
        raise InvalidInputError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def check_in_cube(name: str, z: np.ndarray, radius: float, atol: float = 0.0) -> None:
    """Reject z unless ||z||_inf <= radius."""
    norm = float(np.max(np.abs(z))) if z.size else 0.0
    if norm > radius + atol:
        logger.debug(f"{name} outside cube: ||z||_inf={norm:.6g} > {radius:.6g}")
        raise InvalidInputError(f"{name} violates ||z||_inf <= {radius:.6g} (got {norm:.6g})")


def check_in_ball(name: str, z: np.ndarray, radius: float, atol: float = 0.0) -> None:
    """Reject z unless ||z||_2 <= radius."""
    norm = float(np.linalg.norm(z))
    if norm > radius + atol:
        logger.debug(f"{name} outside ball: ||z||_2={norm:.6g} > {radius:.6g}")
        raise InvalidInputError(f"{name} violates ||z||_2 <= {radius:.6g} (got {norm:.6g})")


def check_cap(what: str, size: float, cap: int) -> None:
    if size > cap:
        logger.warning(f"Enumeration guardrail hit for {what}: {size:.6g} > {cap}")
        raise EnumerationCapError(what, size, cap)


def unknown_keys(payload: dict, allowed: Iterable[str]) -> List[str]:
    """Return the keys of payload not listed in allowed, sorted."""
    allowed_set = set(allowed)
    return sorted(key for key in payload if key not in allowed_set)
