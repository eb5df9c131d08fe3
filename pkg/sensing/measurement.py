import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.rng import Purpose, substream
from utils.validation import InvalidInputError, as_vector, require_positive_int

logger = logging.getLogger(__name__)

MATRIX_GAUSSIAN = "gaussian_iid"
MATRIX_FIXED = "fixed"


@dataclass
class SensingConfig:
    """
    Measurement setup ``y = A x + eta`` with ``eta ~ N(0, (alpha/m) I_m)``.

    Attributes:
        m: Number of measurements
        n: Signal length
        alpha: Total noise level; per-coordinate variance is alpha/m
        matrix_mode: ``gaussian_iid`` (entries N(0, 1/m)) or ``fixed``
        matrix: The matrix used in ``fixed`` mode
        normalize_frobenius: If set, A is rescaled so that ||A||_F^2 equals it
        seed: Experiment seed
        resample_per_trial: Draw a fresh Gaussian matrix for every trial
    """

    m: int
    n: int
    alpha: float
    matrix_mode: str = MATRIX_GAUSSIAN
    matrix: Optional[np.ndarray] = None
    normalize_frobenius: Optional[float] = None
    seed: int = 0
    resample_per_trial: bool = False

    def __post_init__(self):
        require_positive_int("m", self.m)
        require_positive_int("n", self.n)
        if self.alpha < 0:
            raise InvalidInputError(f"alpha must be non-negative, got {self.alpha}")
        if self.matrix_mode not in (MATRIX_GAUSSIAN, MATRIX_FIXED):
            raise InvalidInputError(f"unknown matrix_mode {self.matrix_mode!r}")
        if self.matrix_mode == MATRIX_FIXED:
            if self.matrix is None:
                raise InvalidInputError("matrix_mode 'fixed' needs a matrix")
            self.matrix = np.array(self.matrix, dtype=np.float64, ndmin=2)
            if self.matrix.shape != (self.m, self.n):
                raise InvalidInputError(f"matrix must have shape ({self.m}, {self.n}), got {self.matrix.shape}")
        if self.normalize_frobenius is not None and self.normalize_frobenius <= 0:
            raise InvalidInputError(f"normalize_frobenius must be positive, got {self.normalize_frobenius}")
        if self.seed < 0:
            raise InvalidInputError(f"seed must be non-negative, got {self.seed}")

    @property
    def sigma2(self) -> float:
        return self.alpha / self.m


def sample_matrix(cfg: SensingConfig, draw: int = 0) -> np.ndarray:
    """
    Measurement matrix for a configuration.

    Args:
        cfg: Sensing configuration
        draw: Index of the draw; distinct draws give independent Gaussian matrices

    Returns:
        Array of shape (m, n); Frobenius renormalization is applied last
    """
    if cfg.matrix_mode == MATRIX_FIXED:
        A = cfg.matrix.copy()
    else:
        rng = substream(cfg.seed, Purpose.MATRIX, draw)
        A = rng.standard_normal((cfg.m, cfg.n)) / np.sqrt(cfg.m)
    if cfg.normalize_frobenius is not None:
        frob2 = float(np.sum(A * A))
        if frob2 == 0.0:
            raise InvalidInputError("cannot renormalize an all-zero matrix")
        A *= np.sqrt(cfg.normalize_frobenius / frob2)
    return A


def observe(A: np.ndarray, x_star, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Noisy measurements ``A x* + eta`` with ``eta ~ N(0, alpha/m)`` per coordinate."""
    A = np.asarray(A, dtype=np.float64)
    x_star = as_vector("x_star", x_star, A.shape[1])
    if alpha < 0:
        raise InvalidInputError(f"alpha must be non-negative, got {alpha}")
    m = A.shape[0]
    noise = rng.standard_normal(m) * np.sqrt(alpha / m)
    return A @ x_star + noise


def append_zero_rows(A: np.ndarray, extra: int) -> np.ndarray:
    """Pad A with all-zero measurement rows."""
    if extra < 0:
        raise InvalidInputError(f"extra must be non-negative, got {extra}")
    A = np.asarray(A, dtype=np.float64)
    return np.vstack([A, np.zeros((extra, A.shape[1]))])
