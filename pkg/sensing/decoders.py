"""Range-minimization decoders.

Each decoder returns the signal in its search family whose image under ``A``
is closest to ``y``.  ``ExhaustiveDecoder`` scans the family completely,
``LatentDecoder`` searches the latent domain of a generator, and
``ZeroDecoder`` is the trivial baseline.
"""

import logging
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from models.group_sparse import GenModelParams, generate_batch, patterns_from_codes
from models.recursive import RecursiveGenParams
from models.relu import ReluNetwork
from utils.validation import InvalidInputError, check_cap, require_multiple, require_positive

logger = logging.getLogger(__name__)

FAMILY_SIGNED = "signed_supports"
FAMILY_LS = "supports_ls"

RIDGE = 1e-12
CHUNK = 8192


def enum_cap() -> int:
    return int(float(os.getenv("GENSENSE_ENUM_CAP", str(2 ** 20))))


def _residuals(y: np.ndarray, A: np.ndarray, X: np.ndarray) -> np.ndarray:
    R = y[None, :] - X @ A.T
    return np.einsum("ij,ij->i", R, R)


def _decode_signed(y, A, k, xi, cap):
    n = A.shape[1]
    B = require_multiple(n, k)
    total = (2 * B) ** k
    check_cap("signed supports", total, cap)

    best_code, best_res = -1, np.inf
    for start in range(0, total, CHUNK):
        codes = np.arange(start, min(start + CHUNK, total), dtype=np.int64)
        res = _residuals(y, A, xi * patterns_from_codes(codes, n, k))
        i = int(np.argmin(res))
        # strict comparison keeps the earliest code on ties across chunks
        if res[i] < best_res:
            best_code, best_res = int(codes[i]), float(res[i])
    return xi * patterns_from_codes(np.array([best_code]), n, k)[0], best_res


def _decode_supports_ls(y, A, k, x_max, cap):
    m, n = A.shape
    B = require_multiple(n, k)
    total = (B + 1) ** k
    check_cap("supports", total, cap)

    best_x, best_res = None, np.inf
    eye = np.eye(k)
    for start in range(0, total, CHUNK):
        codes = np.arange(start, min(start + CHUNK, total), dtype=np.int64)
        N = codes.shape[0]
        digits = np.empty((N, k), dtype=np.int64)
        rest = codes.copy()
        for i in range(k - 1, -1, -1):
            digits[:, i] = rest % (B + 1)
            rest //= B + 1
        mask = digits > 0
        cols = np.arange(k)[None, :] * B + np.maximum(digits - 1, 0)

        As = A[:, cols].transpose(1, 0, 2) * mask[:, None, :]
        gram = np.einsum("nmi,nmj->nij", As, As) + RIDGE * eye
        rhs = np.einsum("nmi,m->ni", As, y)
        coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
        coef = np.clip(coef, -x_max, x_max) * mask
        fitted = np.einsum("nmi,ni->nm", As, coef)
        res = np.sum((y[None, :] - fitted) ** 2, axis=1)

        i = int(np.argmin(res))
        if res[i] < best_res:
            best_res = float(res[i])
            best_x = np.zeros(n)
            best_x[cols[i][mask[i]]] = coef[i][mask[i]]
    return best_x, best_res


def decode_exhaustive(
    y,
    A,
    k: int,
    family: str = FAMILY_SIGNED,
    xi: float = 1.0,
    x_max: float = 1.0,
    cap: Optional[int] = None,
) -> np.ndarray:
    """
    Exhaustive range minimization over a finite signal family.

    ``signed_supports`` scans ``{xi v : v in V}`` in code order and breaks ties
    towards the smallest code.  ``supports_ls`` scans every support with at most
    one entry per block and fits the entries by least squares clamped to
    ``[-x_max, x_max]``.

    Args:
        y: Measurements of length m
        A: Measurement matrix (m, n)
        k: Number of blocks
        family: ``signed_supports`` or ``supports_ls``
        xi: Amplitude of the signed family
        x_max: Amplitude cap of the least-squares family
        cap: Largest family size to scan (defaults to GENSENSE_ENUM_CAP)

    Returns:
        The decoded signal of length n
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != A.shape[0]:
        raise InvalidInputError(f"y has length {y.shape[0]}, A has {A.shape[0]} rows")
    cap = enum_cap() if cap is None else cap
    if family == FAMILY_SIGNED:
        return _decode_signed(y, A, k, xi, cap)[0]
    if family == FAMILY_LS:
        return _decode_supports_ls(y, A, k, x_max, cap)[0]
    raise InvalidInputError(f"unknown decoder family {family!r}")


@dataclass
class LatentFit:
    x: np.ndarray
    z: np.ndarray
    residual: float
    grid_residual: float


def decode_latent(
    y,
    A,
    generator: Callable[[np.ndarray], np.ndarray],
    k: int,
    lo: float,
    hi: float,
    grid_per_dim: Optional[int] = None,
    grid: Optional[np.ndarray] = None,
    refinement_steps: int = 20,
    cap: Optional[int] = None,
) -> LatentFit:
    """
    Approximate range minimization over the latent cube ``[lo, hi]^k``.

    A coarse grid (cell midpoints, or an explicit grid) is scanned first; the
    best grid point is then refined by coordinate descent whose step halves
    after every sweep.  A move is accepted only when it lowers the residual.

    Args:
        y: Measurements
        A: Measurement matrix
        generator: Maps an (N, k) latent batch to an (N, n) signal batch
        k: Latent dimension
        lo: Lower end of the latent cube
        hi: Upper end of the latent cube
        grid_per_dim: Midpoints per coordinate of the coarse grid
        grid: Explicit coarse grid of shape (N, k); overrides grid_per_dim
        refinement_steps: Number of coordinate-descent sweeps
        cap: Largest coarse grid (defaults to GENSENSE_ENUM_CAP)

    Returns:
        LatentFit with the decoded signal and its latent point
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    cap = enum_cap() if cap is None else cap
    if grid is None:
        if not grid_per_dim or grid_per_dim < 1:
            raise InvalidInputError("decode_latent needs grid_per_dim >= 1 or an explicit grid")
        check_cap("latent grid", float(grid_per_dim) ** k, cap)
        axis = lo + (np.arange(grid_per_dim) + 0.5) * (hi - lo) / grid_per_dim
        mesh = np.meshgrid(*([axis] * k), indexing="ij")
        grid = np.stack([g.reshape(-1) for g in mesh], axis=1)
        step = (hi - lo) / grid_per_dim / 2.0
    else:
        grid = np.asarray(grid, dtype=np.float64).reshape(-1, k)
        if grid.shape[0] == 0:
            raise InvalidInputError("latent grid is empty")
        check_cap("latent grid", grid.shape[0], cap)
        step = (hi - lo) / max(2.0, float(grid.shape[0]) ** (1.0 / k)) / 2.0

    best_z, best_res = None, np.inf
    for start in range(0, grid.shape[0], CHUNK):
        Z = grid[start:start + CHUNK]
        res = _residuals(y, A, generator(Z))
        i = int(np.argmin(res))
        if res[i] < best_res:
            best_z, best_res = Z[i].copy(), float(res[i])
    grid_res = best_res

    z = best_z
    for _ in range(refinement_steps):
        for i in range(k):
            trials = []
            for delta in (-step, step):
                cand = z.copy()
                cand[i] = min(hi, max(lo, cand[i] + delta))
                trials.append(cand)
            res = _residuals(y, A, generator(np.array(trials)))
            j = int(np.argmin(res))
            if res[j] < best_res:
                z, best_res = trials[j], float(res[j])
        step /= 2.0

    x = generator(z[None, :])[0]
    return LatentFit(x=x, z=z, residual=best_res, grid_residual=grid_res)


class ExhaustiveDecoder:
    def __init__(self, k: int, family: str = FAMILY_SIGNED, xi: float = 1.0, x_max: float = 1.0, cap: Optional[int] = None):
        if family not in (FAMILY_SIGNED, FAMILY_LS):
            raise InvalidInputError(f"unknown decoder family {family!r}")
        self.k = k
        self.family = family
        self.xi = require_positive("xi", xi)
        self.x_max = require_positive("x_max", x_max)
        self.cap = enum_cap() if cap is None else cap

    @property
    def name(self) -> str:
        return "exhaustive_signed" if self.family == FAMILY_SIGNED else "exhaustive_ls"

    def decode(self, y, A) -> np.ndarray:
        return decode_exhaustive(y, A, self.k, self.family, self.xi, self.x_max, self.cap)


class LatentDecoder:
    """Grid-plus-refinement search over the latent domain of a generator."""

    def __init__(
        self,
        generator: Callable[[np.ndarray], np.ndarray],
        k: int,
        lo: float,
        hi: float,
        grid_per_dim: Optional[int] = None,
        grid: Optional[np.ndarray] = None,
        refinement_steps: int = 20,
    ):
        self.generator = generator
        self.k = k
        self.lo = lo
        self.hi = hi
        self.grid_per_dim = grid_per_dim
        self.grid = grid
        self.refinement_steps = refinement_steps

    name = "latent"

    @classmethod
    def for_group_sparse(cls, params: GenModelParams, grid_per_dim: int = 64, refinement_steps: int = 20) -> "LatentDecoder":
        return cls(lambda Z: generate_batch(params, Z), params.k, -params.r, params.r, grid_per_dim=grid_per_dim,
                   refinement_steps=refinement_steps)

    @classmethod
    def for_recursive(cls, p: RecursiveGenParams, net: Optional[ReluNetwork] = None, refinement_steps: int = 0) -> "LatentDecoder":
        """Search the finest-cell midpoints of the recursive generator (network or idealized map)."""
        generator = net.forward_batch if net is not None else p.ideal
        mids = p.midpoints()
        mesh = np.meshgrid(*([mids] * p.k), indexing="ij")
        grid = np.stack([g.reshape(-1) for g in mesh], axis=1)
        return cls(generator, p.k, 0.0, 1.0, grid=grid, refinement_steps=refinement_steps)

    def fit(self, y, A) -> LatentFit:
        return decode_latent(
            y, A, self.generator, self.k, self.lo, self.hi,
            grid_per_dim=self.grid_per_dim, grid=self.grid, refinement_steps=self.refinement_steps,
        )

    def decode(self, y, A) -> np.ndarray:
        return self.fit(y, A).x


class ZeroDecoder:
    name = "zero"

    def decode(self, y, A) -> np.ndarray:
        return np.zeros(np.asarray(A).shape[1])
