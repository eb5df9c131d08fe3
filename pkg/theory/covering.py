"""Covering numbers of the latent cube."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.neighbors import NearestNeighbors

from utils.validation import InvalidInputError, require_positive, require_positive_int

logger = logging.getLogger(__name__)

# Grid spacing of the oracle, as a fraction of eps.
ORACLE_RESOLUTION = 32
ORACLE_MAX_K = 2


@dataclass
class CoveringResult:
    k: int
    r: float
    eps: float
    size: int
    centers: np.ndarray
    certified: bool
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.size <= self.bound


def covering_bound(k: int, r: float, eps: float) -> float:
    """Upper bound ``(1 + 2 sqrt(k) r / eps)^k`` on the eps-covering number of ``[-r, r]^k``."""
    require_positive_int("k", k)
    require_positive("r", r)
    require_positive("eps", eps)
    return (1.0 + 2.0 * math.sqrt(k) * r / eps) ** k


def covering_log_bound(k: int, r: float, eps: float) -> float:
    require_positive_int("k", k)
    require_positive("r", r)
    require_positive("eps", eps)
    return k * math.log1p(2.0 * math.sqrt(k) * r / eps)


def _cube_grid(k: int, r: float, spacing: float) -> np.ndarray:
    cells = int(math.ceil(2.0 * r / spacing))
    axis = np.minimum(-r + (np.arange(cells) + 0.5) * spacing, r)
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def covering_oracle(k: int, r: float, eps: float) -> CoveringResult:
    """
    Greedy eps-net of ``[-r, r]^k`` in the Euclidean norm.

    Every point of the cube lies within ``spacing * sqrt(k) / 2`` of a grid
    point, so balls of the shrunken radius ``eps - spacing * sqrt(k) / 2``
    around the chosen centers cover the grid, and balls of radius ``eps``
    cover the whole cube.  Coverage of the grid is re-checked with a
    nearest-neighbour query before returning.

    Args:
        k: Latent dimension, at most 2
        r: Cube radius
        eps: Covering radius

    Returns:
        CoveringResult with the net and its certificate
    """
    require_positive_int("k", k)
    if k > ORACLE_MAX_K:
        raise InvalidInputError(f"covering oracle supports k <= {ORACLE_MAX_K}, got k={k}")
    r = require_positive("r", r)
    eps = require_positive("eps", eps)

    spacing = eps / ORACLE_RESOLUTION
    radius = eps - spacing * math.sqrt(k) / 2.0
    grid = _cube_grid(k, r, spacing)

    index = NearestNeighbors(radius=radius).fit(grid)
    covered = np.zeros(grid.shape[0], dtype=bool)
    chosen = []
    cursor = 0
    while cursor < grid.shape[0]:
        if covered[cursor]:
            cursor += 1
            continue
        chosen.append(cursor)
        hits = index.radius_neighbors(grid[cursor:cursor + 1], return_distance=False)[0]
        covered[hits] = True

    centers = grid[chosen]
    dist, _ = NearestNeighbors(n_neighbors=1).fit(centers).kneighbors(grid)
    certified = bool(np.all(dist[:, 0] <= radius + 1e-12))
    bound = covering_bound(k, r, eps)
    logger.debug(f"Greedy cover k={k}, r={r}, eps={eps}: {len(chosen)} balls (bound {bound:.4f})")
    if not certified:
        logger.warning(f"Greedy cover k={k}, r={r}, eps={eps} failed its coverage check")
    return CoveringResult(k, r, eps, len(chosen), centers, certified, bound)
