"""The hard packing family of signed group-sparse patterns.

``V`` holds every length-``n`` vector with exactly one entry ``+1`` or ``-1``
per block of length ``n/k``.  Members are addressed by their mixed-radix code
(see ``models.group_sparse.patterns_from_codes``); Hamming distances are read
off the per-block digits without materializing the vectors: equal digits cost
0, same position with the other sign costs 1, a different position costs 2.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.metrics import pairwise_distances

from models.group_sparse import patterns_from_codes
from utils.validation import check_cap, require_multiple, require_positive_int

logger = logging.getLogger(__name__)

# All-pairs maximum is computed up to this family size; beyond it the count
# from one member is used (the family is symmetric under sign flips and
# in-block moves, which preserve Hamming distance).
ALL_PAIRS_LIMIT = 4096


@dataclass
class PackingStats:
    n: int
    k: int
    t: float
    log_V: float
    log_Nmax_bound: float
    log_Nmax_exact: float
    ratio_bound: float

    @property
    def ratio_holds(self) -> bool:
        return self.log_V - self.log_Nmax_exact >= self.ratio_bound

    @property
    def ratio_holds_bound(self) -> bool:
        return self.log_V - self.log_Nmax_bound >= self.ratio_bound

    def to_dict(self) -> dict:
        return {
            "log_V": self.log_V,
            "log_Nmax_bound": self.log_Nmax_bound,
            "log_Nmax_exact": self.log_Nmax_exact,
            "ratio_bound": self.ratio_bound,
            "ratio_holds": self.ratio_holds,
            "ratio_holds_bound": self.ratio_holds_bound,
        }


@dataclass(frozen=True)
class PackingSet:
    n: int
    k: int
    xi: float = 1.0
    t: Optional[float] = None

    def __post_init__(self):
        require_positive_int("n", self.n)
        require_positive_int("k", self.k)
        require_multiple(self.n, self.k)

    @property
    def threshold(self) -> float:
        return self.k / 2.0 if self.t is None else float(self.t)

    @property
    def size(self) -> int:
        return (2 * self.n // self.k) ** self.k

    @property
    def eps(self) -> float:
        """Separation radius ``xi * sqrt(t)`` of members farther apart than t."""
        return self.xi * math.sqrt(self.threshold)

    def members(self, cap: Optional[int] = None) -> np.ndarray:
        check_cap("packing family", self.size, cap if cap is not None else oracle_cap())
        return self.xi * patterns_from_codes(np.arange(self.size), self.n, self.k)


def oracle_cap() -> int:
    return int(float(os.getenv("GENSENSE_ORACLE_CAP", "100000")))


def log_family_size(n: int, k: int) -> float:
    require_multiple(n, k)
    return k * math.log(2.0 * n / k)


def nmax_exact(n: int, k: int, t: float) -> int:
    """
    Closed-form size of a Hamming ball of radius t inside V.

    A neighbour at distance ``a + 2b`` flips the sign in ``a`` blocks and moves
    the entry in ``b`` other blocks (``2(n/k - 1)`` choices each).
    """
    B = require_multiple(n, k)
    radius = int(math.floor(t))
    total = 0
    for a in range(0, min(k, radius) + 1):
        for b in range(0, min(k - a, (radius - a) // 2) + 1):
            total += math.comb(k, a) * math.comb(k - a, b) * (2 * (B - 1)) ** b
    return total


def packing_stats(n: int, k: int, t: Optional[float] = None) -> PackingStats:
    """
    Counting statistics of V.

    Args:
        n: Signal length, a multiple of k
        k: Number of blocks
        t: Hamming radius; defaults to k/2

    Returns:
        PackingStats with the analytic bound and the exact ball size
    """
    require_positive_int("n", n)
    require_positive_int("k", k)
    require_multiple(n, k)
    t = k / 2.0 if t is None else t
    log_V = log_family_size(n, k)
    log_nmax_bound = math.log(k) + (k / 2.0) * math.log(2.0) + (k / 2.0) * math.log(2.0 * math.e * n / k)
    return PackingStats(
        n=n,
        k=k,
        t=t,
        log_V=log_V,
        log_Nmax_bound=log_nmax_bound,
        log_Nmax_exact=math.log(nmax_exact(n, k, t)),
        ratio_bound=(k / 3.0) * math.log(n / k),
    )


def _digits(n: int, k: int) -> np.ndarray:
    radix = 2 * (n // k)
    codes = np.arange(radix ** k, dtype=np.int64)
    out = np.empty((codes.shape[0], k), dtype=np.int64)
    rest = codes
    for i in range(k - 1, -1, -1):
        out[:, i] = rest % radix
        rest = rest // radix
    return out


def _block_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a == b, 0, np.where(a // 2 == b // 2, 1, 2))


def nmax_oracle(n: int, k: int, t: float, cap: Optional[int] = None) -> int:
    """
    Largest Hamming ball of radius t in V, by enumeration.

    Args:
        n: Signal length
        k: Number of blocks
        t: Hamming radius
        cap: Largest family size to enumerate

    Returns:
        Max over members v of the number of members within distance t of v
    """
    require_multiple(n, k)
    size = (2 * n // k) ** k
    check_cap("packing family", size, cap if cap is not None else oracle_cap())
    digits = _digits(n, k)
    radius = math.floor(t)

    if size <= ALL_PAIRS_LIMIT:
        dist = np.zeros((size, size), dtype=np.int64)
        for i in range(k):
            dist += _block_distance(digits[:, i][:, None], digits[:, i][None, :])
        return int(np.max(np.count_nonzero(dist <= radius, axis=1)))

    dist = _block_distance(digits, digits[0][None, :]).sum(axis=1)
    return int(np.count_nonzero(dist <= radius))


def cov_V(n: int, k: int, cap: Optional[int] = None) -> np.ndarray:
    """Covariance of the uniform distribution on V, by enumeration (the mean is zero)."""
    members = PackingSet(n, k).members(cap)
    return members.T @ members / members.shape[0]


def packing_separation_holds(n: int, k: int, t: Optional[float] = None, xi: float = 1.0, cap: Optional[int] = None) -> bool:
    """Check exhaustively that members farther apart than t are more than ``xi*sqrt(t)`` apart."""
    family = PackingSet(n, k, xi=xi, t=t)
    check_cap("packing separation", family.size ** 2, cap if cap is not None else oracle_cap() * 100)
    members = family.members()
    digits = _digits(n, k)
    hamming = np.zeros((family.size, family.size), dtype=np.int64)
    for i in range(k):
        hamming += _block_distance(digits[:, i][:, None], digits[:, i][None, :])
    euclid = pairwise_distances(members, metric="euclidean")
    far = hamming > family.threshold + 1e-9
    ok = bool(np.all(euclid[far] > family.eps))
    if not ok:
        logger.warning(f"Packing separation fails for n={n}, k={k}, t={family.threshold}")
    return ok
