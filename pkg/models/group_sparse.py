"""Group-sparse generative model on a rectangular latent domain.

Latent coordinate ``z_i`` in ``[-r, r]`` drives block ``i`` of the output.  The
range ``[-r, r]`` is split into ``n/k`` equal intervals; the interval that
contains ``z_i`` selects the non-zero position inside the block, and the
position of ``z_i`` inside that interval sets the amplitude through a
double-triangle shape (zero at both ends and at the midpoint, ``+x_max`` at the
quarter point, ``-x_max`` at the three-quarter point).

Signals are plain ``numpy`` float64 arrays of length ``n``.
"""

import logging
from dataclasses import dataclass, replace
from typing import Iterator, Sequence, Tuple

import numpy as np

from utils.validation import (
    InvalidInputError,
    as_vector,
    check_in_ball,
    check_in_cube,
    require_multiple,
    require_positive,
    require_positive_int,
)

logger = logging.getLogger(__name__)

DOMAIN_BALL = "ball"
DOMAIN_CUBE = "cube"


@dataclass(frozen=True)
class GenModelParams:
    n: int
    k: int
    r: float
    x_max: float

    def __post_init__(self):
        require_positive_int("n", self.n)
        require_positive_int("k", self.k)
        require_positive("r", self.r)
        require_positive("x_max", self.x_max)
        require_multiple(self.n, self.k)

    @property
    def block_len(self) -> int:
        return self.n // self.k

    @property
    def interval_len(self) -> float:
        return 2.0 * self.r * self.k / self.n

    def lipschitz(self) -> float:
        return 2.0 * self.n * self.x_max / (self.k * self.r)

    def with_radius(self, r: float) -> "GenModelParams":
        return replace(self, r=float(r))

    def interval_start(self, j: int) -> float:
        return -self.r + j * self.interval_len

    def interval_mid(self, j: int) -> float:
        return self.interval_start(j) + 0.5 * self.interval_len


@dataclass(frozen=True)
class SignedSupport:
    """
    One member of the hard family: per block, an in-block offset and a sign.

    Offsets are 0-based (``0 .. n/k - 1``); signs are ``+1`` or ``-1``.
    """

    offsets: Tuple[int, ...]
    signs: Tuple[int, ...]

    def materialize(self, n: int, xi: float) -> np.ndarray:
        k = len(self.offsets)
        block = require_multiple(n, k)
        x = np.zeros(n, dtype=np.float64)
        for i, (j, s) in enumerate(zip(self.offsets, self.signs)):
            if not 0 <= j < block or s not in (1, -1):
                raise InvalidInputError(f"invalid signed support entry ({j}, {s}) in block {i}")
            x[i * block + j] = s * xi
        return x

    def code(self) -> Tuple[int, ...]:
        """Per-block code ``2*offset + (0 if positive else 1)``; ordering key for tie-breaks."""
        return tuple(2 * j + (0 if s > 0 else 1) for j, s in zip(self.offsets, self.signs))


def lipschitz(params: GenModelParams) -> float:
    return params.lipschitz()


def _double_triangle(t: np.ndarray, x_max: float) -> np.ndarray:
    rising = 4.0 * t
    falling = 2.0 - 4.0 * t
    tail = 4.0 * t - 4.0
    return x_max * np.where(t <= 0.25, rising, np.where(t <= 0.75, falling, tail))


def interval_index(params: GenModelParams, Z) -> np.ndarray:
    """Sub-interval holding each latent coordinate, clipped to ``0 .. n/k - 1``."""
    idx = np.floor((np.asarray(Z, dtype=np.float64) + params.r) / params.interval_len).astype(np.int64)
    return np.clip(idx, 0, params.block_len - 1)


def _blocks_from_latent(params: GenModelParams, Z: np.ndarray) -> np.ndarray:
    h = params.interval_len
    B = params.block_len
    idx = interval_index(params, Z)
    t = (Z - (-params.r + idx * h)) / h
    t = np.clip(t, 0.0, 1.0)
    values = _double_triangle(t, params.x_max)

    N, k = Z.shape
    X = np.zeros((N, k, B), dtype=np.float64)
    rows = np.repeat(np.arange(N), k)
    cols = np.tile(np.arange(k), N)
    X[rows, cols, idx.reshape(-1)] = values.reshape(-1)
    return X.reshape(N, k * B)


def generate(params: GenModelParams, z) -> np.ndarray:
    """
    Evaluate the rectangular-domain generator.

    Args:
        params: Model parameters
        z: Latent vector of length k with ||z||_inf <= r

    Returns:
        Signal of length n with at most one non-zero entry per block
    """
    z = as_vector("z", z, params.k)
    check_in_cube("z", z, params.r)
    return _blocks_from_latent(params, z[None, :])[0]


def generate_batch(params: GenModelParams, Z) -> np.ndarray:
    """Evaluate the generator on every row of an ``(N, k)`` array."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != params.k:
        raise InvalidInputError(f"Z must have shape (N, {params.k}), got {Z.shape}")
    if Z.size and float(np.max(np.abs(Z))) > params.r:
        raise InvalidInputError(f"Z has rows outside ||z||_inf <= {params.r}")
    return _blocks_from_latent(params, Z)


def invert(params: GenModelParams, x) -> np.ndarray:
    """
    Canonical preimage of a group-sparse signal.

    Non-negative values use the rising edge of the positive triangle, negative
    values the segment right after the interval midpoint, and empty blocks map
    to ``-r``.

    Args:
        params: Model parameters
        x: Signal in S_k(x_max)

    Returns:
        Latent vector z with generate(params, z) == x
    """
    x = as_vector("x", x, params.n)
    if not is_group_sparse(x, params.k):
        raise InvalidInputError("x is not k-group-sparse")
    if float(np.max(np.abs(x))) > params.x_max:
        raise InvalidInputError(f"x exceeds x_max={params.x_max}")

    quarter = params.interval_len / 4.0
    blocks = x.reshape(params.k, params.block_len)
    z = np.full(params.k, -params.r, dtype=np.float64)
    for i, block in enumerate(blocks):
        nz = np.flatnonzero(block)
        if nz.size == 0:
            continue
        j = int(nz[0])
        v = float(block[j])
        if v >= 0:
            z[i] = params.interval_start(j) + (v / params.x_max) * quarter
        else:
            z[i] = params.interval_mid(j) + (-v / params.x_max) * quarter
        # a value next to zero puts z on the left edge, where rounding can pick interval j-1
        while interval_index(params, z[i]) < j:
            z[i] = np.nextafter(z[i], np.inf)
    return z


def generate_spherical(params: GenModelParams, z, domain: str = DOMAIN_BALL) -> np.ndarray:
    """
    Evaluate the spherical-domain generator.

    Each coordinate uses the rectangular map of radius ``r/sqrt(k)`` and gives a
    zero block whenever ``|z_i|`` falls outside ``[-r/sqrt(k), r/sqrt(k)]``.

    Args:
        params: Model parameters; ``params.r`` is the radius of the latent domain
        z: Latent vector of length k
        domain: ``"ball"`` accepts ||z||_2 <= r, ``"cube"`` accepts ||z||_inf <= r

    Returns:
        Signal of length n
    """
    z = as_vector("z", z, params.k)
    if domain == DOMAIN_BALL:
        check_in_ball("z", z, params.r)
    elif domain == DOMAIN_CUBE:
        check_in_cube("z", z, params.r)
    else:
        raise InvalidInputError(f"unknown domain {domain!r}; expected 'ball' or 'cube'")

    inner = spherical_inner_params(params)
    inside = np.abs(z) <= inner.r
    clipped = np.where(inside, z, -inner.r)
    x = _blocks_from_latent(inner, clipped[None, :])[0]
    mask = np.repeat(inside, params.block_len)
    return np.where(mask, x, 0.0)


def spherical_inner_params(params: GenModelParams) -> GenModelParams:
    """Rectangular parameters of the largest cube inside the ball of radius r."""
    return params.with_radius(params.r / np.sqrt(params.k))


def is_group_sparse(x, k: int) -> bool:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    require_positive_int("k", k)
    if x.shape[0] % k != 0:
        raise InvalidInputError(f"length {x.shape[0]} is not a multiple of k={k}")
    blocks = x.reshape(k, -1)
    return bool(np.all(np.count_nonzero(blocks, axis=1) <= 1))


def pad_to_multiple(x, k: int) -> np.ndarray:
    """Append trailing zeros so the length becomes a multiple of k."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    require_positive_int("k", k)
    extra = (-x.shape[0]) % k
    if extra:
        logger.debug(f"Padding signal of length {x.shape[0]} with {extra} zeros")
    return np.concatenate([x, np.zeros(extra)])


def random_signal(params: GenModelParams, rng: np.random.Generator) -> np.ndarray:
    """Draw a member of S_k(x_max): uniform position per block, uniform amplitude."""
    offsets = rng.integers(0, params.block_len, size=params.k)
    amps = rng.uniform(-params.x_max, params.x_max, size=params.k)
    x = np.zeros(params.n, dtype=np.float64)
    x[np.arange(params.k) * params.block_len + offsets] = amps
    return x


def signed_pattern_count(n: int, k: int) -> int:
    return (2 * require_multiple(n, k)) ** k


def patterns_from_codes(codes: np.ndarray, n: int, k: int) -> np.ndarray:
    """
    Materialize signed patterns (amplitude 1) from their mixed-radix codes.

    A code enumerates ``(2n/k)^k`` patterns with block 0 as the most significant
    digit; each digit is ``2*offset + (0 for +1, 1 for -1)``.  Increasing code
    order is lexicographic order on the per-block digits.

    Args:
        codes: 1-D integer array of codes in ``[0, (2n/k)^k)``
        n: Signal length
        k: Number of blocks

    Returns:
        Array of shape (len(codes), n)
    """
    block = require_multiple(n, k)
    radix = 2 * block
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros((codes.shape[0], n), dtype=np.float64)
    rest = codes.copy()
    rows = np.arange(codes.shape[0])
    for i in range(k - 1, -1, -1):
        digit = rest % radix
        rest //= radix
        out[rows, i * block + digit // 2] = np.where(digit % 2 == 0, 1.0, -1.0)
    return out


def iter_signed_supports(n: int, k: int) -> Iterator[SignedSupport]:
    """Yield every member of the hard family in code order."""
    block = require_multiple(n, k)
    radix = 2 * block
    for code in range(radix ** k):
        digits = []
        rest = code
        for _ in range(k):
            digits.append(rest % radix)
            rest //= radix
        digits.reverse()
        yield SignedSupport(
            offsets=tuple(d // 2 for d in digits),
            signs=tuple(1 if d % 2 == 0 else -1 for d in digits),
        )


def support_of(x: Sequence[float], k: int) -> SignedSupport:
    """Signed support of a signal with exactly one non-zero entry per block."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    blocks = x.reshape(k, -1)
    offsets, signs = [], []
    for i, block in enumerate(blocks):
        nz = np.flatnonzero(block)
        if nz.size != 1:
            raise InvalidInputError(f"block {i} has {nz.size} non-zeros, expected exactly 1")
        offsets.append(int(nz[0]))
        signs.append(1 if block[nz[0]] > 0 else -1)
    return SignedSupport(tuple(offsets), tuple(signs))
