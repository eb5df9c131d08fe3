"""Recursive signed-pattern generator and its ReLU realizations.

One copy maps ``z`` in ``[0, 1]`` to a signed ``k0``-group-sparse vector of
length ``n0``.  With ``B = n0/k0`` positions per block and ``M = 2B`` choices
per scale, scale ``l`` reads the ``l``-th base-``M`` digit ``d`` of ``z``: block
``l`` gets ``+xi`` at position ``d // 2`` when ``d`` is even and ``-xi`` when it
is odd.  The finest cells (length ``M**-k0``) enumerate every signed pattern
exactly once.

Scale ``l`` needs ``M**(l-1)`` repetitions of the same pulse.  The three
regimes trade depth for width:

* ``wide``  - every pulse is a breakpoint of a shallow piecewise-linear map.
* ``deep``  - a tent-map sawtooth with a power-of-two number of teeth feeds a
  trapezoid shaper.
* ``mixed`` - a shallow zigzag with ``rho`` teeth is composed ``d/2 - 1`` times.

Pulses are trapezoids with ramps of ``transition_width`` finest cells inside
the pulse, so every finest-cell midpoint sees the exact pattern value.
"""

import logging
import math
import os
import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from models.relu import (
    PwlFunction,
    ReluNetwork,
    build_from_pwl,
    build_sawtooth,
    build_trapezoid_shaper,
    build_zigzag,
    compose,
    fanout,
    pad_to_depth,
    parallel,
    sum_networks,
    with_input_affine,
)
from utils.validation import InvalidInputError, require_multiple, require_positive, require_positive_int

logger = logging.getLogger(__name__)

REGIME_WIDE = "wide"
REGIME_DEEP = "deep"
REGIME_MIXED = "mixed"

_REGIME_RE = re.compile(r"^\s*(wide|deep|mixed)\s*(?:\(\s*(\d+)\s*\))?\s*$")


@dataclass(frozen=True)
class RecursiveGenParams:
    k: int
    k0: int
    n0: int
    xi: float
    transition_width: float = 0.25
    base_teeth: Optional[int] = None

    def __post_init__(self):
        require_positive_int("k", self.k)
        require_positive_int("k0", self.k0)
        require_positive_int("n0", self.n0)
        require_positive("xi", self.xi)
        require_multiple(self.n0, self.k0, "n0", "k0")
        if not 0.0 < self.transition_width < 0.5:
            raise InvalidInputError(
                f"transition_width must lie in (0, 1/2) of a finest cell, got {self.transition_width}"
            )
        if self.base_teeth is not None:
            require_positive_int("base_teeth", self.base_teeth)

    @property
    def block_len(self) -> int:
        return self.n0 // self.k0

    @property
    def radix(self) -> int:
        return 2 * self.block_len

    @property
    def n(self) -> int:
        return self.n0 * self.k

    @property
    def pattern_count(self) -> int:
        return self.radix ** self.k0

    @property
    def finest_cell(self) -> float:
        return 1.0 / self.pattern_count

    @property
    def transition(self) -> float:
        return self.transition_width * self.finest_cell

    def repetitions(self, scale: int) -> int:
        return self.radix ** (scale - 1)

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.pattern_count) + 0.5) / self.pattern_count

    def ideal(self, Z) -> np.ndarray:
        """
        Idealized (rectangular-pulse) output on ``[0, 1]^k``.

        Args:
            Z: Array of shape (N, k) or a single latent vector

        Returns:
            Array of shape (N, n), or (n,) for a single vector
        """
        Z = np.asarray(Z, dtype=np.float64)
        single = Z.ndim == 1
        Z = np.atleast_2d(Z)
        if Z.shape[1] != self.k:
            raise InvalidInputError(f"latent input must have {self.k} columns, got {Z.shape[1]}")
        N = Z.shape[0]
        B, M = self.block_len, self.radix
        out = np.zeros((N, self.k, self.n0), dtype=np.float64)
        rows = np.arange(N)
        for i in range(self.k):
            for scale in range(1, self.k0 + 1):
                d = np.floor(Z[:, i] * M ** scale).astype(np.int64) % M
                out[rows, i, (scale - 1) * B + d // 2] = np.where(d % 2 == 0, self.xi, -self.xi)
        out = out.reshape(N, self.n)
        return out[0] if single else out


@dataclass
class RegimeBudget:
    max_depth: int
    max_width: int

    def holds(self, net: ReluNetwork) -> bool:
        return net.depth <= self.max_depth and net.width <= self.max_width


def parse_regime(text: str) -> Tuple[str, Optional[int]]:
    """Parse ``"wide"``, ``"deep"`` or ``"mixed(d)"``."""
    match = _REGIME_RE.match(str(text))
    if not match:
        raise InvalidInputError(f"unknown regime {text!r}; expected wide, deep or mixed(d)")
    name, depth = match.group(1), match.group(2)
    if name == REGIME_MIXED and depth is None:
        raise InvalidInputError("mixed regime needs a depth, e.g. mixed(6)")
    if name != REGIME_MIXED and depth is not None:
        raise InvalidInputError(f"regime {name} takes no depth")
    if depth is not None:
        _check_mixed_depth(int(depth))
    return name, int(depth) if depth is not None else None


def _zigzag_teeth(rho: int, compositions: int) -> int:
    return (2 * rho) ** compositions // 2


def mixed_base_teeth(p: RecursiveGenParams, depth: int) -> int:
    """Teeth of the shallow zigzag so that ``d/2 - 1`` compositions cover the finest scale."""
    _check_mixed_depth(depth)
    s = depth // 2 - 1
    target = p.repetitions(p.k0)
    if p.base_teeth is not None:
        if _zigzag_teeth(p.base_teeth, s) < target:
            raise InvalidInputError(
                f"base_teeth={p.base_teeth} gives {_zigzag_teeth(p.base_teeth, s)} teeth "
                f"after {s} compositions, need {target}"
            )
        return p.base_teeth
    rho = max(1, int(math.floor((2 * target) ** (1.0 / s) / 2)))
    while rho > 1 and _zigzag_teeth(rho - 1, s) >= target:
        rho -= 1
    while _zigzag_teeth(rho, s) < target:
        rho += 1
    return rho


def _check_mixed_depth(depth: Optional[int]) -> None:
    if depth is None or depth < 4 or depth % 2 != 0:
        raise InvalidInputError(f"mixed regime needs an even depth >= 4, got {depth}")


def regime_budget(p: RecursiveGenParams, regime: str, depth: Optional[int] = None) -> RegimeBudget:
    """Closed-form depth and width budgets of each construction."""
    if regime == REGIME_WIDE:
        return RegimeBudget(max_depth=2, max_width=9 * p.k * p.pattern_count)
    if regime == REGIME_DEEP:
        doublings = (p.repetitions(p.k0) - 1).bit_length()
        return RegimeBudget(max_depth=2 * doublings + 4, max_width=6 * p.n)
    if regime == REGIME_MIXED:
        rho = mixed_base_teeth(p, depth)
        return RegimeBudget(max_depth=depth, max_width=p.n * (4 * rho + 2))
    raise InvalidInputError(f"unknown regime {regime!r}")


def _pulses(p: RecursiveGenParams, scale: int, digit: int):
    """Pulse ends in units of finest cells."""
    M = p.radix
    cells = M ** (p.k0 - scale)
    for q in range(p.repetitions(scale)):
        start = (q * M + digit) * cells
        yield start, start + cells


def _wide_output(p: RecursiveGenParams, scale: int, position: int) -> ReluNetwork:
    # keys are (cell boundary, ramp direction) so shared pulse ends merge exactly
    points = {}
    for digit, height in ((2 * position, p.xi), (2 * position + 1, -p.xi)):
        for start, end in _pulses(p, scale, digit):
            points[(start, 0)] = 0.0
            points[(start, 1)] = height
            points[(end, -1)] = height
            points[(end, 0)] = 0.0
    keys = sorted(points, key=lambda key: key[0] + key[1] * p.transition_width)
    xs = tuple((a + b * p.transition_width) * p.finest_cell for a, b in keys)
    return build_from_pwl(PwlFunction(xs, tuple(points[key] for key in keys)))


def _shaped_branch(p: RecursiveGenParams, scale: int, digit: int, teeth_net: ReluNetwork, teeth: int) -> ReluNetwork:
    M = p.radix
    reps = p.repetitions(scale)
    period = 1.0 / reps
    centre = (digit + 0.5) / M
    phase = (0.5 - centre) * period
    stretch = reps / teeth
    ramp = 2.0 * p.transition * reps
    height = p.xi if digit % 2 == 0 else -p.xi
    shaper = build_trapezoid_shaper(1.0, 1.0 / M - ramp, height, ramp=ramp)
    return with_input_affine(compose(shaper, teeth_net), [[stretch]], [phase * stretch])


def _deep_teeth(p: RecursiveGenParams, scale: int) -> Tuple[ReluNetwork, int]:
    teeth = 1 << (p.repetitions(scale) - 1).bit_length()
    return build_sawtooth(teeth), teeth


def _mixed_teeth(p: RecursiveGenParams, scale: int, rho: int) -> Tuple[ReluNetwork, int]:
    base = build_zigzag(rho)
    net, compositions = base, 1
    while _zigzag_teeth(rho, compositions) < p.repetitions(scale):
        net = compose(base, net)
        compositions += 1
    return net, _zigzag_teeth(rho, compositions)


def build_recursive_generator(p: RecursiveGenParams, regime: str = REGIME_WIDE, depth: Optional[int] = None) -> ReluNetwork:
    """
    Build the ReLU network of the recursive generator.

    Args:
        p: Generator parameters
        regime: ``"wide"``, ``"deep"``, ``"mixed"`` or ``"mixed(d)"``
        depth: Target depth for the mixed regime

    Returns:
        Network with input dim k and output dim n0 * k
    """
    if regime not in (REGIME_WIDE, REGIME_DEEP, REGIME_MIXED):
        regime, parsed_depth = parse_regime(regime)
        depth = depth if depth is not None else parsed_depth
    c0 = float(os.getenv("GENSENSE_C0", "4"))
    if p.n0 < c0 * p.k0:
        logger.warning(f"n0={p.n0} < C0*k0={c0 * p.k0}: packing lower bounds do not apply to this copy")

    rho = None
    if regime == REGIME_MIXED:
        rho = mixed_base_teeth(p, depth)

    teeth_cache = {}
    outputs = []
    for scale in range(1, p.k0 + 1):
        for position in range(p.block_len):
            if regime == REGIME_WIDE:
                outputs.append(_wide_output(p, scale, position))
                continue
            if scale not in teeth_cache:
                if regime == REGIME_DEEP:
                    teeth_cache[scale] = _deep_teeth(p, scale)
                else:
                    teeth_cache[scale] = _mixed_teeth(p, scale, rho)
            teeth_net, teeth = teeth_cache[scale]
            branches = [
                _shaped_branch(p, scale, 2 * position, teeth_net, teeth),
                _shaped_branch(p, scale, 2 * position + 1, teeth_net, teeth),
            ]
            outputs.append(sum_networks(branches))

    copy = fanout(outputs)
    if regime == REGIME_MIXED:
        copy = pad_to_depth(copy, depth)
    net = parallel([copy] * p.k)
    logger.info(
        f"Built recursive generator ({regime}{'' if depth is None else f'({depth})'}): "
        f"k={p.k}, k0={p.k0}, n0={p.n0}, depth={net.depth}, width={net.width}"
    )
    return net
