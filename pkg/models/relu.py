"""Explicit ReLU networks.

A network is an ordered list of ``(W, b)`` layers.  Every layer applies
``max(W h + b, 0)`` except the last one when ``final_layer_linear`` is set, in
which case the last layer is affine (it still counts as a layer).  Depth is the
number of layers and width is the largest layer output size.

The combinators below keep depth bookkeeping exact:

* ``compose`` adds depths.  A linear final layer of the inner network is split
  into a ``(relu(u), relu(-u))`` pair and the outer network reads ``p - q``.
* ``parallel``/``fanout``/``sum_networks`` pad shorter branches with identity
  layers up to the deepest branch.
"""

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.group_sparse import GenModelParams
from utils.validation import InvalidInputError, require_positive

logger = logging.getLogger(__name__)

Layer = Tuple[np.ndarray, np.ndarray]

JSON_FORMAT = "relu-network/v1"


@dataclass(frozen=True)
class ReluNetwork:
    layers: Tuple[Layer, ...]
    final_layer_linear: bool = True

    def __post_init__(self):
        if not self.layers:
            raise InvalidInputError("a network needs at least one layer")
        normalized = []
        prev = None
        for l, (W, b) in enumerate(self.layers):
            W = np.array(W, dtype=np.float64, ndmin=2)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if W.shape[0] != b.shape[0]:
                raise InvalidInputError(f"layer {l}: {W.shape[0]} rows but {b.shape[0]} offsets")
            if prev is not None and W.shape[1] != prev:
                raise InvalidInputError(f"layer {l}: expects {W.shape[1]} inputs, previous layer has {prev}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {l}: non-finite weights or offsets")
            W.setflags(write=False)
            b.setflags(write=False)
            normalized.append((W, b))
            prev = W.shape[0]
        object.__setattr__(self, "layers", tuple(normalized))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        return max(W.shape[0] for W, _ in self.layers)

    @property
    def max_weight(self) -> float:
        return max(float(np.max(np.abs(W))) if W.size else 0.0 for W, _ in self.layers)

    @property
    def max_offset(self) -> float:
        return max(float(np.max(np.abs(b))) if b.size else 0.0 for _, b in self.layers)

    def forward(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        if z.shape[0] != self.input_dim:
            raise InvalidInputError(f"input has length {z.shape[0]}, network expects {self.input_dim}")
        return self.forward_batch(z[None, :])[0]

    def forward_batch(self, Z) -> np.ndarray:
        H = np.asarray(Z, dtype=np.float64)
        if H.ndim != 2 or H.shape[1] != self.input_dim:
            raise InvalidInputError(f"batch must have shape (N, {self.input_dim}), got {H.shape}")
        last = self.depth - 1
        for l, (W, b) in enumerate(self.layers):
            H = H @ W.T + b
            if l < last or not self.final_layer_linear:
                H = np.maximum(H, 0.0)
        return H


@dataclass(frozen=True)
class PwlFunction:
    """Continuous piecewise-linear function of one variable given by its breakpoints."""

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    constant_left: bool = True
    constant_right: bool = True

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=np.float64)
        y = np.asarray(self.values, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or x.shape[0] < 2:
            raise InvalidInputError("need at least two breakpoints with one value each")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("breakpoints and values must be finite")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", tuple(float(v) for v in x))
        object.__setattr__(self, "values", tuple(float(v) for v in y))

    @property
    def pieces(self) -> int:
        return len(self.breakpoints) - 1

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        x = np.asarray(self.breakpoints)
        y = np.asarray(self.values)
        out = np.interp(z, x, y)
        s = self.slopes()
        if not self.constant_left:
            out = np.where(z < x[0], y[0] + s[0] * (z - x[0]), out)
        if not self.constant_right:
            out = np.where(z > x[-1], y[-1] + s[-1] * (z - x[-1]), out)
        return out


@dataclass
class BuilderLimits:
    x_max_cap: float
    weight_cap: float
    offset_cap: float

    @classmethod
    def from_env(cls) -> "BuilderLimits":
        return cls(
            x_max_cap=float(os.getenv("GENSENSE_XMAX_CAP", "1.0")),
            weight_cap=float(os.getenv("GENSENSE_WEIGHT_CAP", "4.0")),
            offset_cap=float(os.getenv("GENSENSE_OFFSET_CAP", "4.0")),
        )


@dataclass
class NetworkStats:
    depth: int
    width: int
    max_weight: float
    max_offset: float
    breakpoints: Optional[Tuple[int, ...]] = None
    pieces: Optional[Tuple[int, ...]] = None

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "width": self.width,
            "max_weight": self.max_weight,
            "max_offset": self.max_offset,
            "breakpoints": list(self.breakpoints) if self.breakpoints is not None else None,
            "pieces": list(self.pieces) if self.pieces is not None else None,
        }


def forward(net: ReluNetwork, z) -> np.ndarray:
    return net.forward(z)


def forward_batch(net: ReluNetwork, Z) -> np.ndarray:
    return net.forward_batch(Z)


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------

def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(B.shape[0] for B in blocks)
    cols = sum(B.shape[1] for B in blocks)
    out = np.zeros((rows, cols), dtype=np.float64)
    r = c = 0
    for B in blocks:
        out[r:r + B.shape[0], c:c + B.shape[1]] = B
        r += B.shape[0]
        c += B.shape[1]
    return out


def _split_final(net: ReluNetwork) -> List[Layer]:
    """Layers of a linear-final network with the last layer emitting (relu(u), relu(-u))."""
    W, b = net.layers[-1]
    return list(net.layers[:-1]) + [(np.vstack([W, -W]), np.concatenate([b, -b]))]


def to_linear_final(net: ReluNetwork) -> ReluNetwork:
    """Return an equivalent network whose last layer is affine."""
    if net.final_layer_linear:
        return net
    dim = net.output_dim
    return ReluNetwork(net.layers + ((np.eye(dim), np.zeros(dim)),), final_layer_linear=True)


def pad_to_depth(net: ReluNetwork, depth: int) -> ReluNetwork:
    """
    Extend a network with identity layers until it has the requested depth.

    ReLU-final outputs are non-negative, so identity ReLU layers suffice.  For an
    affine output the value is carried as the pair ``(relu(u), relu(-u))``, which
    survives ReLU layers, and recombined as ``p - q`` by a closing affine layer.

    Args:
        net: Network to pad
        depth: Target depth, at least ``net.depth``

    Returns:
        A network computing the same function with exactly ``depth`` layers
    """
    if depth < net.depth:
        raise InvalidInputError(f"cannot pad a depth-{net.depth} network down to depth {depth}")
    extra = depth - net.depth
    if extra == 0:
        return net
    dim = net.output_dim
    eye = np.eye(dim)
    if not net.final_layer_linear:
        return ReluNetwork(net.layers + ((eye, np.zeros(dim)),) * extra, final_layer_linear=False)

    layers = _split_final(net)
    carry = np.block([[eye, -eye], [-eye, eye]])
    layers += [(carry, np.zeros(2 * dim))] * (extra - 1)
    layers.append((np.hstack([eye, -eye]), np.zeros(dim)))
    return ReluNetwork(tuple(layers), final_layer_linear=True)


def compose(outer: ReluNetwork, inner: ReluNetwork) -> ReluNetwork:
    """Network computing ``outer(inner(z))`` with depth ``outer.depth + inner.depth``."""
    if outer.input_dim != inner.output_dim:
        raise InvalidInputError(
            f"cannot compose: outer expects {outer.input_dim} inputs, inner emits {inner.output_dim}"
        )
    V, c = outer.layers[0]
    if inner.final_layer_linear:
        head = _split_final(inner)
        first = (np.hstack([V, -V]), c)
    else:
        head = list(inner.layers)
        first = (V, c)
    return ReluNetwork(tuple(head) + (first,) + outer.layers[1:], final_layer_linear=outer.final_layer_linear)


def _stack(nets: Sequence[ReluNetwork], shared_input: bool) -> ReluNetwork:
    if not nets:
        raise InvalidInputError("need at least one network")
    nets = list(nets)
    if shared_input and len({n.input_dim for n in nets}) != 1:
        raise InvalidInputError("fanout/sum require networks with the same input dimension")
    if len({n.final_layer_linear for n in nets}) > 1:
        nets = [to_linear_final(n) for n in nets]
    depth = max(n.depth for n in nets)
    nets = [pad_to_depth(n, depth) for n in nets]

    layers = []
    for l in range(depth):
        Ws = [n.layers[l][0] for n in nets]
        bs = [n.layers[l][1] for n in nets]
        W = np.vstack(Ws) if (l == 0 and shared_input) else _block_diag(Ws)
        layers.append((W, np.concatenate(bs)))
    return ReluNetwork(tuple(layers), final_layer_linear=nets[0].final_layer_linear)


def parallel(nets: Sequence[ReluNetwork]) -> ReluNetwork:
    """Block-diagonal stacking: inputs and outputs are concatenated in order."""
    return _stack(nets, shared_input=False)


def fanout(nets: Sequence[ReluNetwork]) -> ReluNetwork:
    """Stack networks that read the same input; outputs are concatenated."""
    return _stack(nets, shared_input=True)


def sum_networks(nets: Sequence[ReluNetwork]) -> ReluNetwork:
    """Network computing the sum of several networks, added in the final layer."""
    if not nets:
        raise InvalidInputError("need at least one network")
    if len({n.output_dim for n in nets}) != 1:
        raise InvalidInputError("sum requires networks with the same output dimension")
    stacked = _stack([to_linear_final(n) for n in nets], shared_input=True)
    dim = nets[0].output_dim
    S = np.hstack([np.eye(dim)] * len(nets))
    W, b = stacked.layers[-1]
    return ReluNetwork(stacked.layers[:-1] + ((S @ W, S @ b),), final_layer_linear=True)


def with_input_affine(net: ReluNetwork, A, c) -> ReluNetwork:
    """Precompose ``z -> A z + c`` into the first layer; depth is unchanged."""
    A = np.array(A, dtype=np.float64, ndmin=2)
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    W, b = net.layers[0]
    if A.shape[0] != net.input_dim or c.shape[0] != net.input_dim:
        raise InvalidInputError(f"affine map must produce {net.input_dim} values")
    return ReluNetwork(((W @ A, W @ c + b),) + net.layers[1:], final_layer_linear=net.final_layer_linear)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_from_pwl(f: PwlFunction, gain: float = 1.0) -> ReluNetwork:
    """
    Realize a one-dimensional piecewise-linear function with one hidden layer.

    Each breakpoint ``x_i`` gets a hidden unit ``relu(gain * (z - x_i))`` whose
    output weight is the slope change at ``x_i`` divided by ``gain``.  A linear
    left extension adds one more unit ``relu(gain * (x_0 - z))``.

    Args:
        f: Function to realize
        gain: Hidden-layer weight magnitude; trades hidden weights against output weights

    Returns:
        Depth-2 network with an affine output layer
    """
    gain = require_positive("gain", gain)
    x = np.asarray(f.breakpoints)
    s = f.slopes()
    right = 0.0 if f.constant_right else s[-1]
    coeff = np.diff(np.concatenate([[0.0], s, [right]]))

    W1 = [gain] * len(x)
    b1 = list(-gain * x)
    out = list(coeff / gain)
    if not f.constant_left and s[0] != 0.0:
        W1.append(-gain)
        b1.append(gain * x[0])
        out.append(-s[0] / gain)

    keep = [i for i, w in enumerate(out) if w != 0.0] or [0]
    W1 = np.array([W1[i] for i in keep]).reshape(-1, 1)
    b1 = np.array([b1[i] for i in keep])
    W2 = np.array([[out[i] for i in keep]])
    b2 = np.array([f.values[0]])
    return ReluNetwork(((W1, b1), (W2, b2)), final_layer_linear=True)


def double_triangle_pwl(half_width: float, x_max: float, center: float = 0.0) -> PwlFunction:
    """Double triangle over ``[center - half_width, center + half_width]``, zero outside."""
    s = half_width
    return PwlFunction(
        breakpoints=(center - s, center - s / 2, center + s / 2, center + s),
        values=(0.0, x_max, -x_max, 0.0),
    )


def build_f(r: float, x_max: float = 1.0) -> ReluNetwork:
    """Double-triangle shaper over ``[-r, r]`` with hidden weights 2."""
    r = require_positive("r", r)
    return build_from_pwl(double_triangle_pwl(r, x_max), gain=2.0)


def build_g(r: float) -> ReluNetwork:
    """``g(z) = clip(2z, -r, r)`` as ``-r + 2 relu(z + r/2) - 2 relu(z - r/2)``."""
    r = require_positive("r", r)
    W1 = np.array([[1.0], [1.0]])
    b1 = np.array([r / 2, -r / 2])
    W2 = np.array([[2.0, -2.0]])
    b2 = np.array([-r])
    return ReluNetwork(((W1, b1), (W2, b2)), final_layer_linear=True)


def deep_compositions(params: GenModelParams) -> int:
    """Number of doubling maps used by the deep double-triangle network."""
    ratio = params.n / (2.0 * params.r * params.k)
    if ratio < 1.0:
        raise InvalidInputError(
            f"n/(2rk) = {ratio:.6g} < 1: the doubling construction needs n >= 2rk"
        )
    return min(math.ceil(math.log2(ratio) - 1e-12), int(math.floor(math.log2(params.block_len))))


def build_double_triangle_deep(params: GenModelParams, limits: Optional[BuilderLimits] = None) -> ReluNetwork:
    """
    Deep, narrow ReLU realization of the rectangular group-sparse generator.

    Each output entry shifts its interval centre to the origin, stretches the
    interval with D doubling maps ``g`` and finishes with the double-triangle
    shaper ``f``.  Points outside the interval are pushed past the shaper's
    support by the doubling maps, so they land on zero.

    Args:
        params: Generator parameters
        limits: Weight, offset and amplitude caps (defaults read from the environment)

    Returns:
        Network with input dim k, output dim n and depth 2D + 2
    """
    limits = limits or BuilderLimits.from_env()
    if params.x_max > limits.x_max_cap:
        raise InvalidInputError(f"x_max={params.x_max} exceeds the configured cap {limits.x_max_cap}")
    D = deep_compositions(params)
    h = params.interval_len
    span = (2 ** D) * h / 2.0

    chain = build_from_pwl(double_triangle_pwl(span, params.x_max), gain=2.0)
    g = build_g(params.r)
    for _ in range(D):
        chain = compose(chain, g)

    entries = []
    for j in range(params.block_len):
        centre = params.interval_start(j) + h / 2.0
        entries.append(with_input_affine(chain, [[1.0]], [-centre]))
    per_coordinate = fanout(entries)
    net = parallel([per_coordinate] * params.k)

    if net.max_weight > limits.weight_cap + 1e-12:
        raise InvalidInputError(f"weight {net.max_weight:.6g} exceeds cap {limits.weight_cap} at r={params.r}")
    if net.max_offset > limits.offset_cap * params.r + 1e-12:
        raise InvalidInputError(
            f"offset {net.max_offset:.6g} exceeds cap {limits.offset_cap}*r at r={params.r}"
        )
    logger.info(
        f"Built deep double-triangle network: n={params.n}, k={params.k}, D={D}, "
        f"depth={net.depth}, width={net.width}"
    )
    return net


def build_tent() -> ReluNetwork:
    """Tent map on [0, 1]: ``2 relu(z) - 4 relu(z - 1/2) + 2 relu(z - 1)``."""
    W1 = np.array([[1.0], [1.0], [1.0]])
    b1 = np.array([0.0, -0.5, -1.0])
    W2 = np.array([[2.0, -4.0, 2.0]])
    return ReluNetwork(((W1, b1), (W2, np.zeros(1))), final_layer_linear=True)


def build_sawtooth(R: int) -> ReluNetwork:
    """
    Sawtooth with R teeth on [0, 1], built by composing the tent map.

    Args:
        R: Number of teeth, a power of two

    Returns:
        Width-3 network of depth ``2 log2(R) + 2``; zero outside [0, 1]
    """
    if isinstance(R, bool) or int(R) != R or R < 1 or (int(R) & (int(R) - 1)) != 0:
        raise InvalidInputError(f"R must be a power of two, got {R!r}")
    t = int(R).bit_length() - 1
    tent = build_tent()
    net = tent
    for _ in range(t):
        net = compose(tent, net)
    return net


def build_zigzag(teeth: int) -> ReluNetwork:
    """Shallow sawtooth with the given number of teeth, one hidden unit per breakpoint."""
    if teeth < 1:
        raise InvalidInputError(f"teeth must be >= 1, got {teeth}")
    xs = tuple(i / (2 * teeth) for i in range(2 * teeth + 1))
    ys = tuple(float(i % 2) for i in range(2 * teeth + 1))
    return build_from_pwl(PwlFunction(xs, ys))


def build_trapezoid_shaper(width: float, plateau: float, height: float, ramp: Optional[float] = None) -> ReluNetwork:
    """
    Shaper ``height * clip((u - (width - plateau - ramp)) / ramp, 0, 1)``.

    Applied to a tent of unit height, it keeps the top ``plateau`` fraction of
    each tooth at ``height`` and ramps linearly to zero over ``ramp``.

    Args:
        width: Tooth width in tent units
        plateau: Length of the flat top, ``0 < plateau < width``
        height: Plateau value (may be negative)
        ramp: Ramp length; defaults to ``width - plateau``

    Returns:
        Depth-2 network
    """
    if not (0.0 < plateau < width):
        raise InvalidInputError(f"need 0 < plateau < width, got plateau={plateau}, width={width}")
    if ramp is None:
        ramp = width - plateau
    if ramp <= 0.0 or plateau + ramp > width + 1e-15:
        raise InvalidInputError(f"ramp={ramp} must be positive and fit inside width - plateau")
    start = max(width - plateau - ramp, 0.0)
    W1 = np.array([[1.0], [1.0]])
    b1 = np.array([-start, -(start + ramp)])
    W2 = np.array([[height / ramp, -height / ramp]])
    return ReluNetwork(((W1, b1), (W2, np.zeros(1))), final_layer_linear=True)


# ---------------------------------------------------------------------------
# Accounting and serialization
# ---------------------------------------------------------------------------

def _count_breakpoints(net: ReluNetwork, lo: float, hi: float, grid_exponent: int, tol: float) -> np.ndarray:
    xs = np.linspace(lo, hi, 2 ** grid_exponent + 1)
    ys = net.forward_batch(xs[:, None])
    slopes = np.diff(ys, axis=0) / (xs[1] - xs[0])
    jumps = np.abs(np.diff(slopes, axis=0))
    scale = np.maximum(1.0, np.max(np.abs(slopes), axis=0))
    flagged = jumps > tol * scale

    counts = []
    for o in range(net.output_dim):
        idx = np.flatnonzero(flagged[:, o])
        # A breakpoint strictly inside a grid cell flags two neighbouring indices.
        clusters = 0 if idx.size == 0 else 1 + int(np.count_nonzero(np.diff(idx) > 1))
        counts.append(clusters + 2)
    return np.array(counts)


def stats(
    net: ReluNetwork,
    count_pieces: Optional[bool] = None,
    lo: float = 0.0,
    hi: float = 1.0,
    grid_exponent: int = 16,
    tol: float = 1e-6,
) -> NetworkStats:
    """
    Structural accounting of a network.

    Breakpoints are counted on ``[lo, hi]`` by finite differences over a
    ``2**grid_exponent`` grid, endpoints included; pieces are breakpoints - 1.

    Args:
        net: Network to inspect
        count_pieces: Count breakpoints; defaults to True for one-dimensional inputs
        lo: Left end of the counting interval
        hi: Right end of the counting interval
        grid_exponent: Log2 of the number of grid cells
        tol: Relative slope-change threshold

    Returns:
        NetworkStats
    """
    if count_pieces is None:
        count_pieces = net.input_dim == 1
    result = NetworkStats(net.depth, net.width, net.max_weight, net.max_offset)
    if count_pieces:
        if net.input_dim != 1:
            raise InvalidInputError(f"piece counting needs a 1-D input, network has {net.input_dim}")
        bps = _count_breakpoints(net, lo, hi, grid_exponent, tol)
        result.breakpoints = tuple(int(b) for b in bps)
        result.pieces = tuple(int(b) - 1 for b in bps)
    return result


def to_json(net: ReluNetwork) -> str:
    payload = {
        "format": JSON_FORMAT,
        "final_layer_linear": net.final_layer_linear,
        "layers": [
            {
                "weights": [[float(v).hex() for v in row] for row in W],
                "offsets": [float(v).hex() for v in b],
            }
            for W, b in net.layers
        ],
    }
    return json.dumps(payload, indent=1)


def from_json(text: str) -> ReluNetwork:
    try:
        payload = json.loads(text)
        if payload.get("format") != JSON_FORMAT:
            raise InvalidInputError(f"unsupported network format {payload.get('format')!r}")
        layers = []
        for layer in payload["layers"]:
            W = np.array([[float.fromhex(v) for v in row] for row in layer["weights"]], dtype=np.float64)
            b = np.array([float.fromhex(v) for v in layer["offsets"]], dtype=np.float64)
            layers.append((W.reshape(b.shape[0], -1), b))
        return ReluNetwork(tuple(layers), final_layer_linear=bool(payload["final_layer_linear"]))
    except InvalidInputError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"malformed network JSON: {e}")
