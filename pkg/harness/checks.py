"""End-to-end verification suites for the constructions and bounds.

Each check returns a ``CheckResult``: a pass/fail flag, the reason for a
failure and a flat dictionary of metrics that becomes one CSV row.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from models.group_sparse import GenModelParams, generate_batch
from models.recursive import REGIME_MIXED, RecursiveGenParams, build_recursive_generator, parse_regime, regime_budget
from models.relu import build_double_triangle_deep, build_sawtooth, stats
from theory.covering import covering_oracle
from theory.minimax import fano_chain, minimax_lower
from theory.packing import PackingSet, cov_V, nmax_oracle, packing_separation_holds, packing_stats
from utils.rng import Purpose, substream
from utils.validation import check_cap

logger = logging.getLogger(__name__)

EQUALITY_TOL = 1e-9
PAIR_CHUNK = 10000


@dataclass
class CheckResult:
    ok: bool
    metrics: Dict[str, object] = field(default_factory=dict)
    reason: Optional[str] = None


def _failures(conditions: Dict[str, bool]) -> Optional[str]:
    failed = [name for name, passed in conditions.items() if not passed]
    return ", ".join(failed) if failed else None


def lipschitz_check(params: GenModelParams, pairs: int, seed: int, adversarial: int = 100) -> CheckResult:
    """
    Empirical Lipschitz ratios of the rectangular generator.

    Random pairs are drawn uniformly from the cube.  Adversarial pairs share
    every coordinate except one, which moves inside the rising edge of a
    single sub-interval where the slope is exactly L.

    Args:
        params: Generator parameters
        pairs: Number of random pairs
        seed: Experiment seed
        adversarial: Number of same-sub-interval pairs

    Returns:
        CheckResult with the largest random ratio and the smallest adversarial ratio
    """
    L = params.lipschitz()
    rng = substream(seed, Purpose.LIPSCHITZ, 0)
    worst = 0.0
    violations = 0
    done = 0
    while done < pairs:
        size = min(PAIR_CHUNK, pairs - done)
        Z1 = rng.uniform(-params.r, params.r, size=(size, params.k))
        Z2 = rng.uniform(-params.r, params.r, size=(size, params.k))
        dz = np.linalg.norm(Z1 - Z2, axis=1)
        dx = np.linalg.norm(generate_batch(params, Z1) - generate_batch(params, Z2), axis=1)
        keep = dz > 0
        ratios = dx[keep] / dz[keep]
        if ratios.size:
            worst = max(worst, float(np.max(ratios)))
            violations += int(np.count_nonzero(ratios > L * (1.0 + EQUALITY_TOL)))
        done += size

    rng = substream(seed, Purpose.LIPSCHITZ, 1)
    h = params.interval_len
    base = rng.uniform(-params.r, params.r, size=(adversarial, params.k))
    coord = rng.integers(0, params.k, size=adversarial)
    interval = rng.integers(0, params.block_len, size=adversarial)
    offsets = np.sort(rng.uniform(0.05, 0.95, size=(adversarial, 2)) * (h / 4.0), axis=1)
    start = -params.r + interval * h
    Z1 = base.copy()
    Z2 = base.copy()
    rows = np.arange(adversarial)
    Z1[rows, coord] = start + offsets[:, 0]
    Z2[rows, coord] = start + offsets[:, 1]
    dz = np.linalg.norm(Z1 - Z2, axis=1)
    dx = np.linalg.norm(generate_batch(params, Z1) - generate_batch(params, Z2), axis=1)
    adversarial_min = float(np.min(dx / dz))

    conditions = {
        "no_violations": violations == 0,
        "adversarial_tight": adversarial_min >= (1.0 - EQUALITY_TOL) * L,
    }
    metrics = {
        "L": L,
        "pairs": pairs,
        "max_ratio": worst,
        "violations": violations,
        "adversarial_min_ratio": adversarial_min,
    }
    return CheckResult(all(conditions.values()), metrics, _failures(conditions))


def _latent_grid(params: GenModelParams, per_interval: int = 64) -> np.ndarray:
    h = params.interval_len
    points = [-params.r + j * h + (i / per_interval) * h
              for j in range(params.block_len) for i in range(per_interval)]
    points.append(params.r)
    return np.array(points)


def double_triangle_check(n: int, k: int, r: float, x_max: float = 1.0) -> CheckResult:
    """Compare the deep ReLU realization with the direct generator on a dense grid."""
    params = GenModelParams(n, k, r, x_max)
    net = build_double_triangle_deep(params)
    axis = _latent_grid(params)
    Z = np.repeat(axis[:, None], k, axis=1)
    if k > 1:
        Z[:, 1:] = np.roll(axis, 7)[:, None]
    err = float(np.max(np.abs(net.forward_batch(Z) - generate_batch(params, Z))))
    conditions = {
        "equality": err <= EQUALITY_TOL,
        "weights": net.max_weight <= 4.0 + 1e-12,
        "offsets": net.max_offset <= 4.0 * r + 1e-12,
    }
    metrics = {
        "construction": "double_triangle",
        "max_error": err,
        "depth": net.depth,
        "width": net.width,
        "max_weight": net.max_weight,
        "max_offset": net.max_offset,
    }
    return CheckResult(all(conditions.values()), metrics, _failures(conditions))


def sawtooth_check(R: int) -> CheckResult:
    net = build_sawtooth(R)
    info = stats(net)
    breakpoints = info.breakpoints[0]
    conditions = {
        "breakpoints": breakpoints == 2 * R + 1,
        "width": info.width <= 3,
        "depth": info.depth <= 2 * math.log2(R) + 2,
    }
    metrics = {
        "construction": "sawtooth",
        "R": R,
        "breakpoints": breakpoints,
        "depth": info.depth,
        "width": info.width,
        "max_weight": info.max_weight,
    }
    return CheckResult(all(conditions.values()), metrics, _failures(conditions))


def signed_patterns(k0: int, n0: int, xi: float) -> set:
    """All signed k0-group-sparse patterns of magnitude xi, enumerated block by block."""
    B = n0 // k0
    patterns = set()
    choices = [(j, s) for j in range(B) for s in (1, -1)]
    for combo in itertools.product(choices, repeat=k0):
        x = [0.0] * n0
        for block, (j, s) in enumerate(combo):
            x[block * B + j] = s * xi
        patterns.add(tuple(x))
    return patterns


def recursive_check(k0: int, n0: int, regime: str, xi: float = 1.0, k: int = 1) -> CheckResult:
    """
    Pattern bijection and budget check for the recursive generator.

    The network is evaluated at every finest-cell midpoint of one copy; the
    rounded outputs must hit each signed pattern exactly once.
    """
    name, depth = parse_regime(regime)
    p = RecursiveGenParams(k=k, k0=k0, n0=n0, xi=xi)
    check_cap("recursive midpoints", p.pattern_count ** k, 10 ** 6)
    net = build_recursive_generator(p, name, depth)
    budget = regime_budget(p, name, depth)

    mids = p.midpoints()
    mesh = np.meshgrid(*([mids] * k), indexing="ij")
    Z = np.stack([g.reshape(-1) for g in mesh], axis=1)
    out = net.forward_batch(Z)
    err = float(np.max(np.abs(out - p.ideal(Z))))

    first_copy = out[:, :n0] if k == 1 else net.forward_batch(np.column_stack([mids] + [mids] * (k - 1)))[:, :n0]
    rounded = [tuple(np.where(np.abs(row) > xi / 2, np.sign(row) * xi, 0.0)) for row in first_copy]
    expected = signed_patterns(k0, n0, xi)
    bijection = len(rounded) == len(set(rounded)) and set(rounded) == expected

    conditions = {
        "midpoint_exact": err <= EQUALITY_TOL * max(1.0, xi),
        "bijection": bijection,
        "depth_budget": net.depth <= budget.max_depth,
        "width_budget": net.width <= budget.max_width,
    }
    if name == REGIME_MIXED:
        conditions["depth_exact"] = net.depth == depth
    metrics = {
        "construction": "recursive",
        "regime": regime,
        "patterns": len(set(rounded)),
        "expected_patterns": len(expected),
        "max_error": err,
        "depth": net.depth,
        "width": net.width,
        "depth_budget": budget.max_depth,
        "width_budget": budget.max_width,
    }
    return CheckResult(all(conditions.values()), metrics, _failures(conditions))


def packing_check(n: int, k: int, t: Optional[float] = None) -> CheckResult:
    """Exact combinatorics of the packing family against the analytic statements."""
    family = PackingSet(n, k, t=t)
    summary = packing_stats(n, k, family.threshold)
    members = family.members()
    oracle = nmax_oracle(n, k, family.threshold)
    cov = cov_V(n, k)
    cov_err = float(np.max(np.abs(cov - (k / n) * np.eye(n))))
    log_size_exact = math.log(members.shape[0])
    separation = packing_separation_holds(n, k, family.threshold) if family.size <= 1024 else None
    sigma2, frob = 1.0, float(n)
    chain = fano_chain(n, k, sigma2, frob) if n > k else None

    conditions = {
        "size": members.shape[0] == 2 ** k * (n // k) ** k,
        "log_size": abs(log_size_exact - summary.log_V) <= 1e-9 * max(1.0, summary.log_V),
        "oracle_le_bound": math.log(oracle) <= summary.log_Nmax_bound + 1e-12,
        "oracle_matches_closed_form": math.log(oracle) == summary.log_Nmax_exact,
        "covariance": cov_err <= 1e-12,
    }
    if n >= 4 * k:
        conditions["ratio"] = summary.ratio_holds
        if chain is not None:
            conditions["fano_bracket"] = chain.bracket >= 0.5
            conditions["fano_chain"] = chain.value >= minimax_lower(n, k, sigma2, frob) * (1 - 1e-12)
    if separation is not None:
        conditions["separation"] = separation

    metrics = {
        "log_V": summary.log_V,
        "log_Nmax_bound": summary.log_Nmax_bound,
        "log_Nmax_exact": summary.log_Nmax_exact,
        "nmax_oracle": oracle,
        "ratio_bound": summary.ratio_bound,
        "ratio_holds": summary.ratio_holds,
        "cov_error": cov_err,
        "fano_bracket": chain.bracket if chain is not None else None,
    }
    return CheckResult(all(conditions.values()), metrics, _failures(conditions))


def covering_check(k: int, r: float, eps: float) -> CheckResult:
    result = covering_oracle(k, r, eps)
    conditions = {"certified": result.certified, "within_bound": result.within_bound}
    metrics = {"cover_size": result.size, "cover_bound": result.bound}
    return CheckResult(all(conditions.values()), metrics, _failures(conditions))
