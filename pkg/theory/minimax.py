"""Information-theoretic lower bounds and sample-complexity thresholds.

All logarithms are natural.
"""

import logging
import math
import os
from dataclasses import asdict, dataclass
from typing import Optional

from theory.packing import packing_stats
from utils.validation import InvalidInputError, require_positive, require_positive_int

logger = logging.getLogger(__name__)

DOMAIN_RECT = "rect"
DOMAIN_SPHERE = "sphere"


@dataclass(frozen=True)
class BoundConstants:
    C0: float = 4.0
    C1: float = 1.0
    C_A: float = 1.0
    C_upper: float = 1.0
    L_validity: float = 10.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            require_positive(name, value)

    @classmethod
    def from_env(cls) -> "BoundConstants":
        return cls(
            C0=float(os.getenv("GENSENSE_C0", "4")),
            C1=float(os.getenv("GENSENSE_C1", "1")),
            C_A=float(os.getenv("GENSENSE_CA", "1")),
            C_upper=float(os.getenv("GENSENSE_C_UPPER", "1")),
            L_validity=float(os.getenv("GENSENSE_L_VALIDITY", "10")),
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FanoChain:
    xi: float
    eps: float
    info: float
    log_ratio: float
    bracket: float
    value: float


@dataclass
class ThmParams:
    n: int
    x_max: float
    c_prime: float
    n_raw: float


def _check_packing_regime(n: int, k: int, C0: float) -> None:
    if n < C0 * k:
        raise InvalidInputError(f"n={n} < C0*k={C0 * k}: the packing argument needs n >= C0*k")


def mutual_info_upper(xi: float, sigma2: float, frob_A2: float, n: int, k: int) -> float:
    """``(xi^2 / (2 sigma^2)) * (k/n) * ||A||_F^2``."""
    require_positive("sigma2", sigma2)
    if xi < 0 or frob_A2 < 0:
        raise InvalidInputError("xi and ||A||_F^2 must be non-negative")
    return (xi ** 2 / (2.0 * sigma2)) * (k / n) * frob_A2


def fano_bracket(info: float, log_V: float, log_Nmax: float) -> float:
    if log_V <= log_Nmax:
        raise InvalidInputError(f"log|V|={log_V:.6g} must exceed log N_max={log_Nmax:.6g}")
    return 1.0 - (info + math.log(2.0)) / (log_V - log_Nmax)


def fano_lower(eps: float, info: float, log_V: float, log_Nmax: float) -> float:
    """Approximate-recovery Fano bound ``(eps/2)^2 (1 - (I + log 2) / log(|V|/N_max))``, clamped at 0."""
    return max(0.0, (eps / 2.0) ** 2 * fano_bracket(info, log_V, log_Nmax))


def xi_choice(n: int, k: int, sigma2: float, frob_A2: float) -> float:
    if n <= k:
        raise InvalidInputError(f"xi choice needs n > k, got n={n}, k={k}")
    require_positive("frob_A2", frob_A2)
    if sigma2 < 0:
        raise InvalidInputError(f"sigma2 must be non-negative, got {sigma2}")
    return math.sqrt(n * sigma2 * math.log(n / k) / (4.0 * frob_A2))


def minimax_lower(n: int, k: int, sigma2: float, frob_A2: float, constants: Optional[BoundConstants] = None) -> float:
    """
    Minimax risk lower bound for group-sparse recovery.

    Args:
        n: Signal length
        k: Number of blocks
        sigma2: Per-coordinate noise variance
        frob_A2: Squared Frobenius norm of the measurement matrix
        constants: Bound constants (C0 is checked)

    Returns:
        ``n sigma^2 k log(n/k) / (64 ||A||_F^2)``
    """
    constants = constants or BoundConstants.from_env()
    _check_packing_regime(n, k, constants.C0)
    require_positive("frob_A2", frob_A2)
    if sigma2 < 0:
        raise InvalidInputError(f"sigma2 must be non-negative, got {sigma2}")
    return n * sigma2 * k * math.log(n / k) / (64.0 * frob_A2)


def fano_chain(n: int, k: int, sigma2: float, frob_A2: float, exact: bool = True) -> FanoChain:
    """
    Evaluate the Fano bound at the packing amplitude ``xi_choice``.

    Args:
        n: Signal length
        k: Number of blocks
        sigma2: Per-coordinate noise variance
        frob_A2: Squared Frobenius norm
        exact: Use the exact Hamming-ball size instead of its analytic bound

    Returns:
        FanoChain with every intermediate quantity
    """
    stats = packing_stats(n, k)
    log_nmax = stats.log_Nmax_exact if exact else stats.log_Nmax_bound
    xi = xi_choice(n, k, sigma2, frob_A2)
    eps = xi * math.sqrt(k / 2.0)
    info = (xi ** 2 / (2.0 * sigma2)) * (k / n) * frob_A2 if sigma2 > 0 else 0.0
    bracket = fano_bracket(info, stats.log_V, log_nmax)
    return FanoChain(
        xi=xi,
        eps=eps,
        info=info,
        log_ratio=stats.log_V - log_nmax,
        bracket=bracket,
        value=max(0.0, (eps / 2.0) ** 2 * bracket),
    )


def required_m_lower(n: int, k: int, C1: float, C_A: float, C0: Optional[float] = None) -> float:
    """Measurements below which the minimax risk exceeds ``C1 * alpha``: ``k log(n/k) / (64 C1 C_A)``."""
    C0 = BoundConstants.from_env().C0 if C0 is None else C0
    _check_packing_regime(n, k, C0)
    require_positive("C1", C1)
    require_positive("C_A", C_A)
    return k * math.log(n / k) / (64.0 * C1 * C_A)


def m_star(threshold: float) -> int:
    """Largest integer strictly below the threshold, floored at zero."""
    return max(0, int(math.ceil(threshold)) - 1)


def thm_main_params(L: float, r: float, k: int, alpha: float, C1: float, constants: Optional[BoundConstants] = None) -> ThmParams:
    """
    Output dimension and amplitude of the Lipschitz lower-bound construction.

    Args:
        L: Target Lipschitz constant
        r: Latent radius
        k: Latent dimension
        alpha: Noise level
        C1: Target-risk constant
        constants: Bound constants (L_validity and C0 are checked)

    Returns:
        ThmParams with n rounded to a multiple of k
    """
    constants = constants or BoundConstants.from_env()
    require_positive("L", L)
    require_positive("r", r)
    require_positive_int("k", k)
    require_positive("alpha", alpha)
    require_positive("C1", C1)
    floor_L = constants.L_validity * math.sqrt(alpha / k) / r
    if L < floor_L:
        raise InvalidInputError(
            f"L={L:.6g} below validity threshold {floor_L:.6g}: the zero estimate already meets the target risk"
        )
    c_prime = 1.0 / math.sqrt(128.0 * C1)
    n_raw = c_prime * L * r * k * math.sqrt(k) / math.sqrt(alpha)
    n = k * max(1, int(round(n_raw / k)))
    _check_packing_regime(n, k, constants.C0)
    x_max = math.sqrt(alpha) / (2.0 * c_prime * math.sqrt(k))
    return ThmParams(n=n, x_max=x_max, c_prime=c_prime, n_raw=n_raw)


def upper_m_lipschitz(k: int, L: float, r: float, alpha: float, domain: str = DOMAIN_RECT, C_upper: float = 1.0) -> float:
    require_positive_int("k", k)
    require_positive("alpha", alpha)
    if domain == DOMAIN_RECT:
        arg = L * r * math.sqrt(k) / math.sqrt(alpha)
    elif domain == DOMAIN_SPHERE:
        arg = L * r / math.sqrt(alpha)
    else:
        raise InvalidInputError(f"unknown domain {domain!r}; expected 'rect' or 'sphere'")
    if arg <= 1.0:
        raise InvalidInputError(f"log argument {arg:.6g} <= 1: no measurements are needed at this noise level")
    return C_upper * k * math.log(arg)


def upper_m_relu(k: int, d: int, w: int, C_upper: float = 1.0) -> float:
    require_positive_int("k", k)
    require_positive_int("d", d)
    if w < 2:
        raise InvalidInputError(f"width must be >= 2, got {w}")
    return C_upper * k * d * math.log(w)


def lower_m_relu(k: int, k0: int, n0: int, C1: float, C_A: float) -> float:
    """``k k0 log(n0/k0) / (64 C1 C_A)``, the ReLU lower bound with ``n = n0 k``."""
    require_positive_int("k", k)
    require_positive_int("k0", k0)
    if n0 <= k0:
        raise InvalidInputError(f"need n0 > k0, got n0={n0}, k0={k0}")
    require_positive("C1", C1)
    require_positive("C_A", C_A)
    return k * k0 * math.log(n0 / k0) / (64.0 * C1 * C_A)


def xi_relu(k: int, k0: int, alpha: float, C1: float) -> float:
    """Packing amplitude after substituting the ReLU threshold: ``sqrt(16 C1 alpha / (k k0))``."""
    require_positive_int("k", k)
    require_positive_int("k0", k0)
    require_positive("alpha", alpha)
    return math.sqrt(16.0 * C1 * alpha / (k * k0))


def c2_implied(k0: int, C1: float) -> float:
    """Constant C2 of the ``sqrt(C2 alpha / k)`` form that matches ``xi_relu``."""
    return 16.0 * C1 / k0
