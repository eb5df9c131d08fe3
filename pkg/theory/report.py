import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional

from theory.covering import covering_log_bound
from theory.minimax import (
    DOMAIN_RECT,
    DOMAIN_SPHERE,
    BoundConstants,
    c2_implied,
    fano_chain,
    lower_m_relu,
    m_star,
    minimax_lower,
    mutual_info_upper,
    required_m_lower,
    thm_main_params,
    upper_m_lipschitz,
    upper_m_relu,
    xi_relu,
)
from theory.packing import packing_stats
from utils.validation import InvalidInputError

logger = logging.getLogger(__name__)

LOG_BASE = "e"


@dataclass
class BoundReport:
    """Every analytic quantity for one parameter point.

    Fields that do not apply (missing inputs or a violated precondition) are
    ``None`` and the reason is kept in ``notes``.
    """

    # inputs
    n: int
    k: int
    m: Optional[int] = None
    r: Optional[float] = None
    alpha: Optional[float] = None
    L: Optional[float] = None
    d: Optional[int] = None
    w: Optional[int] = None
    k0: Optional[int] = None
    n0: Optional[int] = None
    constants: BoundConstants = field(default_factory=BoundConstants)
    log_base: str = LOG_BASE

    # derived noise / matrix scale
    sigma2: Optional[float] = None
    frob_A2: Optional[float] = None

    # packing
    log_V: Optional[float] = None
    log_Nmax_bound: Optional[float] = None
    log_Nmax_exact: Optional[float] = None
    ratio_bound: Optional[float] = None
    ratio_holds: Optional[bool] = None
    ratio_holds_bound: Optional[bool] = None

    # Fano chain
    xi_choice: Optional[float] = None
    eps_packing: Optional[float] = None
    mutual_info_upper: Optional[float] = None
    fano_bracket: Optional[float] = None
    fano_lower: Optional[float] = None
    minimax_lower: Optional[float] = None

    # thresholds
    required_m_lower: Optional[float] = None
    m_star: Optional[int] = None
    upper_m_rect: Optional[float] = None
    upper_m_sphere: Optional[float] = None
    delta: Optional[float] = None
    covering_log_bound: Optional[float] = None
    thm_n: Optional[int] = None
    thm_x_max: Optional[float] = None
    upper_m_relu: Optional[float] = None
    lower_m_relu: Optional[float] = None
    xi_relu: Optional[float] = None
    c2_implied: Optional[float] = None

    notes: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["constants"] = self.constants.to_dict()
        return data

    def to_flat_dict(self) -> dict:
        data = self.to_dict()
        consts = data.pop("constants")
        data.update({f"const_{name}": value for name, value in consts.items()})
        notes = data.pop("notes")
        data["notes"] = "; ".join(f"{key}: {value}" for key, value in sorted(notes.items()))
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _attempt(report: BoundReport, name: str, fn: Callable[[], object]) -> None:
    try:
        setattr(report, name, fn())
    except InvalidInputError as e:
        report.notes[name] = str(e)
        logger.debug(f"Report field {name} skipped: {e}")


def build_report(
    n: int,
    k: int,
    m: Optional[int] = None,
    r: Optional[float] = None,
    alpha: Optional[float] = None,
    L: Optional[float] = None,
    d: Optional[int] = None,
    w: Optional[int] = None,
    k0: Optional[int] = None,
    n0: Optional[int] = None,
    constants: Optional[BoundConstants] = None,
) -> BoundReport:
    """
    Evaluate all bounds that the given inputs allow.

    The measurement matrix is taken at its nominal scale ``||A||_F^2 = C_A n``
    and the noise at ``sigma^2 = alpha / m``.  The latent covering bound is
    reported at the resolution ``delta = sqrt(alpha) / L`` where the generator moves
    by at most the noise level.

    Args:
        n: Signal length
        k: Number of blocks / latent dimension
        m: Measurement count
        r: Latent radius
        alpha: Noise level
        L: Lipschitz constant
        d: ReLU depth
        w: ReLU width
        k0: Per-copy sparsity of the ReLU construction
        n0: Per-copy length of the ReLU construction
        constants: Bound constants (defaults from the environment)

    Returns:
        BoundReport
    """
    constants = constants or BoundConstants.from_env()
    report = BoundReport(n=n, k=k, m=m, r=r, alpha=alpha, L=L, d=d, w=w, k0=k0, n0=n0, constants=constants)
    report.frob_A2 = constants.C_A * n

    try:
        stats = packing_stats(n, k)
        report.log_V = stats.log_V
        report.log_Nmax_bound = stats.log_Nmax_bound
        report.log_Nmax_exact = stats.log_Nmax_exact
        report.ratio_bound = stats.ratio_bound
        report.ratio_holds = stats.ratio_holds
        report.ratio_holds_bound = stats.ratio_holds_bound
    except InvalidInputError as e:
        report.notes["packing"] = str(e)

    _attempt(report, "required_m_lower", lambda: required_m_lower(n, k, constants.C1, constants.C_A, constants.C0))
    if report.required_m_lower is not None:
        report.m_star = m_star(report.required_m_lower)

    if m is not None and alpha is not None:
        report.sigma2 = alpha / m
        if report.sigma2 > 0 and n > k:
            try:
                chain = fano_chain(n, k, report.sigma2, report.frob_A2)
                report.xi_choice = chain.xi
                report.eps_packing = chain.eps
                report.mutual_info_upper = mutual_info_upper(chain.xi, report.sigma2, report.frob_A2, n, k)
                report.fano_bracket = chain.bracket
                report.fano_lower = chain.value
            except InvalidInputError as e:
                report.notes["fano_lower"] = str(e)
        _attempt(report, "minimax_lower", lambda: minimax_lower(n, k, report.sigma2, report.frob_A2, constants))

    if L is not None and r is not None and alpha is not None:
        _attempt(report, "upper_m_rect", lambda: upper_m_lipschitz(k, L, r, alpha, DOMAIN_RECT, constants.C_upper))
        _attempt(report, "upper_m_sphere", lambda: upper_m_lipschitz(k, L, r, alpha, DOMAIN_SPHERE, constants.C_upper))
        if alpha >= 0 and L > 0:
            report.delta = math.sqrt(alpha) / L
        if report.delta:
            _attempt(report, "covering_log_bound", lambda: covering_log_bound(k, r, report.delta))
        try:
            thm = thm_main_params(L, r, k, alpha, constants.C1, constants)
            report.thm_n = thm.n
            report.thm_x_max = thm.x_max
        except InvalidInputError as e:
            report.notes["thm_main_params"] = str(e)

    if d is not None and w is not None:
        _attempt(report, "upper_m_relu", lambda: upper_m_relu(k, d, w, constants.C_upper))
    if k0 is not None and n0 is not None:
        _attempt(report, "lower_m_relu", lambda: lower_m_relu(k, k0, n0, constants.C1, constants.C_A))
        report.c2_implied = c2_implied(k0, constants.C1)
        if alpha is not None:
            _attempt(report, "xi_relu", lambda: xi_relu(k, k0, alpha, constants.C1))

    logger.debug(f"Bound report n={n}, k={k}, m={m}: {len(report.notes)} fields skipped")
    return report
