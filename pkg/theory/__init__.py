"""
Theory module for gensense-lab - Covering, packing and minimax bound computations
"""

# Theory module version
__version__ = "1.0.0"

from .covering import CoveringResult, covering_bound, covering_log_bound, covering_oracle
from .packing import PackingSet, PackingStats, cov_V, nmax_exact, nmax_oracle, packing_separation_holds, packing_stats
from .minimax import (
    BoundConstants,
    fano_lower,
    lower_m_relu,
    m_star,
    minimax_lower,
    mutual_info_upper,
    required_m_lower,
    thm_main_params,
    upper_m_lipschitz,
    upper_m_relu,
    xi_choice,
    xi_relu,
)
from .report import BoundReport, build_report

__all__ = [
    'CoveringResult',
    'covering_bound',
    'covering_log_bound',
    'covering_oracle',
    'PackingSet',
    'PackingStats',
    'cov_V',
    'nmax_exact',
    'nmax_oracle',
    'packing_separation_holds',
    'packing_stats',
    'BoundConstants',
    'fano_lower',
    'lower_m_relu',
    'm_star',
    'minimax_lower',
    'mutual_info_upper',
    'required_m_lower',
    'thm_main_params',
    'upper_m_lipschitz',
    'upper_m_relu',
    'xi_choice',
    'xi_relu',
    'BoundReport',
    'build_report',
]
