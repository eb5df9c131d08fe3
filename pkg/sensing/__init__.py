"""
Sensing module for gensense-lab - Measurement model, decoders and Monte Carlo risk
"""

# Sensing module version
__version__ = "1.0.0"

from .measurement import SensingConfig, append_zero_rows, observe, sample_matrix
from .decoders import ExhaustiveDecoder, LatentDecoder, ZeroDecoder, decode_exhaustive, decode_latent
from .risk import HardPrior, RiskEstimate, estimate_risk

__all__ = [
    'SensingConfig',
    'append_zero_rows',
    'observe',
    'sample_matrix',
    'ExhaustiveDecoder',
    'LatentDecoder',
    'ZeroDecoder',
    'decode_exhaustive',
    'decode_latent',
    'HardPrior',
    'RiskEstimate',
    'estimate_risk',
]
