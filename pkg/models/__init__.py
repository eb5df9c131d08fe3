"""
Models module for gensense-lab - Generative models and their ReLU realizations
"""

# Models module version
__version__ = "1.0.0"

from .group_sparse import (
    GenModelParams,
    SignedSupport,
    generate,
    generate_batch,
    generate_spherical,
    invert,
    is_group_sparse,
    lipschitz,
    pad_to_multiple,
)
from .relu import (
    PwlFunction,
    ReluNetwork,
    build_double_triangle_deep,
    build_f,
    build_from_pwl,
    build_g,
    build_sawtooth,
    build_trapezoid_shaper,
    compose,
    fanout,
    forward,
    pad_to_depth,
    parallel,
    stats,
    sum_networks,
)
from .recursive import RecursiveGenParams, build_recursive_generator, regime_budget

__all__ = [
    'GenModelParams',
    'SignedSupport',
    'generate',
    'generate_batch',
    'generate_spherical',
    'invert',
    'is_group_sparse',
    'lipschitz',
    'pad_to_multiple',
    'PwlFunction',
    'ReluNetwork',
    'build_double_triangle_deep',
    'build_f',
    'build_from_pwl',
    'build_g',
    'build_sawtooth',
    'build_trapezoid_shaper',
    'compose',
    'fanout',
    'forward',
    'pad_to_depth',
    'parallel',
    'stats',
    'sum_networks',
    'RecursiveGenParams',
    'build_recursive_generator',
    'regime_budget',
]
