"""
Harness module for gensense-lab - Experiment specs, verification suites, runner and plots
"""

# Harness module version
__version__ = "1.0.0"

from .spec import ExperimentSpec
from .checks import (
    CheckResult,
    covering_check,
    double_triangle_check,
    lipschitz_check,
    packing_check,
    recursive_check,
    sawtooth_check,
)
from .plotting import emit_plot
from .runner import run, run_cell

__all__ = [
    'ExperimentSpec',
    'CheckResult',
    'covering_check',
    'double_triangle_check',
    'lipschitz_check',
    'packing_check',
    'recursive_check',
    'sawtooth_check',
    'emit_plot',
    'run',
    'run_cell',
]
