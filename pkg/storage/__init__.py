"""
Storage module for gensense-lab - Result tables and run manifests
"""

# Storage module version
__version__ = "1.0.0"

from .results import CellStatus, ResultStore, ResultTable, RunManifest, parse_csv, read_table, render_csv

__all__ = [
    'CellStatus',
    'ResultStore',
    'ResultTable',
    'RunManifest',
    'parse_csv',
    'read_table',
    'render_csv'
]
