"""
Utilities module for gensense-lab - Seeded random streams and input validation
"""

# Utils module version
__version__ = "1.0.0"

from .rng import RNG_ALGORITHM, Purpose, substream
from .validation import CsvParseError, EnumerationCapError, InvalidInputError, SpecValidationError

__all__ = [
    'RNG_ALGORITHM',
    'Purpose',
    'substream',
    'CsvParseError',
    'EnumerationCapError',
    'InvalidInputError',
    'SpecValidationError'
]
