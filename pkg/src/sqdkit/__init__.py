"""Sample-based quantum diagonalization over explicit configuration subspaces."""

from . import _threads
from ._threads import get_threads, set_threads
from .configs import Configuration, Excitation, SystemSpec, fci_dimension
from .errors import (
    CapExceeded,
    EmptyBasis,
    LengthMismatch,
    NoConvergence,
    ParseError,
    SpecError,
    SpecMismatch,
    SQDError,
    Unsupported,
)
from .integrals import FragmentHamiltonian, parse_fcidump, write_fcidump

__version__ = "0.1.0"

__all__ = [
    "CapExceeded",
    "Configuration",
    "EmptyBasis",
    "Excitation",
    "FragmentHamiltonian",
    "LengthMismatch",
    "NoConvergence",
    "ParseError",
    "SQDError",
    "SpecError",
    "SpecMismatch",
    "SystemSpec",
    "Unsupported",
    "fci_dimension",
    "get_threads",
    "parse_fcidump",
    "set_threads",
    "write_fcidump",
]
