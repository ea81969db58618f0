"""Fermionic realisation of current and Virasoro algebras on the two-torus
and two-sphere, with numerical certification on truncated Fock spaces."""

__version__ = "0.1.0"

from .lie_core import LieAlgebraRep, build_so_adjoint, get_rep, validate_rep
from .fock import SectorConfig, Mode, FockState, StateVector, ModeOperator

__all__ = [
    "LieAlgebraRep",
    "build_so_adjoint",
    "get_rep",
    "validate_rep",
    "SectorConfig",
    "Mode",
    "FockState",
    "StateVector",
    "ModeOperator",
    "__version__",
]
