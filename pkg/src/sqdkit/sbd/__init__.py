"""Selected-basis diagonalization: matrix-free projected Hamiltonian, Davidson
solve, single-excitation extension and amplitude trimming."""

from .basis import SubspaceBasis, apply_hamiltonian, build_basis, dense_projection
from .select import extend_basis, rank_by_amplitude, top_count, trim_by_amplitude
from .snapshot import read_snapshot, write_snapshot
from .solver import GroundStateResult, SolverOptions, solve_ground_state

__all__ = [
    "GroundStateResult",
    "SolverOptions",
    "SubspaceBasis",
    "apply_hamiltonian",
    "build_basis",
    "dense_projection",
    "extend_basis",
    "rank_by_amplitude",
    "read_snapshot",
    "solve_ground_state",
    "top_count",
    "trim_by_amplitude",
    "write_snapshot",
]
