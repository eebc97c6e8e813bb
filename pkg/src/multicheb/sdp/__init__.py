"""Block semidefinite programs: model, solver and SDPA text format."""
from .kernels import BACKEND
from .problem import Block, SdpProblem, SdpSolution, block_from_matrices, hankel_atoms
from .sdpa import SdpaFormatError, export_sdpa, parse_sdpa, write_sdpa
from .solver import SolverError, SolverOptions, residuals, solve

__all__ = ["BACKEND", "Block", "SdpProblem", "SdpSolution", "SdpaFormatError", "SolverError",
           "SolverOptions", "block_from_matrices", "export_sdpa", "hankel_atoms",
           "parse_sdpa", "residuals", "solve", "write_sdpa"]
