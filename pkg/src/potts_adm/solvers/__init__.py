"""Discrete minimizers for unary + Potts energies."""

from .brute import brute_force
from .graphcut import alpha_expansion, expansion_move, max_flow, maxflow_binary, solve_binary_submodular
from .local import decode, icm, mean_field_dense, mean_field_free_energy
from ..errors import InvalidArgument
from .problem import DiscreteProblem, SolveReport, make_report

SOLVERS = {
    "alpha_expansion": alpha_expansion,
    "maxflow_binary": maxflow_binary,
    "icm": icm,
}


def solve(name, problem, init=None, max_sweeps=5):
    """Dispatch by solver name, as used by the training configs."""
    if name == "maxflow_binary":
        return maxflow_binary(problem)
    if name == "alpha_expansion":
        return alpha_expansion(problem, init, max_sweeps)
    if name == "icm":
        return icm(problem, init, max_sweeps)
    raise InvalidArgument(f"unknown solver {name!r}")


__all__ = [
    "DiscreteProblem", "SolveReport", "make_report", "brute_force", "alpha_expansion",
    "expansion_move", "max_flow", "maxflow_binary", "solve_binary_submodular", "icm",
    "mean_field_dense", "mean_field_free_energy", "decode", "solve", "SOLVERS",
]
