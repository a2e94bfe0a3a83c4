"""Continuum variational problems on grids and their links to the lattice."""

from .grid import (
    ContinuousKind,
    ContinuousProblem,
    GridFunction,
    GridOptions,
    GridSolution,
    gaussian_oracle_AB,
    sine_oracle_B0,
    solve_grid,
)
from .fem import FemFunction, cutoff_psi, discretize_g, fem_interpolate
from .transfer import TransferRow, scaling_transfer
from .legendre import BridgeResult, legendre_bridge

__all__ = [
    "ContinuousKind",
    "ContinuousProblem",
    "GridFunction",
    "GridOptions",
    "GridSolution",
    "gaussian_oracle_AB",
    "sine_oracle_B0",
    "solve_grid",
    "FemFunction",
    "cutoff_psi",
    "discretize_g",
    "fem_interpolate",
    "TransferRow",
    "scaling_transfer",
    "BridgeResult",
    "legendre_bridge",
]
