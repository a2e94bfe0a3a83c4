"""Discrete-to-continuous scaling of the variational constants.

For ``gamma != 1`` and ``nu = (1-gamma)/(2 + d(1-gamma))``

    kappa^(1 - d nu) chi_db(rho/kappa) - rho (1 - kappa^(-d nu)) / (1 - gamma)

tends to the continuous constant ``chi_b(rho)`` as ``kappa -> inf``; for
``gamma = 1`` the transform is ``kappa chi_de(rho/kappa) - rho (d/2) log kappa``
with limit ``chi_ab(rho)``.  The lattice spacing seen by the continuum is
``eps = kappa^(-1/(2 + d(1-gamma)))``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..discrete import DiscreteProblem, Kind, SolverOptions, solve
from .grid import (
    ContinuousKind,
    ContinuousProblem,
    default_grid,
    gaussian_oracle_AB,
    sine_oracle_B0,
    solve_grid,
)

__all__ = ["TransferRow", "scaling_transfer", "continuous_reference", "lattice_spacing", "transform"]


@dataclass
class TransferRow:
    kappa: float
    eps: float
    radius: int
    raw_discrete: float
    transformed: float
    iterations: int


def lattice_spacing(gamma: float, d: int, kappa: float) -> float:
    return kappa ** (-1.0 / (2.0 + d * (1.0 - gamma)))


def transform(gamma: float, rho: float, d: int, kappa: float, value: float) -> float:
    """Map a discrete value at ``rho/kappa`` to the continuum scale."""
    if gamma == 1:
        return kappa * value - rho * d / 2.0 * math.log(kappa)
    nu = (1.0 - gamma) / (2.0 + d * (1.0 - gamma))
    return kappa ** (1.0 - d * nu) * value - rho * (1.0 - kappa ** (-d * nu)) / (1.0 - gamma)


def continuous_reference(gamma: float, rho: float, d: int) -> float:
    """Closed form where available (gamma in {0, 1} in d=1, gamma=1 in any d), else a grid solve."""
    if gamma == 1:
        return gaussian_oracle_AB(rho, d)
    if gamma == 0 and d == 1:
        return sine_oracle_B0(rho)
    R, mesh = default_grid(d)
    return solve_grid(ContinuousProblem(ContinuousKind.B, d, R, mesh, rho=rho, gamma=gamma)).value


def _warm_start(gamma: float, rho: float, d: int, radius: int, eps: float) -> Optional[np.ndarray]:
    """Discretised continuum guess: a Gaussian for smooth penalties."""
    if gamma <= 0.5:
        return None
    z = np.arange(-radius, radius + 1) * eps
    X = np.meshgrid(*([z] * d), indexing="ij")
    r2 = sum(x * x for x in X)
    a = rho if gamma == 1 else max(rho, 0.5)
    w = np.exp(-a * r2)
    return w / w.sum()


def _row(gamma, rho, d, kappa, R0, opts) -> TransferRow:
    eps = lattice_spacing(gamma, d, kappa)
    radius = int(math.ceil(R0 / eps))
    if gamma == 1:
        prob = DiscreteProblem(Kind.DE, rho / kappa, d, radius)
    else:
        prob = DiscreteProblem(Kind.DB, rho / kappa, d, radius, gamma=gamma)
    warm = _warm_start(gamma, rho, d, radius, eps)
    sol = solve(prob, opts, warm_start=warm)
    return TransferRow(float(kappa), eps, radius, sol.value, transform(gamma, rho, d, kappa, sol.value), sol.iterations)


def scaling_transfer(
    gamma: float,
    rho: float,
    d: int,
    kappa_grid: Sequence[float],
    R0: float = 6.0,
    opts: Optional[SolverOptions] = None,
    threads: int = 1,
) -> List[TransferRow]:
    """Transformed discrete values along ``kappa_grid``.

    The box radius is ``ceil(R0 / eps)`` lattice sites, i.e. a fixed window
    ``[-R0, R0]^d`` in continuum units.  Rows come back in grid order.
    """
    if not 0 <= gamma < 1 + 2 / d:
        raise ValueError("gamma must lie in [0, 1 + 2/d)")
    grid = list(kappa_grid)
    if any(k < 10 for k in grid):
        raise ValueError("kappa values must be >= 10")
    if opts is None:
        opts = SolverOptions(restarts=0, candidate_starts=False)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda k: _row(gamma, rho, d, k, R0, opts), grid))
    return [_row(gamma, rho, d, k, R0, opts) for k in grid]
