"""Two independent evaluations of the Legendre duality

    sup_u { beta u - chi_gks(u) } = -beta^(-2/d) chi_rwrs(beta^(1 + 2/d)).

The left side maximises over ``u`` the grid value of
``inf_g { |grad g|^2 + sup_b [b u - int H(b g^2)] }``; the right side solves the
``-theta int H(g^2)`` problem at ``theta = beta^(1+2/d)``.  On a finite grid
the identity is exact when the right-hand problem uses the box and mesh
scaled by ``beta^(-1/d)``, so both sides are computed on matched grids.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .. import _sphere
from ..cumulant import CumulantModel, EssSupClass
from ..lattice import laplacian_matrix
from .grid import (
    ContinuousKind,
    ContinuousProblem,
    GridOptions,
    default_grid,
    solve_grid_best_effort,
)

__all__ = ["BridgeResult", "UGridWarning", "legendre_bridge", "gks_value"]


class UGridWarning(RuntimeWarning):
    """The supremum over the u-grid sits at an endpoint."""


@dataclass
class BridgeResult:
    left: float
    right: float
    u_star: float
    chi_rwrs: float
    endpoint: bool
    table: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def rel_gap(self) -> float:
        return abs(self.left - self.right) / abs(self.right)


def gks_value(model: CumulantModel, u: float, R: float, mesh: float, d: int = 1, opts=None, warm=None):
    prob = ContinuousProblem(ContinuousKind.GKS, d, R, mesh, model=model, u=u)
    return solve_grid_best_effort(prob, opts, warm)


def _kinetic_ground(R: float, mesh: float, d: int) -> float:
    n = int(round(2 * R / mesh))
    K = laplacian_matrix((n - 1,) * d) / mesh**2
    return _sphere.ground_state(K)[0]


def legendre_bridge(
    model: CumulantModel,
    beta: float,
    d: int = 1,
    R: Optional[float] = None,
    mesh: Optional[float] = None,
    u_grid: Optional[Sequence[float]] = None,
    opts: Optional[GridOptions] = None,
    refine_tol: float = 1e-4,
) -> BridgeResult:
    """Evaluate both sides of the duality on matched grids.

    The left side scans ``u_grid`` (default: 16 geometric points inside
    ``(0, esssup xi)``) and refines the best bracket by golden section.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if model.esssup_class is not EssSupClass.MEAN_ZERO:
        raise ValueError("the duality is stated for mean-zero potentials")
    if R is None or mesh is None:
        R0, m0 = default_grid(d)
        R = R0 if R is None else R
        mesh = m0 if mesh is None else mesh
    opts = opts or GridOptions(richardson=False, restarts=0, grad_tol=1e-7)
    scale = beta ** (-1.0 / d)
    theta = beta ** (1.0 + 2.0 / d)

    # right side
    rw = ContinuousProblem(ContinuousKind.RWRS, d, R * scale, mesh * scale, model=model, theta=theta)
    chi_rwrs = solve_grid_best_effort(rw, opts).value
    right = -(beta ** (-2.0 / d)) * chi_rwrs

    top = model.esssup
    if top <= 0:
        # H <= 0 makes chi_gks infinite for every u > 0; the supremum is the u -> 0 limit
        left = -_kinetic_ground(R, mesh, d)
        return BridgeResult(left, right, 0.0, chi_rwrs, False, [])
    if u_grid is None:
        hi = top if math.isfinite(top) else 10.0 * beta
        u_grid = np.geomspace(1e-3 * hi, 0.98 * hi, 16)
    u_grid = sorted(float(u) for u in u_grid)

    cache = {}
    warm = [None]

    def f(u):
        if u not in cache:
            sol = gks_value(model, u, R, mesh, d, opts, warm[0])
            warm[0] = sol.minimizer
            cache[u] = beta * u - sol.value
        return cache[u]

    vals = [f(u) for u in u_grid]
    i = int(np.argmax(vals))
    endpoint = i in (0, len(u_grid) - 1)
    if endpoint:
        warnings.warn("supremum attained at an end of the u-grid; widen it", UGridWarning, stacklevel=2)
    lo = u_grid[max(i - 1, 0)]
    hi = u_grid[min(i + 1, len(u_grid) - 1)]
    u_star, left = _sphere.golden_max(f, lo, hi, tol=refine_tol * max(hi, 1e-12))
    if left < vals[i]:
        u_star, left = u_grid[i], vals[i]
    table = sorted(cache.items())
    return BridgeResult(float(left), float(right), float(u_star), float(chi_rwrs), endpoint, table)
