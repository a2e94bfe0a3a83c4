"""Bridges between lattice measures and functions on R^d.

* :func:`fem_interpolate` lifts a periodic lattice measure to a continuous
  piecewise-linear function on the Kuhn (Freudenthal) triangulation of the
  torus; its Dirichlet energy is exactly ``a^2`` times the periodic lattice
  Dirichlet form.
* :func:`discretize_g` integrates ``g^2`` over the cells of a lattice of
  spacing ``eps`` to obtain a probability measure.
* :func:`cutoff_psi` multiplies by the trapezoidal cut-off that vanishes on
  the boundary of ``[-R, R]^d``.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..lattice import Boundary, LatticeMeasure
from .grid import GridFunction

__all__ = ["FemFunction", "fem_interpolate", "discretize_g", "cutoff_psi", "cutoff_profile", "cutoff_energy_bound"]


class FemFunction(GridFunction):
    """Periodic node values read as a piecewise-linear function on Kuhn simplices.

    The unit cube at node ``z`` is split into ``d!`` simplices
    ``{1 >= y_s(1) >= ... >= y_s(d) >= 0}``, one per permutation ``s``; on
    each the function is the linear interpolant of its ``d + 1`` vertices.
    """

    def __init__(self, values, lower: float, mesh: float):
        super().__init__(values, lower, mesh, periodic=True)

    def _paths(self):
        """For each permutation, node arrays along the path 0 -> e_s(1) -> e_s(1)+e_s(2) -> ..."""
        h = self.values
        d = h.ndim
        axes = tuple(range(d))
        for perm in itertools.permutations(range(d)):
            offset = [0] * d
            nodes = [h]
            for ax in perm:
                offset[ax] += 1
                nodes.append(np.roll(h, tuple(-o for o in offset), axis=axes))
            yield perm, nodes

    def gradient_energy(self) -> float:
        """Exact ``int |grad g|^2`` summed simplex by simplex."""
        d = self.dim
        a = 1.0 / self.mesh
        tot = 0.0
        for _, nodes in self._paths():
            for prev, cur in zip(nodes, nodes[1:]):
                diff = cur - prev
                tot += float(np.sum(diff * diff))
        # each simplex: gradient a * (vertex differences), volume a^-d / d!
        return tot * a ** (2 - d) / math.factorial(d)

    def l2_norm_sq(self) -> float:
        """Exact ``int g^2`` of the piecewise-linear function."""
        d = self.dim
        vol = self.mesh**d / math.factorial(d)
        tot = 0.0
        for _, nodes in self._paths():
            stack = np.stack(nodes)
            tot += float(np.sum(np.sum(stack**2, axis=0) + np.sum(stack, axis=0) ** 2))
        return tot * vol / ((d + 1) * (d + 2))

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x`` of shape ``(..., d)`` (or ``(...)`` in d=1)."""
        x = np.asarray(x, dtype=float)
        d = self.dim
        if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        n = self.n
        y = (x - self.lower) / self.mesh
        base = np.floor(y)
        frac = y - base
        base = base.astype(int) % n
        order = np.argsort(-frac, axis=-1, kind="stable")
        h = self.values
        cur = base.copy()
        val = h[tuple(np.moveaxis(cur, -1, 0))]
        out = val.copy()
        for i in range(d):
            ax = np.take_along_axis(order, np.full(order.shape[:-1] + (1,), i), axis=-1)[..., 0]
            step = np.zeros_like(cur)
            np.put_along_axis(step, ax[..., None], 1, axis=-1)
            nxt = (cur + step) % n
            nval = h[tuple(np.moveaxis(nxt, -1, 0))]
            w = np.take_along_axis(frac, ax[..., None], axis=-1)[..., 0]
            out = out + w * (nval - val)
            cur, val = nxt, nval
        return out


def fem_interpolate(p: LatticeMeasure, a: int) -> FemFunction:
    """Piecewise-linear lift of a periodic measure on ``B_M`` at scale ``a``.

    Node ``z / a`` carries ``sqrt(a^d p(z))``; the torus has side ``(2M+1)/a``.
    """
    if int(a) != a or a < 1:
        raise ValueError("scale a must be a positive integer")
    if p.boundary is not Boundary.PERIODIC:
        raise ValueError("fem_interpolate expects a periodic measure")
    a = int(a)
    vals = np.sqrt(a**p.dim * p.values)
    return FemFunction(vals, -p.radius / a, 1.0 / a)


def discretize_g(g: GridFunction, epsilon: float) -> LatticeMeasure:
    """Cell masses ``p(z) = int_{eps z + [0, eps)^d} g^2`` by nodal quadrature.

    The node spacing of ``g`` should be a divisor of ``epsilon`` for the cells
    to receive equal numbers of nodes; total mass is the nodal ``int g^2``.
    """
    d = g.dim
    axis = g.axis()
    cell = np.floor(axis / epsilon + 1e-9).astype(int)
    R = int(max(abs(cell.min()), abs(cell.max())))
    out = np.zeros((2 * R + 1,) * d)
    idx = np.meshgrid(*([cell + R] * d), indexing="ij")
    w = g.values**2 * g.mesh**d
    np.add.at(out, tuple(i.ravel() for i in idx), w.ravel())
    return LatticeMeasure(out / out.sum(), Boundary.FREE, check=False)


def cutoff_profile(x, R: float) -> np.ndarray:
    """One-dimensional factor: 1 on ``[-R + sqrt R, R - sqrt R]``, 0 outside ``[-R, R]``, linear between."""
    s = math.sqrt(R)
    return np.clip((R - np.abs(np.asarray(x, dtype=float))) / s, 0.0, 1.0)


def cutoff_psi(g: GridFunction, R: float) -> GridFunction:
    """``g * prod_i psi_R(x_i)``; the ramps have slope ``1/sqrt R``."""
    if R < 4:
        raise ValueError("cut-off needs R >= 4")
    psi = np.ones_like(g.values)
    for X in g.coords():
        psi = psi * cutoff_profile(X, R)
    return GridFunction(g.values * psi, g.lower, g.mesh, g.periodic)


def cutoff_energy_bound(g: GridFunction, R: float) -> float:
    """Upper bound ``E(g) + c / sqrt R`` for the energy after the cut-off.

    Expanding ``|psi Dg + g Dpsi|^2`` with ``psi <= 1`` and ``|Dpsi| <= sqrt(d/R)``
    gives ``c = 2 sqrt(d) |g| |Dg| + d |g|^2 / sqrt R`` (discrete norms).
    """
    d = g.dim
    e = g.gradient_energy()
    norm = math.sqrt(g.l2_norm_sq())
    c = 2.0 * math.sqrt(d) * norm * math.sqrt(e) + d * norm**2 / math.sqrt(R)
    return e + c / math.sqrt(R)
