"""Grid discretisation of the continuous variational problems on ``Q_R = [-R, R]^d``.

Functions are sampled at mesh nodes; the gradient energy uses forward
differences and integrals use the nodal (rectangle) rule, so that with
``q = g * eps^(d/2)`` every grid problem becomes a sphere problem of the same
form as the lattice ones, with kinetic matrix ``eps^-2 (2d I - A)``.
"""
from __future__ import annotations

import enum
import io
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import xlogy

from .. import _sphere
from ..cumulant import CumulantModel
from ..discrete import NonConvergenceError, centred_supports
from ..lattice import SUPPORT_FLOOR, laplacian_matrix

__all__ = [
    "GridFunction",
    "ContinuousKind",
    "ContinuousProblem",
    "GridOptions",
    "GridSolution",
    "objective_grid",
    "solve_grid",
    "solve_grid_best_effort",
    "gaussian_oracle_AB",
    "sine_oracle_B0",
    "gaussian_candidate",
    "default_grid",
]

_BINARY_HEADER = struct.Struct("<qdddqq")


class GridFunction:
    """Node values of a function on a uniform mesh.

    Parameters
    ----------
    values : array_like
        Values on an ``n^d`` node array.
    lower : float
        Coordinate of the first node on every axis.
    mesh : float
        Node spacing ``eps``.
    periodic : bool
        If true the last node is followed by the first one (torus of side
        ``n * mesh``); otherwise the nodes close the box and the outermost
        layer is the boundary.
    """

    def __init__(self, values, lower: float, mesh: float, periodic: bool = False):
        arr = np.asarray(values, dtype=float)
        if any(s != arr.shape[0] for s in arr.shape):
            raise ValueError("grid functions live on cubic node arrays")
        self.values = arr
        self.lower = float(lower)
        self.mesh = float(mesh)
        self.periodic = bool(periodic)

    @classmethod
    def on_box(cls, values, R: float, mesh: float) -> "GridFunction":
        n = int(round(2 * R / mesh))
        if abs(n * mesh - 2 * R) > 1e-9 * max(1.0, R):
            raise ValueError("2R/mesh must be an integer")
        arr = np.asarray(values, dtype=float)
        if arr.shape[0] != n + 1:
            raise ValueError(f"expected {n + 1} nodes per axis, got {arr.shape[0]}")
        return cls(arr, -R, mesh)

    @classmethod
    def from_callable(cls, f, R: float, mesh: float, dim: int = 1, normalize: bool = True) -> "GridFunction":
        n = int(round(2 * R / mesh))
        axis = -R + mesh * np.arange(n + 1)
        X = np.meshgrid(*([axis] * dim), indexing="ij")
        vals = np.asarray(f(*X), dtype=float)
        g = cls(vals, -R, mesh)
        if dim and normalize:
            g = g.normalized()
        return g

    # -- geometry ------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def R(self) -> float:
        """Half-width of the box spanned by the nodes."""
        span = self.n * self.mesh if self.periodic else (self.n - 1) * self.mesh
        return span / 2.0

    def axis(self) -> np.ndarray:
        return self.lower + self.mesh * np.arange(self.n)

    def coords(self) -> List[np.ndarray]:
        return np.meshgrid(*([self.axis()] * self.dim), indexing="ij")

    # -- integrals -----------------------------------------------------
    def integral(self, f_values) -> float:
        return float(np.sum(f_values) * self.mesh**self.dim)

    def l2_norm_sq(self) -> float:
        return self.integral(self.values**2)

    def gradient_energy(self) -> float:
        """Forward-difference Dirichlet energy ``sum |D g|^2 eps^(d-2)``."""
        v = self.values
        tot = 0.0
        for ax in range(v.ndim):
            if self.periodic:
                d = np.roll(v, -1, axis=ax) - v
            else:
                d = np.diff(v, axis=ax)
            tot += float(np.sum(d * d))
        return tot * self.mesh ** (self.dim - 2)

    def boundary_max(self) -> float:
        if self.periodic:
            return 0.0
        v = np.abs(self.values)
        out = 0.0
        for ax in range(v.ndim):
            out = max(out, float(np.take(v, 0, axis=ax).max()), float(np.take(v, -1, axis=ax).max()))
        return out

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.l2_norm_sq() - 1.0) <= tol

    def is_dirichlet(self, tol: float = 0.0) -> bool:
        return self.boundary_max() <= tol

    def normalized(self) -> "GridFunction":
        return GridFunction(self.values / math.sqrt(self.l2_norm_sq()), self.lower, self.mesh, self.periodic)

    def interpolate_to(self, R: float, mesh: float) -> "GridFunction":
        """Linear interpolation onto another closed box grid (zero outside)."""
        n = int(round(2 * R / mesh))
        axis = -R + mesh * np.arange(n + 1)
        interp = RegularGridInterpolator(
            [self.axis()] * self.dim, self.values, bounds_error=False, fill_value=0.0
        )
        pts = np.stack(np.meshgrid(*([axis] * self.dim), indexing="ij"), axis=-1)
        return GridFunction(interp(pts), -R, mesh)

    # -- io --------------------------------------------------------------
    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        buf = io.StringIO()
        buf.write(f"# lower={self.lower!r} mesh={self.mesh!r} n={self.n} periodic={int(self.periodic)}\n")
        buf.write(",".join([f"x_{i + 1}" for i in range(self.dim)] + ["value"]) + "\n")
        cs = [c.ravel() for c in self.coords()]
        for i, v in enumerate(self.values.ravel()):
            buf.write(",".join([repr(float(c[i])) for c in cs] + [repr(float(v))]) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        lines = text.splitlines()
        meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
        dim = len(lines[1].split(",")) - 1
        n = int(meta["n"])
        vals = np.array([float(l.rsplit(",", 1)[1]) for l in lines[2:] if l.strip()])
        return cls(vals.reshape((n,) * dim), float(meta["lower"]), float(meta["mesh"]), bool(int(meta["periodic"])))

    def to_bytes(self) -> bytes:
        """Header ``d, R, eps, lower, n, periodic`` then little-endian float64 values, row-major."""
        head = _BINARY_HEADER.pack(self.dim, self.R, self.mesh, self.lower, self.n, int(self.periodic))
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        d, _R, mesh, lower, n, periodic = _BINARY_HEADER.unpack_from(blob)
        vals = np.frombuffer(blob, dtype="<f8", offset=_BINARY_HEADER.size).reshape((n,) * d)
        return cls(vals.copy(), lower, mesh, bool(periodic))

    def __repr__(self):
        return f"GridFunction(dim={self.dim}, n={self.n}, lower={self.lower}, mesh={self.mesh}, periodic={self.periodic})"


# ---------------------------------------------------------------------------
# problems


class ContinuousKind(str, enum.Enum):
    B = "b"
    AB = "ab"
    RWRS = "rwrs"
    GKS = "gks"


def default_grid(dim: int) -> Tuple[float, float]:
    """Default ``(R, mesh)``: ``(12, 0.02)`` in d=1 and ``(6, 0.1)`` in d=2."""
    if dim == 1:
        return 12.0, 0.02
    if dim == 2:
        return 6.0, 0.1
    raise ValueError("grid solves are limited to d <= 2")


@dataclass(frozen=True)
class ContinuousProblem:
    kind: ContinuousKind
    dim: int = 1
    R: float = 12.0
    mesh: float = 0.02
    rho: Optional[float] = None
    gamma: Optional[float] = None
    model: Optional[CumulantModel] = None
    theta: Optional[float] = None
    u: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ContinuousKind(self.kind))
        k = self.kind
        if self.dim not in (1, 2):
            raise ValueError("grid solves are limited to d <= 2")
        n = 2 * self.R / self.mesh
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or self.mesh <= 0:
            raise ValueError("2R/mesh must be a positive integer")
        if k in (ContinuousKind.B, ContinuousKind.AB) and not (self.rho is not None and self.rho > 0):
            raise ValueError("rho must be positive")
        if k is ContinuousKind.B:
            if self.gamma is None or self.gamma < 0 or self.gamma == 1 or self.gamma >= 1 + 2 / self.dim:
                raise ValueError("B needs gamma in [0, 1 + 2/d) with gamma != 1")
        if k is ContinuousKind.RWRS and (self.model is None or not (self.theta and self.theta > 0)):
            raise ValueError("RWRS needs a model and theta > 0")
        if k is ContinuousKind.GKS and (self.model is None or not (self.u and self.u > 0)):
            raise ValueError("GKS needs a model and u > 0")

    @property
    def n(self) -> int:
        return int(round(2 * self.R / self.mesh))

    def refined(self, factor: int = 2) -> "ContinuousProblem":
        return replace(self, mesh=self.mesh / factor)

    def with_box(self, R: float, mesh: Optional[float] = None) -> "ContinuousProblem":
        return replace(self, R=R, mesh=self.mesh if mesh is None else mesh)


def objective_grid(prob: ContinuousProblem, g: GridFunction) -> float:
    """Evaluate the problem's functional at ``g`` directly from its node values."""
    kin = g.gradient_energy()
    v = g.values
    k = prob.kind
    if k is ContinuousKind.B:
        gam = prob.gamma
        if gam == 0:
            supp = g.integral(v > SUPPORT_FLOOR)
        else:
            supp = g.integral(np.abs(v) ** (2 * gam))
        return kin + prob.rho / (1 - gam) * (supp - g.l2_norm_sq())
    if k is ContinuousKind.AB:
        return kin - prob.rho * g.integral(xlogy(v * v, v * v))
    if k is ContinuousKind.RWRS:
        return kin - prob.theta * g.integral(prob.model.H(v * v))
    pen = _sphere.DualPenalty(prob.model, prob.u, cell=g.mesh**g.dim)
    return kin + pen.value(v.ravel() * g.mesh ** (g.dim / 2))


# ---------------------------------------------------------------------------
# oracles


def gaussian_oracle_AB(rho: float, d: int) -> float:
    """Best Gaussian ``g^2 = (a/pi)^(d/2) exp(-a|x|^2)``: ``a = rho``, value ``(rho d/2) log(e^2 pi / rho)``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return rho * d / 2.0 * math.log(math.e**2 * math.pi / rho)


def sine_oracle_B0(rho: float) -> float:
    """``min_L (pi^2/L^2 + rho L) - rho = 3 (pi^2 rho^2 / 4)^(1/3) - rho`` for half-sines on intervals."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return 3.0 * (math.pi**2 * rho**2 / 4.0) ** (1.0 / 3.0) - rho


def gaussian_candidate(a: float, R: float, mesh: float, dim: int = 1) -> GridFunction:
    """Normalised ``g = exp(-a |x|^2 / 2)`` on the closed box, zeroed on its boundary."""
    g = GridFunction.from_callable(lambda *X: np.exp(-a * sum(x * x for x in X) / 2.0), R, mesh, dim, normalize=False)
    vals = g.values.copy()
    for ax in range(dim):
        idx = [slice(None)] * dim
        idx[ax] = 0
        vals[tuple(idx)] = 0.0
        idx[ax] = -1
        vals[tuple(idx)] = 0.0
    return GridFunction(vals, g.lower, g.mesh).normalized()


# ---------------------------------------------------------------------------
# solver


@dataclass
class GridOptions:
    grad_tol: float = 1e-8
    restarts: int = 2
    max_iter: int = 20_000
    seed: int = 0
    richardson: bool = True
    scan_limit: int = 64
    # extrapolation order; None picks 1 for gamma <= 1/2 and 2 otherwise
    order: Optional[int] = None


@dataclass
class GridSolution:
    value: float
    minimizer: GridFunction
    raw_value: float
    fine_value: Optional[float]
    order: int
    converged: bool
    grad_norm: float
    iterations: int

    def __iter__(self):
        yield self.value
        yield self.minimizer


def _interior_shape(prob: ContinuousProblem):
    return (prob.n - 1,) * prob.dim


def _penalty(prob: ContinuousProblem):
    cell = prob.mesh**prob.dim
    shift = prob.dim * math.log(prob.mesh)
    k = prob.kind
    if k is ContinuousKind.AB:
        return _sphere.PowerPenalty(prob.rho, 1.0, shift)
    if k is ContinuousKind.B:
        return _sphere.PowerPenalty(prob.rho, prob.gamma, shift)
    if k is ContinuousKind.RWRS:
        return _sphere.CumulantPenalty(prob.model, prob.theta, cell)
    return _sphere.DualPenalty(prob.model, prob.u, cell)


def _embed(prob: ContinuousProblem, q: np.ndarray) -> GridFunction:
    g = np.zeros((prob.n + 1,) * prob.dim)
    inner = tuple(slice(1, -1) for _ in range(prob.dim))
    g[inner] = q.reshape(_interior_shape(prob)) / prob.mesh ** (prob.dim / 2)
    return GridFunction(g, -prob.R, prob.mesh)


def _to_q(prob: ContinuousProblem, g: GridFunction) -> np.ndarray:
    if abs(g.mesh - prob.mesh) > 1e-12 or abs(g.R - prob.R) > 1e-9 or g.periodic:
        g = g.interpolate_to(prob.R, prob.mesh)
    inner = tuple(slice(1, -1) for _ in range(prob.dim))
    q = np.maximum(g.values[inner], 0.0).ravel() * prob.mesh ** (prob.dim / 2)
    return q / np.linalg.norm(q)


def _smooth_starts(prob: ContinuousProblem, opts: GridOptions, warm: Optional[GridFunction]):
    starts = []
    if warm is not None:
        starts.append(_to_q(prob, warm) + 1e-8)
    widths = [prob.rho] if prob.kind is ContinuousKind.AB else []
    widths += [0.25, 1.0, 4.0]
    for a in widths:
        starts.append(_to_q(prob, gaussian_candidate(a, prob.R, prob.mesh, prob.dim)) + 1e-10)
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts):
        a = math.exp(rng.uniform(math.log(0.05), math.log(20.0)))
        base = _to_q(prob, gaussian_candidate(a, prob.R, prob.mesh, prob.dim))
        starts.append(base * rng.uniform(0.5, 1.5, size=base.size) + 1e-10)
    return starts


def _solve_support_count(prob: ContinuousProblem, K):
    shape = _interior_shape(prob)
    masks = centred_supports(shape)
    cell = prob.mesh**prob.dim
    best = None
    for mask in masks:
        k = int(mask.sum())
        if prob.dim == 1:
            lam = 4.0 * math.sin(math.pi / (2 * (k + 1))) ** 2 / prob.mesh**2
            j = np.arange(1, k + 1)
            v = np.sin(np.pi * j / (k + 1))
            v /= np.linalg.norm(v)
            idx = np.flatnonzero(mask)
        else:
            idx = np.flatnonzero(mask.ravel())
            lam, v = _sphere.ground_state(K[idx][:, idx])
        val = lam + prob.rho * (cell * k - 1.0)
        if best is None or val < best[0] - 1e-13:
            best = (val, idx, v)
    q = np.zeros(int(np.prod(shape)))
    q[best[1]] = best[2]
    return q, len(masks), True, 0.0


def _solve_finite_support(prob: ContinuousProblem, K, opts: GridOptions):
    from ..discrete import _scan_order

    shape = _interior_shape(prob)
    masks = centred_supports(shape)
    pen = _penalty(prob)
    lower = 0.0 if prob.gamma == 0.5 else 1e-12
    iters = [0]

    def evaluate(i):
        idx = np.flatnonzero(masks[i].ravel())
        sub = K[idx][:, idx]
        q0 = _sphere.ground_state(sub)[1] if prob.dim > 1 else np.sin(np.pi * np.arange(1, idx.size + 1) / (idx.size + 1))
        res = _sphere.minimize_sphere(sub, pen, q0, grad_tol=opts.grad_tol, max_iter=opts.max_iter, lower=lower)
        iters[0] += res.iterations
        return res.value, idx, res

    results = _scan_order(len(masks), opts.scan_limit, evaluate)
    ib = min(results, key=lambda i: (results[i][0], i))
    _, idx, res = results[ib]
    q = np.zeros(int(np.prod(shape)))
    q[idx] = res.q
    q[q <= lower * 1.0000001] = 0.0
    return q / np.linalg.norm(q), iters[0], res.converged, res.grad_norm


def _solve_smooth(prob: ContinuousProblem, K, opts: GridOptions, warm):
    pen = _penalty(prob)
    best = None
    iters = 0
    for q0 in _smooth_starts(prob, opts, warm):
        res = _sphere.minimize_sphere(K, pen, q0, grad_tol=opts.grad_tol, max_iter=opts.max_iter)
        iters += res.iterations
        if best is None or res.value < best.value - 1e-12:
            best = res
    return best.q, iters, best.converged, best.grad_norm


def _solve_single(prob: ContinuousProblem, opts: GridOptions, warm=None):
    K = laplacian_matrix(_interior_shape(prob)) / prob.mesh**2
    if prob.kind is ContinuousKind.B and prob.gamma == 0:
        q, iters, conv, gn = _solve_support_count(prob, K)
    elif prob.kind is ContinuousKind.B and prob.gamma <= 0.5:
        q, iters, conv, gn = _solve_finite_support(prob, K, opts)
    else:
        q, iters, conv, gn = _solve_smooth(prob, K, opts, warm)
    g = _embed(prob, q)
    return objective_grid(prob, g), g, conv, gn, iters


def extrapolation_order(prob: ContinuousProblem) -> int:
    if prob.kind is ContinuousKind.B and prob.gamma <= 0.5:
        return 1
    return 2


def solve_grid(
    prob: ContinuousProblem, opts: Optional[GridOptions] = None, warm_start: Optional[GridFunction] = None
) -> GridSolution:
    """Minimise on the grid; with ``opts.richardson`` also solve at half the mesh and extrapolate.

    Raises
    ------
    NonConvergenceError
        When the final solve misses ``opts.grad_tol``; ``.best`` holds the solution.
    """
    opts = opts or GridOptions()
    v1, g1, conv, gn, iters = _solve_single(prob, opts, warm_start)
    order = opts.order or extrapolation_order(prob)
    fine = None
    value = v1
    minimizer = g1
    if opts.richardson:
        fine_prob = prob.refined(2)
        v2, g2, conv, gn, it2 = _solve_single(fine_prob, opts, g1)
        iters += it2
        fine = v2
        value = v2 + (v2 - v1) / (2**order - 1)
        minimizer = g2
    sol = GridSolution(float(value), minimizer, float(v1), fine, order, bool(conv), float(gn), int(iters))
    if not conv:
        raise NonConvergenceError(f"grid solve stopped with gradient norm {gn:.3e}", best=sol)
    return sol


def solve_grid_best_effort(prob, opts=None, warm_start=None) -> GridSolution:
    try:
        return solve_grid(prob, opts, warm_start)
    except NonConvergenceError as exc:
        return exc.best
