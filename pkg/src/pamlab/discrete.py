"""Discrete variational problems over probability measures on Z^d.

Two functionals are minimised over measures on a box ``B_R``:

* ``de``:  ``S(p) - rho * sum p log p``
* ``db``:  ``S(p) + rho/(1-gamma) * (sum p^gamma - 1)``, with ``sum p^0`` read
  as the support size.

``S`` is the Dirichlet form of :func:`pamlab.lattice.dirichlet_form`.
"""
from __future__ import annotations

import enum
import itertools
import math
import shlex
import warnings
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from . import _sphere
from .lattice import (
    SUPPORT_FLOOR,
    Boundary,
    LatticeMeasure,
    box_shape,
    dirichlet_form,
    entropy_term,
    gamma_sum,
    laplacian_matrix,
)

__all__ = [
    "Kind",
    "DiscreteProblem",
    "SolverOptions",
    "DiscreteSolution",
    "NonConvergenceError",
    "ExistenceRangeWarning",
    "objective",
    "solve",
    "solve_best_effort",
    "auto_box",
    "brute_force_oracle",
    "oracle_search",
    "support_profile",
    "rho_continuation",
    "candidate_measures",
    "parse_problem",
]


class Kind(str, enum.Enum):
    DE = "de"
    DB = "db"


class ExistenceRangeWarning(RuntimeWarning):
    """Parameters outside the range where a minimiser is known to exist."""


class NonConvergenceError(RuntimeError):
    """Iteration cap reached above the gradient tolerance; ``best`` holds the best solution found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class DiscreteProblem:
    kind: Kind
    rho: float
    dim: int = 1
    radius: int = 10
    boundary: Boundary = Boundary.FREE
    gamma: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.dim < 1 or self.radius < 0:
            raise ValueError("need dim >= 1 and radius >= 0")
        if self.kind is Kind.DB:
            if self.gamma is None or self.gamma < 0 or self.gamma == 1:
                raise ValueError("db needs gamma >= 0 and gamma != 1")
            if self.gamma >= max(1 + 1 / self.dim, 1 + self.rho / (2 * self.dim)):
                warnings.warn(
                    "gamma outside the existence range max(1 + 1/d, 1 + rho/(2d)); mass may escape",
                    ExistenceRangeWarning,
                    stacklevel=3,
                )
        elif self.gamma not in (None, 1, 1.0):
            raise ValueError("de takes no gamma")

    @property
    def exponent(self) -> float:
        """Power in the penalty; 1 stands for the entropy."""
        return 1.0 if self.kind is Kind.DE else float(self.gamma)

    @property
    def shape(self):
        return box_shape(self.dim, self.radius)

    def with_radius(self, radius: int) -> "DiscreteProblem":
        return replace(self, radius=int(radius))

    def with_rho(self, rho: float) -> "DiscreteProblem":
        return replace(self, rho=float(rho))

    def describe(self) -> str:
        g = f" gamma={self.gamma!r}" if self.kind is Kind.DB else ""
        return f"kind={self.kind.value}{g} rho={self.rho!r} d={self.dim} R={self.radius} boundary={self.boundary.value}"


def parse_problem(text: str) -> DiscreteProblem:
    """Parse ``kind=db gamma=0.5 rho=1.0 d=1 R=20 boundary=free``."""
    kv = dict(tok.split("=", 1) for tok in shlex.split(text))
    return DiscreteProblem(
        kind=Kind(kv["kind"]),
        rho=float(kv["rho"]),
        dim=int(kv.get("d", 1)),
        radius=int(kv.get("R", 10)),
        boundary=Boundary(kv.get("boundary", "free")),
        gamma=float(kv["gamma"]) if "gamma" in kv else None,
    )


@dataclass
class SolverOptions:
    grad_tol: float = 1e-9
    box_tol: float = 1e-6
    restarts: int = 16
    max_iter: int = 100_000
    seed: int = 0
    # supports scanned exhaustively up to this many candidates, coarse-to-fine beyond
    scan_limit: int = 64
    tail_extension: bool = True
    # include delta_0, two-site and Gaussian starts besides the warm start
    candidate_starts: bool = True


@dataclass
class DiscreteSolution:
    value: float
    minimizer: LatticeMeasure
    iterations: int
    converged: bool
    restarts_used: int
    grad_norm: float = 0.0
    # natural log of every mass, finite even where the mass underflows to 0.0
    log_mass: Optional[np.ndarray] = None
    problem: Optional[DiscreteProblem] = None

    @property
    def support_size(self) -> int:
        return self.minimizer.support_size()


# ---------------------------------------------------------------------------
# objective


def objective(prob: DiscreteProblem, p: LatticeMeasure) -> float:
    s = dirichlet_form(p)
    if prob.kind is Kind.DE:
        return s - prob.rho * entropy_term(p)
    g = prob.gamma
    return s + prob.rho / (1.0 - g) * (gamma_sum(p, g) - 1.0)


def candidate_measures(prob: DiscreteProblem) -> List[LatticeMeasure]:
    """Explicit feasible measures: delta_0, two-site uniform, discrete Gaussians."""
    d, R = prob.dim, prob.radius
    out = [LatticeMeasure.delta(d, R, prob.boundary)]
    if R >= 1:
        out.append(LatticeMeasure.uniform([(0,) * d, (1,) + (0,) * (d - 1)], d, R, prob.boundary))
    coords = LatticeMeasure.delta(d, R).coords()
    r2 = np.sum(coords**2, axis=-1)
    for width in (0.5, 1.0, 2.0, 4.0, 8.0):
        if width > max(R, 1) / 1.5:
            break
        w = np.exp(-r2 / (2 * width**2))
        out.append(LatticeMeasure(w / w.sum(), prob.boundary))
    return out


# ---------------------------------------------------------------------------
# supports


def centred_supports(shape, periodic: bool = False) -> List[np.ndarray]:
    """Boolean masks of centred intervals (d=1) or discrete balls (d>1), ordered by size.

    ``shape`` must be a cube of odd side; the centre cell is the origin.
    """
    shape = tuple(shape)
    n = shape[0]
    R = (n - 1) // 2
    dim = len(shape)
    masks = []
    if dim == 1:
        for k in range(1, n + 1):
            m = np.zeros(n, bool)
            start = R - (k - 1) // 2
            m[start:start + k] = True
            masks.append(m)
        return masks
    coords = (np.indices(shape) - R).reshape(dim, -1).T.astype(float)
    seen = set()
    for centre in itertools.product((0.0, 0.5), repeat=dim):
        dist = np.sum((coords - np.array(centre)) ** 2, axis=-1).reshape(shape)
        for r2 in np.unique(dist):
            m = dist <= r2 + 1e-9
            key = m.tobytes()
            if key not in seen:
                seen.add(key)
                masks.append(m)
    if periodic:
        full = np.ones(shape, bool)
        if full.tobytes() not in seen:
            masks.append(full)
    masks.sort(key=lambda m: int(m.sum()))
    return masks


def _candidate_supports(prob: DiscreteProblem) -> List[np.ndarray]:
    return centred_supports(prob.shape, prob.boundary is Boundary.PERIODIC)


def _interval_ground_state(k: int) -> Tuple[float, np.ndarray]:
    j = np.arange(1, k + 1)
    v = np.sin(np.pi * j / (k + 1))
    return 4.0 * math.sin(math.pi / (2 * (k + 1))) ** 2, v / np.linalg.norm(v)


def _restricted(L, mask):
    idx = np.flatnonzero(mask.ravel())
    return L[idx][:, idx], idx


def _scan_order(n_cand: int, limit: int, evaluate):
    """Evaluate candidates exhaustively, or coarse-then-local when there are many."""
    results = {}
    if n_cand <= limit:
        for i in range(n_cand):
            results[i] = evaluate(i)
        return results
    stride = int(math.ceil(n_cand / (limit // 2)))
    for i in range(0, n_cand, stride):
        results[i] = evaluate(i)
    best = min(results, key=lambda i: results[i][0])
    for i in range(max(0, best - stride), min(n_cand, best + stride + 1)):
        if i not in results:
            results[i] = evaluate(i)
    return results


# ---------------------------------------------------------------------------
# solver


def _canonicalize(p: np.ndarray, boundary: Boundary, log_mass=None):
    """Shift so the barycentre is nearest the origin, when the shift loses no mass."""
    R = (p.shape[0] - 1) // 2
    coords = np.indices(p.shape).reshape(p.ndim, -1) - R
    bary = coords @ p.ravel() / p.sum()
    shift = tuple(int(-np.round(b)) for b in bary)
    if not any(shift):
        return p, log_mass
    if boundary is Boundary.FREE:
        moved = np.roll(p, shift, axis=tuple(range(p.ndim)))
        # refuse shifts that would wrap mass around the box
        wrapped = np.zeros(p.shape, bool)
        for ax, s in enumerate(shift):
            sl = [slice(None)] * p.ndim
            sl[ax] = slice(0, s) if s > 0 else slice(s, None)
            if s:
                wrapped[tuple(sl)] = True
        if np.any(moved[wrapped] > 0):
            return p, log_mass
    out = np.roll(p, shift, axis=tuple(range(p.ndim)))
    if log_mass is not None:
        log_mass = np.roll(log_mass, shift, axis=tuple(range(p.ndim)))
    return out, log_mass


def _extend_tail(q: np.ndarray, prob: DiscreteProblem, lam2: float):
    """Continue a one-dimensional minimiser into the deep tail in log space.

    Far from the centre the stationarity condition balances the incoming
    neighbour against the penalty gradient,
    ``c gamma q_x^(2 gamma - 1) + (2 - c - lam) q_x = q_(x-1)`` with
    ``c = rho/(1-gamma)``, which fixes each mass from its inner neighbour.
    Returns ``log q`` over the box.
    """
    g = prob.gamma
    c = prob.rho / (1.0 - g)
    lam = lam2 / 2.0
    with np.errstate(divide="ignore"):
        s = np.log(q)
    n = q.size
    centre = int(np.argmax(q))
    for direction in (1, -1):
        x = centre + direction
        start = None
        while 0 <= x < n:
            # the dropped outer neighbour is negligible once the profile falls this steeply
            if q[x] < 1e-3 * q[x - direction] or q[x] < 1e-30:
                start = x
                break
            x += direction
        if start is None:
            continue
        x = start
        while 0 <= x < n:
            prev = s[x - direction]
            # fixed-point iteration on s with the linear correction in log1p form
            sx = (prev - math.log(c * g)) / (2 * g - 1)
            for _ in range(3):
                corr = (2.0 - c - lam) / (c * g) * math.exp((2.0 - 2.0 * g) * sx)
                if corr <= -1:
                    break
                sx = (prev - math.log(c * g) - math.log1p(corr)) / (2 * g - 1)
            s[x] = sx
            x += direction
    return s


def _solve_support_count(prob: DiscreteProblem, opts: SolverOptions, L):
    masks = _candidate_supports(prob)
    best = None
    for mask in masks:
        k = int(mask.sum())
        if prob.dim == 1 and not (prob.boundary is Boundary.PERIODIC and k == mask.size):
            lam, v = _interval_ground_state(k)
            idx = np.flatnonzero(mask)
        else:
            sub, idx = _restricted(L, mask)
            lam, v = _sphere.ground_state(sub)
        val = lam + prob.rho * (k - 1)
        if best is None or val < best[0] - 1e-13:
            best = (val, idx, v)
    q = np.zeros(int(np.prod(prob.shape)))
    q[best[1]] = best[2]
    return q.reshape(prob.shape), len(masks), True, 0.0, 0


def _solve_finite_support(prob: DiscreteProblem, opts: SolverOptions, L):
    g = prob.gamma
    pen = _sphere.PowerPenalty(prob.rho, g)
    lower = 0.0 if g == 0.5 else 1e-12
    masks = _candidate_supports(prob)
    iters = [0]

    def evaluate(i, q0=None):
        mask = masks[i]
        sub, idx = _restricted(L, mask)
        if q0 is None:
            if prob.dim == 1:
                q0 = _interval_ground_state(idx.size)[1]
            else:
                q0 = _sphere.ground_state(sub)[1]
        res = _sphere.minimize_sphere(sub, pen, q0, grad_tol=opts.grad_tol, max_iter=opts.max_iter, lower=lower)
        iters[0] += res.iterations
        return res.value, idx, res

    results = _scan_order(len(masks), opts.scan_limit, evaluate)
    ibest = min(results, key=lambda i: (results[i][0], i))
    val, idx, res = results[ibest]
    rng = np.random.default_rng(opts.seed)
    used = 0
    for _ in range(opts.restarts):
        q0 = res.q * (1.0 + 0.5 * rng.standard_normal(res.q.size))
        q0 = np.abs(q0) + 1e-3
        v2, _, r2 = evaluate(ibest, q0)
        used += 1
        if v2 < val - 1e-13:
            val, res = v2, r2
    q = np.zeros(int(np.prod(prob.shape)))
    q[idx] = res.q
    # sites pinned at the lower bound belong to a smaller support
    q[q <= lower * 1.0000001] = 0.0
    q /= np.linalg.norm(q)
    return q.reshape(prob.shape), iters[0], res.converged, res.grad_norm, used


def _starts(prob: DiscreteProblem, opts: SolverOptions, warm_start):
    starts = []
    if warm_start is not None:
        w = warm_start.values if isinstance(warm_start, LatticeMeasure) else np.asarray(warm_start)
        if w.shape != prob.shape:
            w = _resize(w, prob.shape)
        starts.append(np.sqrt(np.maximum(w, 0)).ravel() + 1e-8)
    if opts.candidate_starts or not starts:
        for cand in candidate_measures(prob):
            starts.append(np.sqrt(cand.values).ravel() + 1e-6)
    rng = np.random.default_rng(opts.seed)
    coords = LatticeMeasure.delta(prob.dim, prob.radius).coords()
    r2 = np.sum(coords**2, axis=-1).ravel()
    for _ in range(opts.restarts):
        width = rng.uniform(0.3, max(1.0, prob.radius / 2))
        base = np.exp(-r2 / (4 * width**2))
        starts.append(base * rng.uniform(0.5, 1.5, size=base.size) + 1e-6)
    return starts


def _resize(values: np.ndarray, shape):
    """Centre-crop or zero-pad a measure array onto a box of another size."""
    out = np.zeros(shape)
    n_old, n_new = values.shape[0], shape[0]
    if n_new >= n_old:
        off = (n_new - n_old) // 2
        out[tuple(slice(off, off + n_old) for _ in shape)] = values
    else:
        off = (n_old - n_new) // 2
        out[...] = values[tuple(slice(off, off + n_new) for _ in shape)]
    return out


def _solve_smooth(prob: DiscreteProblem, opts: SolverOptions, L, warm_start):
    pen = _sphere.PowerPenalty(prob.rho, prob.exponent)
    best = None
    iters = 0
    starts = _starts(prob, opts, warm_start)
    for q0 in starts:
        res = _sphere.minimize_sphere(L, pen, q0, grad_tol=opts.grad_tol, max_iter=opts.max_iter)
        iters += res.iterations
        if best is None or res.value < best.value - 1e-12 or (
            res.value <= best.value + 1e-12 and res.converged and not best.converged
        ):
            best = res
    return best.q.reshape(prob.shape), iters, best.converged, best.grad_norm, len(starts)


def solve(prob: DiscreteProblem, opts: Optional[SolverOptions] = None, warm_start=None) -> DiscreteSolution:
    """Minimise the problem's functional on its box.

    ``db`` with ``gamma = 0`` is solved by enumerating centred supports and
    their Dirichlet ground states; ``0 < gamma <= 1/2`` by a smooth solve on
    each centred support; all other cases by a smooth solve on the whole box
    from several deterministic and random starts.

    Raises
    ------
    NonConvergenceError
        If the best local solution misses ``opts.grad_tol``; ``.best`` holds it.
    """
    opts = opts or SolverOptions()
    L = laplacian_matrix(prob.shape, prob.boundary is Boundary.PERIODIC)
    g = prob.exponent
    if prob.kind is Kind.DB and g == 0:
        q, iters, conv, gn, used = _solve_support_count(prob, opts, L)
    elif prob.kind is Kind.DB and g <= 0.5:
        q, iters, conv, gn, used = _solve_finite_support(prob, opts, L)
    else:
        q, iters, conv, gn, used = _solve_smooth(prob, opts, L, warm_start)

    p = q * q
    p /= p.sum()
    log_mass = None
    if (
        opts.tail_extension
        and prob.kind is Kind.DB
        and 0.5 < g < 1
        and prob.dim == 1
        and prob.boundary is Boundary.FREE
    ):
        qq = np.sqrt(p)
        pen = _sphere.PowerPenalty(prob.rho, g)
        grad = 2.0 * (L @ qq) + pen.grad(qq)
        s = _extend_tail(qq, prob, float(grad @ qq))
        log_mass = 2.0 * s
        p = np.exp(log_mass)
        p /= p.sum()
    elif np.all(p > 0):
        log_mass = np.log(p)
    p, log_mass = _canonicalize(p, prob.boundary, log_mass)
    p.setflags(write=True)
    p[p < 0] = 0.0
    measure = LatticeMeasure(p / p.sum(), prob.boundary, check=False)
    value = objective(prob, measure)

    # explicit candidates are feasible; a local solve must not end above them
    for cand in candidate_measures(prob):
        cv = objective(prob, cand)
        if cv < value - 1e-12:
            measure, value, log_mass = cand, cv, None
    sol = DiscreteSolution(value, measure, int(iters), bool(conv), int(used), float(gn), log_mass, prob)
    if not conv:
        raise NonConvergenceError(
            f"gradient norm {gn:.3e} above tolerance {opts.grad_tol:.1e} for {prob.describe()}", best=sol
        )
    return sol


def solve_best_effort(prob: DiscreteProblem, opts: Optional[SolverOptions] = None, warm_start=None) -> DiscreteSolution:
    """Like :func:`solve` but returns the best-so-far solution instead of raising."""
    try:
        return solve(prob, opts, warm_start)
    except NonConvergenceError as exc:
        return exc.best


def auto_box(prob: DiscreteProblem, opts: Optional[SolverOptions] = None, max_radius: int = 256) -> DiscreteSolution:
    """Double the box radius until the value moves by less than ``opts.box_tol``."""
    opts = opts or SolverOptions()
    R = max(prob.radius, 1)
    sol = solve(prob.with_radius(R), opts)
    while 2 * R <= max_radius:
        nxt = solve(prob.with_radius(2 * R), opts, warm_start=sol.minimizer)
        if abs(nxt.value - sol.value) < opts.box_tol:
            return nxt
        R, sol = 2 * R, nxt
    warnings.warn(f"box radius capped at {R} before reaching box_tol", RuntimeWarning, stacklevel=2)
    return sol


def support_profile(sol: DiscreteSolution, floor: float = SUPPORT_FLOOR):
    """Support size and the mass outside the half box ``|z|_inf > R/2``.

    Returns ``(support_size, tail_mass, log_tail_mass)``; the log form stays
    finite when the tail underflows double precision.
    """
    p = sol.minimizer
    coords = p.coords()
    far = np.max(np.abs(coords), axis=-1) > p.radius / 2
    tail = float(p.values[far].sum())
    if sol.log_mass is not None:
        lm = sol.log_mass[far]
        log_tail = float(np.logaddexp.reduce(lm)) if lm.size else -math.inf
    else:
        log_tail = math.log(tail) if tail > 0 else -math.inf
    return p.support_size(floor), tail, log_tail


def rho_continuation(
    base: DiscreteProblem, rho_grid: Sequence[float], opts: Optional[SolverOptions] = None
) -> List[Tuple[float, float]]:
    """Solve along an increasing ``rho`` grid, warm-starting from the previous minimiser."""
    grid = list(rho_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("rho grid must be increasing")
    out = []
    prev = None
    for r in grid:
        sol = solve(base.with_rho(r), opts, warm_start=prev)
        prev = sol.minimizer
        out.append((float(r), sol.value))
    return out


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass
class OracleResult:
    value: float
    support_size: int
    masses: np.ndarray
    pattern: Tuple


def _patterns(prob: DiscreteProblem, k: int):
    """Support patterns of exactly ``k`` sites up to translation.

    In d=1 a gap of one empty site already decouples two blocks, so windows of
    width ``2k - 1`` cover every case.  In d>1 only patterns inside a ``k``-wide
    window are listed, which covers every connected pattern.
    """
    n = prob.shape[0]
    w = min(2 * k - 1, n) if prob.dim == 1 else min(k, n)
    sites = list(itertools.product(range(w), repeat=prob.dim))
    seen = set()
    for combo in itertools.combinations(sites, k):
        arr = np.array(combo)
        arr -= arr.min(axis=0)
        key = tuple(sorted(map(tuple, arr)))
        if key in seen or np.any(arr.max(axis=0) >= n):
            continue
        seen.add(key)
        yield key


def _simplex_grid(k: int, step: float) -> np.ndarray:
    m = int(round(1.0 / step))
    if k == 1:
        return np.ones((1, 1))
    cuts = np.array(list(itertools.combinations(range(m + k - 1), k - 1)))
    # stars and bars: gaps between bars are the coordinates
    padded = np.hstack([-np.ones((cuts.shape[0], 1), int), cuts, np.full((cuts.shape[0], 1), m + k - 1)])
    return (np.diff(padded, axis=1) - 1) / m


def _pattern_energy(prob: DiscreteProblem, pattern):
    """Quadratic form of the Dirichlet energy restricted to a pattern of sites."""
    k = len(pattern)
    d = prob.dim
    n = prob.shape[0]
    periodic = prob.boundary is Boundary.PERIODIC
    Q = np.eye(k) * 2 * d
    for i, a in enumerate(pattern):
        for j, b in enumerate(pattern):
            if i == j:
                continue
            diff = np.subtract(a, b)
            if periodic:
                diff = (diff + n // 2) % n - n // 2
            if np.sum(np.abs(diff)) == 1:
                Q[i, j] -= 1
    return Q


def _penalty_values(prob: DiscreteProblem, P: np.ndarray) -> np.ndarray:
    if prob.kind is Kind.DE:
        return -prob.rho * np.sum(xlogy(P, P), axis=1)
    g = prob.gamma
    if g == 0:
        return prob.rho * (np.sum(P > 0, axis=1) - 1.0)
    return prob.rho / (1.0 - g) * (np.sum(P**g, axis=1) - 1.0)


def _pattern_values(prob, Q, P):
    S = np.sqrt(P)
    kinetic = np.einsum("ij,jk,ik->i", S, Q, S)
    return kinetic + _penalty_values(prob, P)


def _compass(prob, Q, p, step, min_step=1e-9):
    """Pattern search along the edges ``e_i - e_j`` of the simplex."""
    k = p.size
    f = float(_pattern_values(prob, Q, p[None, :])[0])
    dirs = [(i, j) for i in range(k) for j in range(k) if i != j]
    while dirs and step > min_step:
        improved = False
        trials = []
        for i, j in dirs:
            t = p.copy()
            t[i] += step
            t[j] -= step
            if t[j] < 0:
                t[i] += t[j]
                t[j] = 0.0
            trials.append(t)
        T = np.array(trials)
        vals = _pattern_values(prob, Q, T)
        m = int(np.argmin(vals))
        if vals[m] < f - 1e-16:
            p, f = T[m], float(vals[m])
            improved = True
        if not improved:
            step *= 0.5
    return f, p


def oracle_search(prob: DiscreteProblem, max_support: int = 4, grid_step: Optional[float] = None) -> OracleResult:
    """Exhaustive search over support patterns of at most ``max_support`` sites.

    Each pattern's simplex is scanned on a grid (step 1e-3 up to three sites,
    2e-2 for four) and the best grid points are refined by compass search down
    to a step of 1e-9.
    """
    if max_support > 4:
        raise ValueError("max_support is limited to 4")
    best = None
    for k in range(1, max_support + 1):
        if k > int(np.prod(prob.shape)):
            break
        step = grid_step or (1e-3 if k <= 3 else 2e-2)
        G = _simplex_grid(k, step)
        interior = G[np.all(G > 0, axis=1)] if k > 1 else G
        if interior.size == 0:
            interior = np.full((1, k), 1.0 / k)
        for pattern in _patterns(prob, k):
            Q = _pattern_energy(prob, pattern)
            vals = _pattern_values(prob, Q, interior)
            order = np.argsort(vals)[:3]
            for o in order:
                f, p = _compass(prob, Q, interior[o].copy(), step)
                if best is None or f < best.value - 1e-15:
                    best = OracleResult(f, int(np.sum(p > SUPPORT_FLOOR)), p, pattern)
    return best


def brute_force_oracle(prob: DiscreteProblem, max_support: int = 4) -> float:
    """Best value over all support patterns with at most ``max_support`` sites."""
    return oracle_search(prob, max_support).value
