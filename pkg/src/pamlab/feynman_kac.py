"""Random-walk local times, annealed moments and the quenched lattice equation.

Walk convention: generator ``kappa * Delta`` with ``Delta f(z) = sum_{y ~ z} (f(y) - f(z))``,
i.e. every site is left at total rate ``2 d kappa`` towards a uniformly chosen
neighbour.  The no-jump probability up to time ``t`` is ``exp(-2 d kappa t)``.
The quenched equation ``du/ds = kappa Delta u + xi u``, ``u(0) = 1_0`` is solved
on a finite box with zero exterior; the mass that crosses the boundary is
tracked as a separate leakage state.
"""
from __future__ import annotations

import io
import itertools
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson
from scipy.stats import t as student_t

from .cumulant import CumulantModel
from .lattice import laplacian_matrix

__all__ = [
    "LocalTimes",
    "QuenchedField",
    "AnnealedEstimate",
    "FewJumpsBracket",
    "DegenerateWeightsWarning",
    "InsufficientESSError",
    "TruncationError",
    "StiffnessError",
    "CI_LEVEL",
    "N_BATCHES",
    "sample_local_times",
    "simulate_paths",
    "path_functionals",
    "default_tilt",
    "excursion_proposal",
    "annealed_moment_mc",
    "few_jumps_oracle",
    "quenched_solve",
    "quenched_path_mc",
    "phase_trend_check",
]

CI_LEVEL = 0.999
N_BATCHES = 16
CHUNK = 8192


class DegenerateWeightsWarning(RuntimeWarning):
    """Effective sample size below 1% of the number of paths."""


class InsufficientESSError(RuntimeError):
    pass


class TruncationError(RuntimeError):
    """Few-jumps bracket wider than 0.5 in log."""


class StiffnessError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# path sampling


@dataclass
class PathBatch:
    """Piecewise-constant paths stored segment by segment."""

    n_paths: int
    path: np.ndarray  # segment -> path index
    site: np.ndarray  # segment -> lattice site, shape (S, d)
    duration: np.ndarray  # segment -> holding time
    jumps: np.ndarray  # path -> jump count


def _simulate(n_paths: int, t: float, rate: float, d: int, rng: np.random.Generator) -> PathBatch:
    jumps = rng.poisson(rate * t, n_paths)
    total = int(jumps.sum())
    nseg = jumps + 1
    seg_off = np.concatenate([[0], np.cumsum(nseg)[:-1]])
    jump_path = np.repeat(np.arange(n_paths), jumps)
    times = rng.random(total) * t
    order = np.lexsort((times, jump_path))
    times = times[order]
    rank = np.arange(total) - np.repeat(np.cumsum(jumps) - jumps, jumps)
    end_slot = seg_off[jump_path] + rank  # segment ended by this jump

    n_s = total + n_paths
    seg_end = np.full(n_s, float(t))
    seg_end[end_slot] = times
    seg_start = np.zeros(n_s)
    seg_start[end_slot + 1] = times
    duration = seg_end - seg_start

    axis = rng.integers(0, d, size=total)
    sign = rng.integers(0, 2, size=total) * 2 - 1
    step = np.zeros((n_s, d), dtype=np.int64)
    step[end_slot + 1, axis] = sign
    cum = np.cumsum(step, axis=0)
    site = cum - np.repeat(cum[seg_off], nseg, axis=0)
    return PathBatch(n_paths, np.repeat(np.arange(n_paths), nseg), site, duration, jumps)


def _simulate_two_rate(n_paths: int, t: float, home_rate: float, away_rate: float, d: int, rng):
    """Walks that leave the origin at ``home_rate`` and every other site at ``away_rate``.

    Returns the batch plus per-path jump counts from the origin and elsewhere.
    """
    pos = np.zeros((n_paths, d), dtype=np.int64)
    now = np.zeros(n_paths)
    alive = np.arange(n_paths)
    n_home = np.zeros(n_paths, dtype=np.int64)
    n_away = np.zeros(n_paths, dtype=np.int64)
    paths, sites, durs = [], [], []
    while alive.size:
        at_home = ~np.any(pos[alive] != 0, axis=1)
        rate = np.where(at_home, home_rate, away_rate)
        hold = rng.exponential(1.0, alive.size) / rate
        end = np.minimum(now[alive] + hold, t)
        paths.append(alive)
        sites.append(pos[alive].copy())
        durs.append(end - now[alive])
        jump = now[alive] + hold < t
        movers = alive[jump]
        n_home[movers] += at_home[jump]
        n_away[movers] += ~at_home[jump]
        axis = rng.integers(0, d, size=movers.size)
        sign = rng.integers(0, 2, size=movers.size) * 2 - 1
        pos[movers, axis] += sign
        now[movers] = end[jump]
        alive = movers
    path = np.concatenate(paths)
    order = np.argsort(path, kind="stable")
    batch = PathBatch(n_paths, path[order], np.concatenate(sites)[order], np.concatenate(durs)[order], n_home + n_away)
    return batch, n_home, n_away


def simulate_paths(n_paths: int, t: float, kappa_t: float, d: int, seed: int, tilt: float = 0.0) -> PathBatch:
    """``n_paths`` walks on ``[0, t]`` with per-site jump rate ``2 d kappa_t e^(-tilt)``."""
    rng = np.random.default_rng(seed)
    return _simulate(n_paths, t, 2 * d * kappa_t * math.exp(-tilt), d, rng)


def _local_time_table(batch: PathBatch):
    """Aggregate holding times per (path, site): returns path index, site coords and local time."""
    site = batch.site
    d = site.shape[1]
    M = int(np.abs(site).max()) + 1 if site.size else 1
    W = 2 * M + 1
    key = batch.path.astype(np.int64) * W**d
    for k in range(d):
        key = key + (site[:, k] + M) * W**k
    uniq, inv = np.unique(key, return_inverse=True)
    ell = np.bincount(inv, weights=batch.duration)
    first = np.zeros(uniq.size, dtype=np.int64)
    first[inv[::-1]] = np.arange(inv.size)[::-1]
    return uniq // W**d, site[first], ell


def _sum_H(batch: PathBatch, model: CumulantModel) -> np.ndarray:
    p, _, ell = _local_time_table(batch)
    return np.bincount(p, weights=np.asarray(model.H(ell), dtype=float), minlength=batch.n_paths)


@dataclass
class LocalTimes:
    t: float
    occupation: Dict[Tuple[int, ...], float]
    jumps: int
    seed: Optional[int] = None

    @property
    def dim(self) -> int:
        return len(next(iter(self.occupation)))

    def total(self) -> float:
        return float(sum(self.occupation.values()))

    def rescaled(self, alpha: float) -> Dict[Tuple[float, ...], float]:
        """Normalised view ``x = z / alpha -> alpha^d l(z) / t``."""
        d = self.dim
        return {tuple(c / alpha for c in z): alpha**d * v / self.t for z, v in self.occupation.items()}

    def to_csv(self) -> str:
        d = self.dim
        buf = io.StringIO()
        buf.write(f"# t={self.t!r} jumps={self.jumps} seed={self.seed}\n")
        buf.write(",".join([f"z_{i + 1}" for i in range(d)] + ["local_time"]) + "\n")
        for z in sorted(self.occupation):
            buf.write(",".join([str(c) for c in z] + [repr(self.occupation[z])]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LocalTimes":
        lines = text.strip().splitlines()
        meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split())
        occ = {}
        for line in lines[2:]:
            parts = line.split(",")
            occ[tuple(int(c) for c in parts[:-1])] = float(parts[-1])
        seed = None if meta["seed"] == "None" else int(meta["seed"])
        return cls(float(meta["t"]), occ, int(meta["jumps"]), seed)


def sample_local_times(t: float, kappa_t: float, d: int, seed: int) -> LocalTimes:
    """Exact occupation measure of one continuous-time walk on ``[0, t]``."""
    if not (t > 0 and kappa_t > 0):
        raise ValueError("t and kappa_t must be positive")
    batch = simulate_paths(1, t, kappa_t, d, seed)
    _, sites, ell = _local_time_table(batch)
    occ = {tuple(int(c) for c in s): float(v) for s, v in zip(sites, ell)}
    return LocalTimes(float(t), occ, int(batch.jumps[0]), seed)


def path_functionals(
    t: float, kappa_t: float, model: CumulantModel, d: int, n_paths: int, seed: int, tilt: float = 0.0
) -> Tuple[np.ndarray, np.ndarray]:
    """``(sum_z H(l_t(z)), jump count)`` for each sampled path."""
    batch = simulate_paths(n_paths, t, kappa_t, d, seed, tilt)
    return _sum_H(batch, model), batch.jumps


# ---------------------------------------------------------------------------
# annealed moment


@dataclass
class AnnealedEstimate:
    t: float
    log_estimate: float
    ci: float
    ess: float
    n_paths: int
    tilt: float
    seed: int
    away_tilt: float = 0.0

    def __iter__(self):
        yield self.log_estimate
        yield self.ci

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("t", "log_estimate", "ci", "ess", "n_paths", "tilt", "seed", "away_tilt")}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def default_tilt(t: float, kappa_t: float, d: int, target_jumps: float = 1.0) -> float:
    """Tilt that brings the expected jump count down to ``target_jumps`` (never raises it)."""
    return max(0.0, math.log(2 * d * kappa_t * t / target_jumps))


def excursion_proposal(t: float, kappa_t: float, model: CumulantModel, d: int) -> Tuple[float, float]:
    """``(tilt, away_tilt)`` for walks that sit at the origin and make short excursions.

    Time spent off the origin costs roughly ``c = H(t)/t - H(1)`` per unit
    in the exponent, so excursions last about ``1/(rate + c)`` and start at
    about ``rate^2 / (rate + c)``; the proposal uses those two rates.
    """
    rate = 2 * d * kappa_t
    c = max(1.0, float(model.H(t)) / t - float(model.H(1.0)))
    home = max(rate * rate / (rate + c), 1.0 / t)
    return max(0.0, math.log(rate / home)), math.log((rate + c) / rate)


def _chunk_seeds(seed: int, n_paths: int):
    sizes = [CHUNK] * (n_paths // CHUNK) + ([n_paths % CHUNK] if n_paths % CHUNK else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return list(zip(sizes, children))


def _log_terms(t, kappa_t, model, d, n_paths, seed, tilt, threads, integrand, away_tilt=0.0):
    rate = 2 * d * kappa_t
    tilted = rate * math.exp(-tilt)
    away = rate * math.exp(away_tilt)

    def work(job):
        size, ss = job
        rng = np.random.default_rng(ss)
        if away_tilt == 0:
            batch = _simulate(size, t, tilted, d, rng)
            # Radon-Nikodym factor of the original walk against the thinned one
            logw = batch.jumps * tilt + (tilted - rate) * t
        else:
            batch, n_home, n_away = _simulate_two_rate(size, t, tilted, away, d, rng)
            home = ~np.any(batch.site != 0, axis=1)
            t_home = np.bincount(batch.path, weights=batch.duration * home, minlength=size)
            logw = n_home * tilt - n_away * away_tilt + (tilted - rate) * t_home + (away - rate) * (t - t_home)
        return integrand(batch) + logw

    jobs = _chunk_seeds(seed, n_paths)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]
    return np.concatenate(parts)


def _batch_means(lv: np.ndarray, level: float = CI_LEVEL):
    """Log of the mean of ``exp(lv)``, delta-method half-width from batch means, and ESS."""
    shift = float(lv.max())
    w = np.exp(lv - shift)
    mean = float(w.mean())
    log_est = shift + math.log(mean)
    batches = np.array_split(w, N_BATCHES)
    bm = np.array([b.mean() for b in batches])
    se = float(bm.std(ddof=1)) / math.sqrt(N_BATCHES)
    hw = float(student_t.ppf(0.5 + level / 2, N_BATCHES - 1)) * se / mean
    ess = float(w.sum() ** 2 / np.sum(w * w))
    return log_est, hw, ess


def annealed_moment_mc(
    t: float,
    kappa_t: float,
    model: CumulantModel,
    n_paths: int,
    seed: int,
    tilt: Optional[float] = 0.0,
    d: int = 1,
    threads: int = 1,
    away_tilt: float = 0.0,
) -> AnnealedEstimate:
    """Importance-sampled ``log E_walk[exp(sum_z H(l_t(z)))]``.

    Paths use the jump rate scaled by ``exp(-tilt)`` (``tilt=None`` picks
    :func:`default_tilt`).  With ``away_tilt > 0`` the proposal only thins
    jumps out of the origin and speeds up jumps from every other site by
    ``exp(away_tilt)``; the likelihood ratio stays exact.  The half-width is
    for the 99.9% level from 16 batch means and is expressed in log units.
    """
    if n_paths < 100:
        raise ValueError("n_paths must be at least 100")
    if tilt is None:
        tilt = default_tilt(t, kappa_t, d)
    if tilt < 0 or away_tilt < 0:
        raise ValueError("tilts must be non-negative")
    lv = _log_terms(t, kappa_t, model, d, n_paths, seed, tilt, threads, lambda b: _sum_H(b, model), away_tilt)
    log_est, hw, ess = _batch_means(lv)
    if ess < 0.01 * n_paths:
        warnings.warn(f"effective sample size {ess:.1f} of {n_paths}", DegenerateWeightsWarning, stacklevel=2)
    return AnnealedEstimate(float(t), log_est, hw, ess, int(n_paths), float(tilt), int(seed), float(away_tilt))


# ---------------------------------------------------------------------------
# deterministic few-jumps bracket


@dataclass
class FewJumpsBracket:
    log_lower: float
    log_upper: float
    terms: List[float] = field(default_factory=list)  # log contribution of each jump count

    def __iter__(self):
        yield self.log_lower
        yield self.log_upper


_DEFAULT_NODES = {1: 96, 2: 40, 3: 20}


def _visit_patterns(n: int, d: int) -> Dict[Tuple[int, ...], int]:
    """Site labels (by first visit) of the ``n + 1`` segments, with multiplicities over step sequences."""
    steps = [(ax, s) for ax in range(d) for s in (1, -1)]
    out: Dict[Tuple[int, ...], int] = {}
    for seq in itertools.product(steps, repeat=n):
        pos = [0] * d
        seen = {tuple(pos): 0}
        labels = [0]
        for ax, s in seq:
            pos[ax] += s
            key = tuple(pos)
            if key not in seen:
                seen[key] = len(seen)
            labels.append(seen[key])
        lab = tuple(labels)
        out[lab] = out.get(lab, 0) + 1
    return out


def _simplex_rule(n: int, m: int):
    """Collapsed Gauss-Legendre rule for the uniform law on the ``n``-simplex (``n + 1`` parts)."""
    x, w = np.polynomial.legendre.leggauss(m)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    U = np.array(list(itertools.product(x, repeat=n)))
    Wt = np.prod(np.array(list(itertools.product(w, repeat=n))), axis=1)
    parts = np.empty((U.shape[0], n + 1))
    rest = np.ones(U.shape[0])
    logw = np.log(Wt) + gammaln(n + 1)
    for j in range(n):
        parts[:, j] = rest * U[:, j]
        logw += (n - 1 - j) * np.log1p(-U[:, j])
        rest = rest * (1.0 - U[:, j])
    parts[:, n] = rest
    return parts, logw


def few_jumps_oracle(
    t: float,
    kappa_t: float,
    model: CumulantModel,
    k_max: int = 3,
    d: int = 1,
    nodes: Optional[Dict[int, int]] = None,
) -> FewJumpsBracket:
    """Log bounds on ``E_walk[exp(sum H(l_t))]`` from paths with at most ``k_max`` jumps.

    Given ``N = n`` the holding times are uniform on the simplex and the
    step sequence is uniform; both are integrated exactly up to quadrature.
    The upper bound adds ``e^{H(t)} P(N > k_max)`` since ``sum H(l) <= H(t)``.
    """
    if not 0 <= k_max <= 3:
        raise ValueError("k_max must lie in 0..3")
    lam = 2 * d * kappa_t * t
    if poisson.sf(k_max, lam) >= 0.5:
        raise ValueError("Poisson mass beyond k_max must be below 0.5")
    nodes = {**_DEFAULT_NODES, **(nodes or {})}
    Ht = float(model.H(t))
    terms = [Ht - lam]
    for n in range(1, k_max + 1):
        parts, logw = _simplex_rule(n, nodes[n])
        logs = []
        for labels, mult in _visit_patterns(n, d).items():
            A = np.zeros((n + 1, max(labels) + 1))
            A[np.arange(n + 1), labels] = 1.0
            ell = t * (parts @ A)
            val = np.sum(np.asarray(model.H(ell), dtype=float), axis=1)
            logs.append(math.log(mult) + logsumexp(logw + val))
        log_cond = logsumexp(logs) - n * math.log(2 * d)
        terms.append(float(poisson.logpmf(n, lam)) + log_cond)
    lower = float(logsumexp(terms))
    tail = float(poisson.logsf(k_max, lam))
    upper = float(np.logaddexp(lower, Ht + tail))
    if upper - lower > 0.5:
        raise TruncationError(f"bracket width {upper - lower:.3f} exceeds 0.5; raise k_max")
    return FewJumpsBracket(lower, upper, terms)


# ---------------------------------------------------------------------------
# quenched equation


@dataclass
class QuenchedField:
    """Potential on ``[-R, R]^d`` with the time-``t`` solution once solved."""

    potential: np.ndarray
    kappa_t: float
    u: Optional[np.ndarray] = None
    t: Optional[float] = None
    leakage: Optional[float] = None
    method: Optional[str] = None

    def __post_init__(self):
        self.potential = np.asarray(self.potential, dtype=float)
        if any(s % 2 == 0 for s in self.potential.shape):
            raise ValueError("box sides must be odd (centred at the origin)")
        if not self.kappa_t > 0:
            raise ValueError("kappa_t must be positive")

    @property
    def dim(self) -> int:
        return self.potential.ndim

    @property
    def radius(self) -> int:
        return self.potential.shape[0] // 2

    @property
    def total_mass(self) -> float:
        if self.u is None:
            raise ValueError("field not solved yet")
        return float(self.u.sum())

    def origin_index(self) -> int:
        return int(np.ravel_multi_index(tuple(s // 2 for s in self.potential.shape), self.potential.shape))


def _generator(field: QuenchedField) -> sp.csr_matrix:
    """``kappa Delta + diag(xi)`` on the box plus a last row collecting the boundary flux."""
    shape = field.potential.shape
    d = field.dim
    L = laplacian_matrix(shape, periodic=False)
    n = L.shape[0]
    inside = (2 * d * sp.identity(n) - L) @ np.ones(n)
    out_deg = 2 * d - np.asarray(inside).ravel()
    A = -field.kappa_t * L + sp.diags(field.potential.ravel())
    flux = sp.csr_matrix(field.kappa_t * out_deg[None, :])
    return sp.bmat([[A, None], [flux, sp.csr_matrix((1, 1))]], format="csr")


def quenched_solve(field: QuenchedField, t: float, method: str = "expm") -> QuenchedField:
    """``u(t)`` for ``du/ds = kappa Delta u + xi u`` with ``u(0) = 1_0`` and zero exterior.

    ``method="rk-adaptive"`` integrates with RK45 (rtol 1e-8) and falls back
    to the Krylov exponential when the step count indicates stiffness.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    G = _generator(field)
    n = G.shape[0] - 1
    y0 = np.zeros(n + 1)
    y0[field.origin_index()] = 1.0
    used = method
    if method == "rk-adaptive":
        try:
            y = _rk(G, y0, t)
        except StiffnessError as exc:
            warnings.warn(f"{exc}; using the matrix exponential", RuntimeWarning, stacklevel=2)
            y = expm_multiply(G * t, y0)
            used = "expm"
    elif method == "expm":
        y = expm_multiply(G * t, y0)
    else:
        raise ValueError(f"unknown method {method!r}")
    u = np.maximum(y[:n], 0.0).reshape(field.potential.shape)
    return QuenchedField(field.potential, field.kappa_t, u, float(t), float(y[n]), used)


def _rk(G, y0, t, max_steps: int = 200_000):
    nsteps = [0]

    def rhs(_, y):
        nsteps[0] += 1
        if nsteps[0] > 6 * max_steps:
            raise StiffnessError("explicit integrator exceeded its step budget")
        return G @ y

    sol = solve_ivp(rhs, (0.0, t), y0, method="RK45", rtol=1e-8, atol=1e-30)
    if not sol.success:
        raise StiffnessError(sol.message)
    return sol.y[:, -1]


def quenched_path_mc(field: QuenchedField, t: float, n_paths: int, seed: int, level: float = CI_LEVEL):
    """Feynman-Kac estimate of ``U(t)``: mean of ``exp(int xi(X_s) ds)`` over walks killed on leaving the box.

    Returns ``(estimate, half_width)`` in linear units.
    """
    R = field.radius
    xi = field.potential
    rate = 2 * field.dim * field.kappa_t
    vals = []
    for size, ss in _chunk_seeds(seed, n_paths):
        b = _simulate(size, t, rate, field.dim, np.random.default_rng(ss))
        outside = np.any(np.abs(b.site) > R, axis=1)
        site = np.clip(b.site, -R, R) + R
        integral = np.bincount(b.path, weights=xi[tuple(site.T)] * b.duration, minlength=size)
        killed = np.bincount(b.path, weights=outside.astype(float), minlength=size) > 0
        vals.append(np.where(killed, 0.0, np.exp(integral)))
    v = np.concatenate(vals)
    bm = np.array([c.mean() for c in np.array_split(v, N_BATCHES)])
    hw = float(student_t.ppf(0.5 + level / 2, N_BATCHES - 1)) * float(bm.std(ddof=1)) / math.sqrt(N_BATCHES)
    return float(v.mean()), hw


# ---------------------------------------------------------------------------
# trends


def phase_trend_check(
    phase: int,
    model: CumulantModel,
    kappa,
    d: int,
    t_grid: Sequence[float],
    n_paths: int = 20_000,
    seed: int = 0,
    chi: Optional[float] = None,
    tilt: Optional[float] = None,
    threads: int = 1,
    away_tilt: Optional[float] = None,
) -> List[dict]:
    """Normalised annealed log-moments along ``t_grid``.

    Phase 1: ``(log E U - H(t)) / (t kappa)``, target ``-2d``.
    Phase 2: same ratio, target ``-chi``.
    Phase 3: ``(log E U - alpha^d H(t/alpha^d)) alpha^2 / (t kappa)``, target ``-chi``.

    Unset tilts default to :func:`excursion_proposal` in phase 1 and to the
    untilted walk otherwise.
    """
    from .scales import solve_alpha

    if phase not in (1, 2, 3):
        raise ValueError("phase must be 1, 2 or 3")
    if phase != 1 and chi is None:
        raise ValueError("phases 2 and 3 need the variational constant chi")
    rows = []
    for i, t in enumerate(t_grid):
        k = float(kappa(t))
        if phase == 1 and tilt is None and away_tilt is None:
            tl, aw = excursion_proposal(t, k, model, d)
        else:
            tl, aw = (tilt or 0.0), (away_tilt or 0.0)
        est = annealed_moment_mc(t, k, model, n_paths, seed + i, tl, d, threads, aw)
        if est.ess < 0.01 * n_paths:
            raise InsufficientESSError(f"ESS {est.ess:.1f} at t={t}")
        tk = t * k
        if phase == 3:
            a = solve_alpha(t, kappa, model.hscale, d)
            lead = a**d * float(model.H(t / a**d))
            scale = a**2 / tk
        else:
            lead = float(model.H(t))
            scale = 1.0 / tk
        ratio = (est.log_estimate - lead) * scale
        target = -2.0 * d if phase == 1 else -chi
        rows.append(
            {
                "t": float(t),
                "log_estimate": est.log_estimate,
                "ci": est.ci,
                "ess": est.ess,
                "ratio": ratio,
                "ratio_ci": est.ci * scale,
                "target": target,
                "gap": abs(ratio - target),
            }
        )
    return rows
