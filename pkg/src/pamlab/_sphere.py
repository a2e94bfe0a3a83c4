"""Minimisation of ``q K q + sum phi(q_i)`` over the non-negative unit sphere.

Every variational problem in the package is brought into this form with
``q = sqrt(p)`` (lattice) or ``q = g * eps^(d/2)`` (grids).  ``K`` is a sparse
positive semi-definite kinetic matrix, ``phi`` a penalty evaluated site-wise
(or, for the GKS kind, a non-separable functional).

The solver runs L-BFGS-B on the cone ``x >= lower`` with the scale-invariant
objective ``F(x / |x|)`` and then polishes with Newton steps on the Lagrange
system restricted to the active set.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq, minimize

NEWTON_FLOOR = 1e-150


@dataclass
class PowerPenalty:
    """Site penalty ``weight * q^2 * E(log q^2 - shift)``.

    ``E(L) = expm1((gamma - 1) L) / (1 - gamma)`` for ``gamma != 1`` and ``-L``
    for ``gamma = 1``.  Summed over a unit vector this equals
    ``weight/(1-gamma) * (exp(-(gamma-1) shift) sum q^(2 gamma) - 1)`` and
    ``-weight * (sum q^2 log q^2 - shift)`` respectively; the expm1 form stays
    accurate as ``gamma -> 1``.
    """

    weight: float
    gamma: float
    shift: float = 0.0
    separable = True

    def _E(self, q):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            L = 2.0 * np.log(q) - self.shift
            if self.gamma == 1.0:
                return -L
            return np.expm1((self.gamma - 1.0) * L) / (1.0 - self.gamma)

    def value_terms(self, q):
        E = self._E(q)
        with np.errstate(invalid="ignore"):
            out = self.weight * q * q * E
        return np.where(q > 0, out, 0.0)

    def value(self, q) -> float:
        return float(np.sum(self.value_terms(q)))

    def grad(self, q):
        g = self.gamma
        E = self._E(q)
        with np.errstate(invalid="ignore", over="ignore"):
            out = 2.0 * self.weight * q * (g * E - 1.0)
        if g > 0.5:
            zero = 0.0
        elif g == 0.5:
            zero = 2.0 * self.weight * math.exp(self.shift / 2.0)
        else:
            zero = math.inf
        return np.where(q > 0, out, zero)

    def hess_diag(self, q):
        g = self.gamma
        E = self._E(q)
        with np.errstate(invalid="ignore", over="ignore"):
            out = 2.0 * self.weight * (g * (2.0 * g - 1.0) * E - (2.0 * g + 1.0))
        return np.where(q > 0, out, math.inf)


@dataclass
class CumulantPenalty:
    """Site penalty ``-theta * cell * H(q^2 / cell)`` for a cumulant ``H``."""

    model: object
    theta: float
    cell: float = 1.0
    separable = True

    def value_terms(self, q):
        return -self.theta * self.cell * self.model.H(q * q / self.cell)

    def value(self, q) -> float:
        return float(np.sum(self.value_terms(q)))

    def grad(self, q):
        u = q * q / self.cell
        return -2.0 * self.theta * q * self.model.dH(u)

    def hess_diag(self, q):
        u = q * q / self.cell
        return -2.0 * self.theta * (self.model.dH(u) + 2.0 * u * self.model.d2H(u))


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8, max_iter: int = 200):
    """Maximise a unimodal ``f`` on ``[lo, hi]`` by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        it += 1
    if fc >= fd:
        return c, fc
    return d, fd


class ConcavityWarning(RuntimeWarning):
    pass


@dataclass
class DualPenalty:
    """Non-separable penalty ``sup_b [b u - cell * sum H(b q^2 / cell)]``.

    For convex ``H`` the inner objective is concave in ``b``; its maximiser
    solves ``sum q^2 H'(b q^2 / cell) = u`` and is found by Brent's method in
    ``log b`` on ``[log_lo, log_hi]``, warm-started from the previous call.
    The gradient uses the envelope theorem at the maximiser and the Hessian is
    diagonal plus a rank-one correction from the implicit ``b(q)``.
    """

    model: object
    level: float
    cell: float = 1.0
    log_lo: float = -20.0
    log_hi: float = 20.0
    tol: float = 1e-12
    check_concavity: bool = True
    separable = False
    lbfgs_warmup = 400
    last_beta: float = float("nan")

    def _psi(self, s, w):
        b = math.exp(s)
        return b * self.level - self.cell * float(np.sum(self.model.H(b * w)))

    def _inner(self, q):
        w = q * q / self.cell
        q2 = q * q

        def slope(s):
            return float(np.sum(q2 * self.model.dH(math.exp(s) * w))) - self.level

        lo, hi = self.log_lo, self.log_hi
        if math.isfinite(self.last_beta):
            # bracket around the previous maximiser first
            s0 = min(max(math.log(self.last_beta), lo), hi)
            a, b = max(s0 - 0.5, lo), min(s0 + 0.5, hi)
            if slope(a) <= 0 <= slope(b):
                lo, hi = a, b
        f_lo, f_hi = slope(lo), slope(hi)
        if f_lo >= 0:
            s = lo
        elif f_hi <= 0:
            s = hi
        else:
            s = brentq(slope, lo, hi, xtol=self.tol, rtol=4 * np.finfo(float).eps)
        val = self._psi(s, w)
        if self.check_concavity:
            h = 1e-3
            a, b = self._psi(s - h, w), self._psi(s + h, w)
            if a > val + 1e-9 * (1 + abs(val)) or b > val + 1e-9 * (1 + abs(val)):
                warnings.warn("inner supremum is not unimodal at this point", ConcavityWarning, stacklevel=3)
        self.last_beta = math.exp(s)
        return self.last_beta, val

    def value(self, q) -> float:
        return self._inner(q)[1]

    def value_and_grad(self, q):
        b, val = self._inner(q)
        grad = -2.0 * b * q * self.model.dH(b * q * q / self.cell)
        return val, grad

    def grad(self, q):
        return self.value_and_grad(q)[1]

    def hess_lowrank(self, q, qa):
        """``(diag, v, c)`` with Hessian ``diag(diag) + c v v^T`` on the active entries ``qa``."""
        b, _ = self._inner(q)
        w = qa * qa / self.cell
        h1 = self.model.dH(b * w)
        h2 = self.model.d2H(b * w)
        diag = -2.0 * b * h1 - 4.0 * b * b * w * h2
        v = -2.0 * qa * (h1 + b * w * h2)
        wall = q * q / self.cell
        curv = self.cell * float(np.sum(wall * wall * self.model.d2H(b * wall)))
        c = 1.0 / curv if curv > 0 else 0.0
        return diag, v, c


@dataclass
class SphereResult:
    q: np.ndarray
    value: float
    grad_norm: float
    kkt_violation: float
    iterations: int
    converged: bool


def _value_grad(K, pen, q):
    Kq = K @ q
    if getattr(pen, "separable", True):
        v = float(q @ Kq) + pen.value(q)
        g = 2.0 * Kq + pen.grad(q)
    else:
        pv, pg = pen.value_and_grad(q)
        v = float(q @ Kq) + pv
        g = 2.0 * Kq + pg
    return v, g


def residual(K, pen, q, zero_floor: float = 0.0):
    """Riemannian gradient norm on the support and KKT violation off it."""
    v, g = _value_grad(K, pen, q)
    lam = float(g @ q)
    r = g - lam * q
    active = q > zero_floor
    gn = float(np.linalg.norm(r[active & np.isfinite(r)]))
    off = r[~active]
    kkt = float(max(0.0, -off.min())) if off.size else 0.0
    return v, gn, kkt


def _normalize(x):
    n = np.linalg.norm(x)
    if not n > 0:
        raise FloatingPointError("zero vector on the sphere")
    return x / n


def _lbfgs(K, pen, x0, lower, max_iter, gtol):
    it = [0]

    def fun(x):
        n = np.linalg.norm(x)
        q = x / n
        v, g = _value_grad(K, pen, q)
        rg = (g - (g @ q) * q) / n
        return v, rg

    bounds = [(lower, None)] * x0.size
    res = minimize(
        fun,
        np.maximum(x0, lower),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": int(max_iter), "maxfun": int(2 * max_iter), "ftol": 1e-16, "gtol": gtol, "maxcor": 20},
    )
    it[0] = res.nit
    return _normalize(res.x), res.nit


def _newton(K, pen, q, grad_tol, lower, max_steps=40):
    """Damped Newton iteration on the active-set Lagrange system."""
    lowrank = hasattr(pen, "hess_lowrank")
    if not (lowrank or hasattr(pen, "hess_diag")):
        return q, 0
    steps = 0
    Kc = K.tocsr()
    v0, gn0, _ = residual(K, pen, q)
    for _ in range(max_steps):
        if gn0 < 0.05 * grad_tol:
            break
        active = np.flatnonzero(q > max(NEWTON_FLOOR, lower * 1.0000001))
        if active.size == 0:
            break
        _, g = _value_grad(K, pen, q)
        lam2 = float(g @ q)
        qa = q[active]
        if lowrank:
            hd, v, c = pen.hess_lowrank(q, qa)
        else:
            hd = pen.hess_diag(qa)
        if not np.all(np.isfinite(hd)):
            break
        Kaa = Kc[active][:, active]
        J11 = 2.0 * Kaa + sp.diags(hd - lam2)
        col = sp.csr_matrix(-2.0 * qa[:, None])
        row = sp.csr_matrix(qa[None, :])
        rhs = -np.concatenate([g[active] - lam2 * qa, [0.0]])
        if lowrank:
            # rank-one term c v v^T via an extra unknown s = v . dq
            vc = sp.csr_matrix(c * v[:, None])
            vr = sp.csr_matrix(v[None, :])
            J = sp.bmat([[J11, col, vc], [row, None, None], [vr, None, sp.csr_matrix([[-1.0]])]], format="csc")
            rhs = np.concatenate([rhs, [0.0]])
        else:
            J = sp.bmat([[J11, col], [row, None]], format="csc")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                sol = spla.spsolve(J, rhs)
        except Exception:
            break
        if not np.all(np.isfinite(sol)):
            break
        dq = sol[: active.size]
        alpha = 1.0
        accepted = False
        for _ in range(30):
            trial = q.copy()
            # per-site damping keeps tiny tail entries positive without stalling the bulk
            trial[active] = np.maximum(np.maximum(qa + alpha * dq, 0.1 * qa), lower)
            trial = _normalize(trial)
            v1, gn1, _ = residual(K, pen, trial)
            if np.isfinite(v1) and v1 <= v0 + 1e-12 * (1.0 + abs(v0)) and gn1 < gn0:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        q, v0, gn0 = trial, v1, gn1
        steps += 1
    return q, steps


def _release(K, pen, q, tol):
    """Lift zero sites whose gradient points into the cone to a small positive value."""
    _, g = _value_grad(K, pen, q)
    lam2 = float(g @ q)
    r = g - lam2 * q
    viol = (q <= 0) & (r < -tol)
    if not np.any(viol):
        return q
    diag = np.asarray(K.diagonal()) if sp.issparse(K) else np.diag(K)
    q = q.copy()
    # fill layer by layer: each released site can expose the next one
    for _ in range(q.size):
        q[viol] = -r[viol] / (4.0 * np.maximum(diag[viol], 1e-300))
        Kq = K @ q
        r = 2.0 * Kq + pen.grad(q) - lam2 * q if getattr(pen, "separable", True) else r
        viol = (q <= 0) & (r < -1e-300)
        if not np.any(viol) or not getattr(pen, "separable", True):
            break
    return _normalize(q)


def minimize_sphere(
    K,
    pen,
    q0,
    *,
    grad_tol: float = 1e-9,
    max_iter: int = 100_000,
    lower: float = 0.0,
    cycles: int = 4,
) -> SphereResult:
    """Local minimiser of ``q K q + pen(q)`` on ``{|q| = 1, q >= lower}``.

    ``lower > 0`` is used for penalties whose derivative blows up at zero
    (fixed-support solves); sites pinned at ``lower`` count as inactive.
    """
    x = _normalize(np.maximum(np.asarray(q0, dtype=float), lower))
    total = 0
    best = None
    zero_floor = lower * 1.0000001 if lower > 0 else 0.0
    budget = int(max_iter)
    warmup = getattr(pen, "lbfgs_warmup", None)
    for cycle in range(cycles):
        n_lbfgs = max(50, budget // cycles)
        if warmup is not None and cycle == 0:
            n_lbfgs = min(n_lbfgs, warmup)
        x, nit = _lbfgs(K, pen, x, lower, n_lbfgs, gtol=1e-3 * grad_tol)
        total += nit
        x, nsteps = _newton(K, pen, x, grad_tol, lower)
        total += nsteps
        v, gn, kkt = residual(K, pen, x, zero_floor)
        for _ in range(8):
            if kkt < max(grad_tol, 1e-9) or lower > 0:
                break
            x = _release(K, pen, x, grad_tol)
            x, nsteps = _newton(K, pen, x, grad_tol, lower)
            total += nsteps
            v, gn, kkt = residual(K, pen, x, zero_floor)
        if best is None or v < best.value - 1e-15 or (v <= best.value + 1e-15 and gn < best.grad_norm):
            best = SphereResult(x, v, gn, kkt, total, False)
        if gn < grad_tol and kkt < max(grad_tol, 1e-9):
            best = SphereResult(x, v, gn, kkt, total, True)
            break
        if total >= budget:
            break
    best.iterations = total
    return best


def ground_state(K) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of a symmetric sparse matrix, eigenvector made non-negative."""
    n = K.shape[0]
    if n <= 600:
        w, V = np.linalg.eigh(K.toarray() if sp.issparse(K) else K)
        lam, v = w[0], V[:, 0]
    else:
        w, V = spla.eigsh(K.tocsc(), k=1, sigma=-1e-3, which="LM")
        lam, v = w[0], V[:, 0]
    v = np.abs(v)
    return float(lam), v / np.linalg.norm(v)
